//! Daalen modulators: multiplexer chains that turn M fair random bits into
//! one output bit whose 1-probability equals an arbitrary M-bit binary
//! fraction.
//!
//! The chain walks the target bits from LSB to MSB keeping a running state
//! s, initially 0: for target bit b and fresh random bit r,
//! s <- (r OR s) when b = 1, (r AND s) when b = 0. By induction, after the k
//! lowest bits P(s = 1) equals their k-bit fraction, so the final output hits
//! the target exactly with ideal fair bits. The unit tests and the
//! acceptance suite verify this by exhaustive enumeration.

use crate::error::{Error, Result};
use crate::qformat::QFraction;

/// One output bit from `target.width()` fair random bits, LSB-first pairing.
pub fn daalen_bit(target: &QFraction, random_bits: &[bool]) -> Result<bool> {
    if random_bits.len() != target.width() as usize {
        return Err(Error::Config(format!(
            "modulator of width {} fed {} random bits",
            target.width(),
            random_bits.len()
        )));
    }
    let mut s = false;
    for (k, &r) in random_bits.iter().enumerate() {
        s = if target.bit(k as u32 + 1) { r || s } else { r && s };
    }
    Ok(s)
}

/// A modulator locked to one target probability.
#[derive(Debug, Clone, Copy)]
pub struct DaalenModulator {
    target: QFraction,
}

impl DaalenModulator {
    pub fn new(target: QFraction) -> Self {
        Self { target }
    }

    pub fn target(&self) -> &QFraction {
        &self.target
    }

    pub fn width(&self) -> u32 {
        self.target.width()
    }

    pub fn output_bit(&self, random_bits: &[bool]) -> Result<bool> {
        daalen_bit(&self.target, random_bits)
    }
}

/// Exhaustively count the 1-outputs over all 2^M fair-bit patterns; the
/// exactness contract is count / 2^M == target value.
pub fn exhaustive_one_count(target: &QFraction) -> u64 {
    let m = target.width();
    debug_assert!(m <= 20, "exhaustive enumeration over 2^{m} patterns");
    let mut ones = 0u64;
    let mut bits = vec![false; m as usize];
    for pattern in 0u64..(1u64 << m) {
        for (k, b) in bits.iter_mut().enumerate() {
            *b = (pattern >> k) & 1 == 1;
        }
        if daalen_bit(target, &bits).unwrap() {
            ones += 1;
        }
    }
    ones
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_quarters_exhaustive() {
        // target bits "11" at width 2 is 3/4: 3 of the 4 patterns emit 1
        let target = QFraction::new(0b11, 2).unwrap();
        assert_eq!(exhaustive_one_count(&target), 3);
    }

    #[test]
    fn zero_target_never_fires() {
        let target = QFraction::new(0, 8).unwrap();
        assert_eq!(exhaustive_one_count(&target), 0);
    }

    #[test]
    fn half_target_collapses_to_top_bit() {
        // only the MSB set: output equals the last random bit
        let target = QFraction::new(0b1000, 4).unwrap();
        for pattern in 0u32..16 {
            let bits: Vec<bool> = (0..4).map(|k| (pattern >> k) & 1 == 1).collect();
            assert_eq!(daalen_bit(&target, &bits).unwrap(), bits[3]);
        }
    }

    #[test]
    fn wrong_bit_count_rejected() {
        let target = QFraction::new(1, 4).unwrap();
        assert!(daalen_bit(&target, &[true, false]).is_err());
    }

    #[test]
    fn exact_for_all_small_targets() {
        for width in [2u32, 4] {
            for bits in 0..=QFraction::max_bits(width) {
                let target = QFraction::new(bits, width).unwrap();
                assert_eq!(
                    exhaustive_one_count(&target),
                    bits as u64,
                    "width {width} target {bits}"
                );
            }
        }
    }
}
