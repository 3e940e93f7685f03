//! Fixed-point weight encodings: clipping, Q-format fractions and the
//! sign-magnitude representation consumed by the hardware rounder.

use crate::error::{Error, Result};

/// Fraction widths supported by the rounder datapath.
pub const VALID_WIDTHS: [u32; 5] = [2, 4, 8, 16, 32];

pub fn check_width(width: u32) -> Result<()> {
    if VALID_WIDTHS.contains(&width) {
        Ok(())
    } else {
        Err(Error::InvalidWidth(width))
    }
}

/// Clamp a weight into [-1, 1]. Non-finite input is rejected.
pub fn clip(w: f64) -> Result<f64> {
    if !w.is_finite() {
        return Err(Error::NonFinite(w));
    }
    Ok(w.clamp(-1.0, 1.0))
}

/// Unsigned binary-coded fraction: `value = bits / 2^width`, in [0, 1).
///
/// Bit i (1-based, LSB first) carries weight 2^(i-1)/2^width; the MSB is
/// bit `width`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QFraction {
    bits: u32,
    width: u32,
}

impl QFraction {
    pub fn new(bits: u32, width: u32) -> Result<Self> {
        check_width(width)?;
        let max = Self::max_bits(width);
        if bits > max {
            return Err(Error::Format(format!(
                "fraction bits {bits} exceed maximum {max} for width {width}"
            )));
        }
        Ok(Self { bits, width })
    }

    pub fn zero(width: u32) -> Result<Self> {
        Self::new(0, width)
    }

    /// Largest representable bit pattern, 2^width - 1.
    pub fn max_bits(width: u32) -> u32 {
        if width == 32 {
            u32::MAX
        } else {
            (1u32 << width) - 1
        }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    /// Exact real value bits / 2^width.
    pub fn value(&self) -> f64 {
        self.bits as f64 / 2f64.powi(self.width as i32)
    }

    /// Bit i for 1-based index i in 1..=width (i = width is the MSB).
    pub fn bit(&self, i: u32) -> bool {
        debug_assert!(i >= 1 && i <= self.width);
        (self.bits >> (i - 1)) & 1 == 1
    }

    /// Encode a real p in [0, 1] as the nearest width-bit fraction
    /// (ties to even), saturating at 2^width - 1.
    pub fn from_probability(p: f64, width: u32) -> Result<Self> {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(Error::NonFinite(p));
        }
        check_width(width)?;
        let scaled = (p * 2f64.powi(width as i32)).round_ties_even();
        let bits = if scaled >= Self::max_bits(width) as f64 {
            Self::max_bits(width)
        } else {
            scaled as u32
        };
        Ok(Self { bits, width })
    }

    /// Encode an exact rational num/den the same way, without going through
    /// floating point: round to nearest, ties to even, saturate at the top.
    pub fn from_ratio(num: u128, den: u128, width: u32) -> Result<Self> {
        check_width(width)?;
        if den == 0 || num > den {
            return Err(Error::Config(format!(
                "fraction target {num}/{den} is not in [0, 1]"
            )));
        }
        let scaled_num = num << width;
        let q = scaled_num / den;
        let r = scaled_num % den;
        let rounded = match (2 * r).cmp(&den) {
            std::cmp::Ordering::Less => q,
            std::cmp::Ordering::Greater => q + 1,
            std::cmp::Ordering::Equal => q + (q & 1),
        };
        let bits = rounded.min(Self::max_bits(width) as u128) as u32;
        Ok(Self { bits, width })
    }
}

/// A clipped weight as the hardware sees it: a sign and a Q-format magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignMagnitudeWeight {
    pub sign: i8,
    pub magnitude: QFraction,
}

impl SignMagnitudeWeight {
    pub fn value(&self) -> f64 {
        self.sign as f64 * self.magnitude.value()
    }
}

/// Encode a real weight in [-1, 1] as sign plus nearest-even-rounded
/// width-bit magnitude, saturating |w| = 1 at (2^width - 1)/2^width.
pub fn to_sign_magnitude(w: f64, width: u32) -> Result<SignMagnitudeWeight> {
    if !w.is_finite() {
        return Err(Error::NonFinite(w));
    }
    if w.abs() > 1.0 {
        return Err(Error::Config(format!(
            "weight {w} outside [-1, 1]; clip before encoding"
        )));
    }
    let sign = if w >= 0.0 { 1 } else { -1 };
    let magnitude = QFraction::from_probability(w.abs(), width)?;
    Ok(SignMagnitudeWeight { sign, magnitude })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_interior_and_saturation() {
        assert_eq!(clip(0.5).unwrap(), 0.5);
        assert_eq!(clip(3.2).unwrap(), 1.0);
        assert_eq!(clip(-7.0).unwrap(), -1.0);
        assert!(clip(f64::NAN).is_err());
        assert!(clip(f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn sign_magnitude_examples() {
        // 0.6 * 16 = 9.6 rounds to 10
        let w = to_sign_magnitude(0.6, 4).unwrap();
        assert_eq!(w.sign, 1);
        assert_eq!(w.magnitude.bits(), 10);
        assert_eq!(w.magnitude.value(), 0.625);

        // |-1.0| * 16 = 16 saturates at 15
        let w = to_sign_magnitude(-1.0, 4).unwrap();
        assert_eq!(w.sign, -1);
        assert_eq!(w.magnitude.bits(), 15);

        let w = to_sign_magnitude(0.0, 8).unwrap();
        assert_eq!(w.sign, 1);
        assert_eq!(w.magnitude.bits(), 0);
    }

    #[test]
    fn invalid_width_rejected() {
        assert!(to_sign_magnitude(0.5, 3).is_err());
        assert!(QFraction::new(0, 7).is_err());
        assert!(QFraction::new(16, 4).is_err());
    }

    #[test]
    fn ties_round_to_even() {
        // 0.15625 * 16 = 2.5: ties-to-even gives 2, not 3.
        let w = to_sign_magnitude(0.15625, 4).unwrap();
        assert_eq!(w.magnitude.bits(), 2);
        // 0.21875 * 16 = 3.5: rounds to 4.
        let w = to_sign_magnitude(0.21875, 4).unwrap();
        assert_eq!(w.magnitude.bits(), 4);
    }

    #[test]
    fn from_ratio_matches_float_rounding() {
        // 2/3 at 16 bits: 43690.67 -> 43691
        let q = QFraction::from_ratio(2, 3, 16).unwrap();
        assert_eq!(q.bits(), 43691);
        // exact dyadic stays exact
        let q = QFraction::from_ratio(3, 4, 8).unwrap();
        assert_eq!(q.bits(), 192);
        // saturation: 1/1 -> max bits
        let q = QFraction::from_ratio(1, 1, 4).unwrap();
        assert_eq!(q.bits(), 15);
    }

    #[test]
    fn bit_indexing_is_lsb_first() {
        let q = QFraction::new(0b1001, 4).unwrap();
        assert!(q.bit(1));
        assert!(!q.bit(2));
        assert!(!q.bit(3));
        assert!(q.bit(4));
    }

    #[test]
    fn roundtrip_error_bound() {
        // |sign*bits/2^N - clip(w)| <= 2^-(N+1) + 2^-N
        for width in VALID_WIDTHS.iter().take(3).copied() {
            let bound = 2f64.powi(-(width as i32 + 1)) + 2f64.powi(-(width as i32));
            let mut w = -1.0;
            while w <= 1.0 {
                let sm = to_sign_magnitude(w, width).unwrap();
                assert!(
                    (sm.value() - w).abs() <= bound,
                    "w={w} width={width} decoded={}",
                    sm.value()
                );
                w += 0.0137;
            }
        }
    }
}
