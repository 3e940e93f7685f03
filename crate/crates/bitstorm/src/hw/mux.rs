//! The N-to-1 multiplexer rounder and its select distribution, in exact
//! rational arithmetic.
//!
//! With the select index drawn from P(sel = i) = 2^(i-1) / (2^N - 1), the
//! probability of a 1 at the output equals value * 2^N / (2^N - 1) for a
//! binary-coded fractional input, within 1/2^N of the value itself. The
//! select distribution factorizes into log2(N) independent select bits with
//! P(sel_j = 1) = 2^(2^(j-1)) / (2^(2^(j-1)) + 1); the factorization is
//! verified outcome by outcome in the tests.

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::qformat::{check_width, QFraction};

/// Exact probability values used throughout the rounder model.
pub type Rational = Ratio<u128>;

/// Route input bit `sel` (1-based) to the output.
pub fn mux_out(input: &QFraction, sel: u32) -> Result<bool> {
    if sel < 1 || sel > input.width() {
        return Err(Error::SelectOutOfRange {
            sel,
            n: input.width(),
        });
    }
    Ok(input.bit(sel))
}

/// P(sel = i) = 2^(i-1) / (2^N - 1) for i in 1..=N.
pub fn select_distribution(n: u32) -> Result<Vec<Rational>> {
    check_width(n)?;
    let denom = (1u128 << n) - 1;
    Ok((0..n).map(|i| Rational::new(1u128 << i, denom)).collect())
}

/// Exact P(out = 1) for an input fraction under the geometric select
/// distribution: value * 2^N / (2^N - 1) = bits / (2^N - 1).
pub fn exact_output_probability(input: &QFraction) -> Rational {
    let denom = (1u128 << input.width()) - 1;
    Rational::new(input.bits() as u128, denom)
}

/// Probability spec for one select bit of the factorized distribution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectBitSpec {
    /// 1-based select-bit index j; bit j contributes 2^(j-1) to sel - 1.
    pub bit_index: u32,
    pub p_one: Rational,
}

/// The log2(N) per-bit Bernoulli probabilities of Eq.-style factorization:
/// P(sel_j = 1) = 2^(2^(j-1)) / (2^(2^(j-1)) + 1).
pub fn select_bit_probabilities(n: u32) -> Result<Vec<SelectBitSpec>> {
    check_width(n)?;
    let nbits = n.trailing_zeros();
    Ok((1..=nbits)
        .map(|j| {
            let e = 1u128 << (1u32 << (j - 1));
            SelectBitSpec {
                bit_index: j,
                p_one: Rational::new(e, e + 1),
            }
        })
        .collect())
}

/// Joint probability of a select index under the factorized per-bit
/// distribution, with sel = 1 + sum_j sel_j * 2^(j-1).
pub fn factored_select_probability(specs: &[SelectBitSpec], sel: u32) -> Rational {
    let mut p = Rational::new(1, 1);
    for (j, spec) in specs.iter().enumerate() {
        let bit = (sel - 1) >> j & 1 == 1;
        p *= if bit {
            spec.p_one
        } else {
            Rational::new(1, 1) - spec.p_one
        };
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mux_routes_the_selected_bit() {
        let ones = QFraction::new(0b1111, 4).unwrap();
        assert!(mux_out(&ones, 3).unwrap());
        let zeros = QFraction::new(0, 4).unwrap();
        for sel in 1..=4 {
            assert!(!mux_out(&zeros, sel).unwrap());
        }
        let q = QFraction::new(0b1001, 4).unwrap();
        assert!(mux_out(&q, 4).unwrap());
        assert!(!mux_out(&q, 2).unwrap());
        assert!(mux_out(&q, 0).is_err());
        assert!(mux_out(&q, 5).is_err());
    }

    #[test]
    fn select_distribution_small_cases() {
        let d = select_distribution(4).unwrap();
        assert_eq!(
            d,
            vec![
                Rational::new(1, 15),
                Rational::new(2, 15),
                Rational::new(4, 15),
                Rational::new(8, 15),
            ]
        );
        let d = select_distribution(2).unwrap();
        assert_eq!(d, vec![Rational::new(1, 3), Rational::new(2, 3)]);
    }

    #[test]
    fn select_distribution_sums_to_one() {
        for n in [2u32, 4, 8, 16, 32] {
            let total: Rational = select_distribution(n).unwrap().into_iter().sum();
            assert_eq!(total, Rational::new(1, 1), "n = {n}");
        }
        assert!(select_distribution(3).is_err());
    }

    #[test]
    fn output_probability_matches_select_enumeration() {
        // independent route: enumerate Eq.-(2)-style sum over select outcomes
        for n in [2u32, 4, 8] {
            let dist = select_distribution(n).unwrap();
            for bits in 0..=QFraction::max_bits(n) {
                let q = QFraction::new(bits, n).unwrap();
                let mut enumerated = Rational::new(0, 1);
                for sel in 1..=n {
                    if mux_out(&q, sel).unwrap() {
                        enumerated += dist[(sel - 1) as usize];
                    }
                }
                assert_eq!(enumerated, exact_output_probability(&q), "n={n} bits={bits}");
            }
        }
    }

    #[test]
    fn worked_example_nine_sixteenths() {
        let q = QFraction::new(0b1001, 4).unwrap();
        assert_eq!(exact_output_probability(&q), Rational::new(9, 15));
        assert_eq!(exact_output_probability(&q), Rational::new(3, 5));
        let all_ones = QFraction::new(15, 4).unwrap();
        assert_eq!(exact_output_probability(&all_ones), Rational::new(1, 1));
        let zero = QFraction::new(0, 4).unwrap();
        assert_eq!(exact_output_probability(&zero), Rational::new(0, 1));
    }

    #[test]
    fn select_bit_probabilities_match_known_values() {
        let specs = select_bit_probabilities(4).unwrap();
        assert_eq!(specs.len(), 2);
        assert_eq!(specs[0].p_one, Rational::new(2, 3));
        assert_eq!(specs[1].p_one, Rational::new(4, 5));
        // joint of both bits set equals the top select probability
        assert_eq!(
            factored_select_probability(&specs, 4),
            Rational::new(8, 15)
        );
    }

    #[test]
    fn denominator_product_identity() {
        // prod_{k=1..log2 M} (2^(2^(k-1)) + 1) = 2^M - 1
        for m in [2u32, 4, 8, 16] {
            let product: u128 = (1..=m.trailing_zeros())
                .map(|k| (1u128 << (1u32 << (k - 1))) + 1)
                .product();
            assert_eq!(product, (1u128 << m) - 1, "m = {m}");
        }
    }

    #[test]
    fn factorization_reproduces_joint_distribution() {
        for n in [2u32, 4, 8, 16] {
            let dist = select_distribution(n).unwrap();
            let specs = select_bit_probabilities(n).unwrap();
            for sel in 1..=n {
                assert_eq!(
                    factored_select_probability(&specs, sel),
                    dist[(sel - 1) as usize],
                    "n={n} sel={sel}"
                );
            }
        }
    }
}
