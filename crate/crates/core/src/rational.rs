//! Exact rational numbers and their textual form.
//!
//! Every numeric quantity in the crate (valuations, prices, duals, the
//! shift constants) is a [`Rational`]. The textual form is `"p/q"` or a bare
//! integer `"p"`; no decimal points are accepted.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

pub type Rational = num_rational::BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

/// `2^k` as a rational.
pub fn pow2(k: usize) -> Rational {
    Rational::from_integer(BigInt::one() << k)
}

pub fn zero() -> Rational {
    Rational::zero()
}

fn parse_integer(text: &str) -> Option<BigInt> {
    let digits = text.strip_prefix('-').unwrap_or(text);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    text.parse().ok()
}

/// Parses `"p/q"` or `"p"` exactly. The denominator must be a positive
/// integer; the result is reduced to lowest terms.
pub fn parse_rational(text: &str) -> Result<Rational, String> {
    let text = text.trim();
    match text.split_once('/') {
        None => parse_integer(text)
            .map(Rational::from_integer)
            .ok_or_else(|| format!("`{text}` is not an integer or p/q fraction")),
        Some((numer, denom)) => {
            let numer = parse_integer(numer.trim())
                .ok_or_else(|| format!("`{text}` has a non-integer numerator"))?;
            let denom_text = denom.trim();
            if denom_text.starts_with('-') {
                return Err(format!("`{text}` has a negative denominator"));
            }
            let denom = parse_integer(denom_text)
                .ok_or_else(|| format!("`{text}` has a non-integer denominator"))?;
            if denom.is_zero() {
                return Err(format!("`{text}` has a zero denominator"));
            }
            Ok(Rational::new(numer, denom))
        }
    }
}

pub fn format_rational(value: &Rational) -> String {
    value.to_string()
}

pub fn is_negative(value: &Rational) -> bool {
    value.is_negative()
}

/// Serde adapter storing a rational as its `"p/q"` string.
pub mod as_string {
    use super::*;
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Rational, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&format_rational(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Rational, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_rational(&text).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_fractions_exactly() {
        assert_eq!(parse_rational("1/3").unwrap(), ratio(1, 3));
        assert_eq!(parse_rational("6/4").unwrap(), ratio(3, 2));
        assert_eq!(parse_rational("7").unwrap(), int(7));
        assert_eq!(parse_rational("-2/5").unwrap(), ratio(-2, 5));
    }

    #[test]
    fn rejects_bad_text() {
        for bad in ["0.5", "1/0", "1/-2", "", "abc", "1/", "/2", "1e3", "3/2/1"] {
            assert!(parse_rational(bad).is_err(), "{bad} should be rejected");
        }
    }

    #[test]
    fn formats_integers_without_denominator() {
        assert_eq!(format_rational(&int(5)), "5");
        assert_eq!(format_rational(&ratio(137, 60)), "137/60");
        assert_eq!(format_rational(&ratio(-1, 2)), "-1/2");
    }

    proptest! {
        #[test]
        fn format_parse_round_trip(n in -1_000_000i64..1_000_000, d in 1i64..1_000_000) {
            let x = ratio(n, d);
            prop_assert_eq!(parse_rational(&format_rational(&x)).unwrap(), x);
        }
    }
}
