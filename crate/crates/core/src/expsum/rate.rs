use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rug::ops::Pow;
use rug::{Float, Integer, Rational};

use crate::error::{Error, Result};

/// A non-negative decay rate held as an exact reduced fraction of the
/// common rate unit.
///
/// Every rate in the cascade is an integer combination of the channel rates,
/// so exact rationals make degeneracy detection an equality test.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RateValue(Rational);

impl RateValue {
    pub fn zero() -> Self {
        RateValue(Rational::new())
    }

    pub fn new(numerator: i64, denominator: i64) -> Result<Self> {
        if denominator <= 0 {
            return Err(Error::validation(format!(
                "rate denominator must be positive, got {denominator}"
            )));
        }
        Self::from_rational(Rational::from((numerator, denominator)))
    }

    pub fn integer(value: u64) -> Self {
        RateValue(Rational::from(value))
    }

    pub fn from_rational(value: Rational) -> Result<Self> {
        if value < 0 {
            return Err(Error::validation(format!("rate must be non-negative, got {value}")));
        }
        Ok(RateValue(value))
    }

    /// Converts an `f64` through its shortest round-trip decimal form, so
    /// `0.2` becomes exactly `1/5`.
    pub fn from_f64(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::validation(format!("rate must be finite, got {value}")));
        }
        format!("{value:e}").parse()
    }

    pub fn as_rational(&self) -> &Rational {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.cmp0() == Ordering::Equal
    }

    pub fn is_positive(&self) -> bool {
        self.0.cmp0() == Ordering::Greater
    }

    pub fn numerator(&self) -> &Integer {
        self.0.numer()
    }

    pub fn denominator(&self) -> &Integer {
        self.0.denom()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }

    pub fn to_float(&self, precision_bits: u32) -> Float {
        Float::with_val(precision_bits, &self.0)
    }

    /// `k * self`, exact.
    pub fn scaled(&self, k: u64) -> RateValue {
        RateValue(Rational::from(&self.0 * Integer::from(k)))
    }

    pub fn checked_div(&self, other: &RateValue) -> Option<Rational> {
        if other.is_zero() {
            None
        } else {
            Some(Rational::from(&self.0 / &other.0))
        }
    }
}

impl std::ops::Add for &RateValue {
    type Output = RateValue;
    fn add(self, rhs: &RateValue) -> RateValue {
        RateValue(Rational::from(&self.0 + &rhs.0))
    }
}

impl std::iter::Sum for RateValue {
    fn sum<I: Iterator<Item = RateValue>>(iter: I) -> RateValue {
        iter.fold(RateValue::zero(), |acc, r| &acc + &r)
    }
}

impl fmt::Display for RateValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Accepts integers, fractions (`3/4`) and decimals with an optional
/// exponent (`0.25`, `2.5e-3`). Decimals are converted exactly.
impl FromStr for RateValue {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::validation(format!("cannot parse rate `{s}`"));
        if let Some((num, den)) = s.split_once('/') {
            let num: Rational = parse_decimal(num.trim()).ok_or_else(bad)?;
            let den: Rational = parse_decimal(den.trim()).ok_or_else(bad)?;
            if den.cmp0() != Ordering::Greater {
                return Err(Error::validation(format!("rate denominator must be positive in `{s}`")));
            }
            return Self::from_rational(num / den);
        }
        Self::from_rational(parse_decimal(s).ok_or_else(bad)?)
    }
}

fn parse_decimal(s: &str) -> Option<Rational> {
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let mut value = Rational::from(Integer::from_str_radix(&digits, 10).ok()?);
    let shift = exponent - frac_part.len() as i32;
    let ten = Integer::from(10);
    if shift >= 0 {
        value *= Integer::from(ten.pow(shift as u32));
    } else {
        value /= Integer::from(ten.pow((-shift) as u32));
    }
    if negative {
        value = -value;
    }
    Some(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimals_are_exact() {
        let r: RateValue = "0.2".parse().unwrap();
        assert_eq!(r, RateValue::new(1, 5).unwrap());
        let r: RateValue = "2.5e-3".parse().unwrap();
        assert_eq!(r, RateValue::new(1, 400).unwrap());
        assert_eq!(RateValue::from_f64(0.1).unwrap(), RateValue::new(1, 10).unwrap());
        assert_eq!("3/6".parse::<RateValue>().unwrap(), RateValue::new(1, 2).unwrap());
    }

    #[test]
    fn equality_is_on_reduced_fractions() {
        assert_eq!(RateValue::new(2, 4).unwrap(), RateValue::new(1, 2).unwrap());
        assert_ne!(RateValue::new(1, 3).unwrap(), "0.3333333333".parse().unwrap());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RateValue::new(1, 0).is_err());
        assert!(RateValue::new(-1, 2).is_err());
        assert!("abc".parse::<RateValue>().is_err());
        assert!("1/0".parse::<RateValue>().is_err());
        assert!(RateValue::from_f64(f64::NAN).is_err());
    }
}
