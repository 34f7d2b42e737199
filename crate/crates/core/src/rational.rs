//! Exact rational numbers and their `"p/q"` text form.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Arbitrary precision rational. Every length, mass and cost in the crate is one of these.
pub type Rational = BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn frac(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

/// Parses `"p/q"`, `"p"` or a negative variant of either.
pub fn parse(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not an exact fraction: {s:?}"));
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let num = BigInt::from_str(num).map_err(|_| bad())?;
    let den = BigInt::from_str(den).map_err(|_| bad())?;
    if den.is_zero() {
        return Err(bad());
    }
    Ok(Rational::new(num, den))
}

/// Renders in lowest terms: `"-2"`, `"1/2"`.
pub fn render(x: &Rational) -> String {
    x.to_string()
}

/// Decimal rendering rounded half away from zero to `digits` places.
pub fn render_decimal(x: &Rational, digits: usize) -> String {
    let scale = BigInt::from(10u32).pow(digits as u32);
    let scaled = x.abs() * Rational::from_integer(scale.clone());
    let rounded = (scaled + Rational::new(BigInt::one(), BigInt::from(2))).floor().to_integer();
    let (whole, rest) = rounded.div_rem(&scale);
    let sign = if x.is_negative() && !rounded.is_zero() { "-" } else { "" };
    if digits == 0 {
        return format!("{sign}{whole}");
    }
    let rest = rest.to_string();
    format!("{sign}{whole}.{}{rest}", "0".repeat(digits - rest.len()))
}

/// A rational that serializes as its exact fraction string.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Frac(pub Rational);

impl fmt::Display for Frac {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<Rational> for Frac {
    fn from(r: Rational) -> Self {
        Frac(r)
    }
}

impl From<&Rational> for Frac {
    fn from(r: &Rational) -> Self {
        Frac(r.clone())
    }
}

impl Serialize for Frac {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&render(&self.0))
    }
}

impl<'de> Deserialize<'de> for Frac {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        // Integers are accepted for convenience; everything else must be a string.
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Int(i64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) => parse(&s).map(Frac).map_err(serde::de::Error::custom),
            Raw::Int(n) => Ok(Frac(int(n))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_renders() {
        assert_eq!(parse("6/4").unwrap(), frac(3, 2));
        assert_eq!(parse("-2").unwrap(), int(-2));
        assert_eq!(parse(" 1 / 3 ").unwrap(), frac(1, 3));
        assert_eq!(render(&frac(-4, 2)), "-2");
        assert_eq!(render(&frac(1, 2)), "1/2");
        assert!(parse("1/0").is_err());
        assert!(parse("0.5").is_err());
        assert!(parse("").is_err());
    }

    #[test]
    fn decimal_rounding() {
        assert_eq!(render_decimal(&frac(1, 3), 4), "0.3333");
        assert_eq!(render_decimal(&frac(2, 3), 2), "0.67");
        assert_eq!(render_decimal(&frac(-1, 8), 2), "-0.13");
        assert_eq!(render_decimal(&int(-2), 0), "-2");
        assert_eq!(render_decimal(&frac(1, 1000), 2), "0.00");
        assert_eq!(render_decimal(&frac(1, 20), 3), "0.050");
    }
}
