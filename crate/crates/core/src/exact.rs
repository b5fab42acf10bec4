//! Exact rationals and certified rational intervals.
//!
//! Rationals serialize as `"numerator/denominator"` strings so nothing is lost
//! on the way to JSON or CSV.

use std::fmt;
use std::ops::Add;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::LabError;

pub type Rational = BigRational;

pub fn rat(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn rat_int(n: impl Into<BigInt>) -> Rational {
    Rational::from_integer(n.into())
}

/// `2^exp` for any integer exponent.
pub fn pow2(exp: i64) -> Rational {
    let magnitude = BigInt::one() << exp.unsigned_abs();
    if exp >= 0 {
        Rational::from_integer(magnitude)
    } else {
        Rational::new(BigInt::one(), magnitude)
    }
}

pub fn big_pow2(exp: u64) -> BigUint {
    BigUint::one() << exp
}

/// `floor(log2 q)` for `q > 0`.
pub fn floor_log2(q: &Rational) -> i64 {
    assert!(q.is_positive(), "floor_log2 needs a positive rational");
    let n = q.numer().magnitude();
    let d = q.denom().magnitude();
    let mut e = n.bits() as i64 - d.bits() as i64;
    // Now 2^(e-1) < q < 2^(e+1); settle the last step exactly.
    if pow2(e) > *q {
        e -= 1;
    }
    e
}

/// Canonical `n/d` text; integers keep their `/1`.
pub fn fmt_ratio(q: &Rational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

pub fn parse_ratio(s: &str) -> Result<Rational, LabError> {
    let bad = || LabError::Config(format!("malformed rational {s:?}"));
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s.trim(), "1"),
    };
    let n: BigInt = n.parse().map_err(|_| bad())?;
    let d: BigInt = d.parse().map_err(|_| bad())?;
    if d.is_zero() {
        return Err(bad());
    }
    Ok(Rational::new(n, d))
}

/// serde adapter: `#[serde(with = "crate::exact::ratio_str")]`.
pub mod ratio_str {
    use super::*;

    pub fn serialize<S: Serializer>(q: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_ratio(q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_ratio(&s).map_err(serde::de::Error::custom)
    }
}

/// A closed interval `[lo, hi]` of exact rationals.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    #[serde(with = "ratio_str")]
    pub lo: Rational,
    #[serde(with = "ratio_str")]
    pub hi: Rational,
}

impl Interval {
    pub fn new(lo: Rational, hi: Rational) -> Self {
        assert!(lo <= hi, "interval endpoints out of order");
        Self { lo, hi }
    }

    pub fn point(q: Rational) -> Self {
        Self {
            lo: q.clone(),
            hi: q,
        }
    }

    pub fn zero() -> Self {
        Self::point(Rational::zero())
    }

    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, q: &Rational) -> bool {
        &self.lo <= q && q <= &self.hi
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn scale(&self, factor: &Rational) -> Self {
        assert!(!factor.is_negative());
        Self::new(&self.lo * factor, &self.hi * factor)
    }

    /// Quotient of two non-negative intervals; `den.lo` must be positive.
    pub fn div_pos(&self, den: &Interval) -> Self {
        assert!(
            den.lo.is_positive(),
            "divisor interval must be bounded away from 0"
        );
        Self::new(&self.lo / &den.hi, &self.hi / &den.lo)
    }
}

impl Add for &Interval {
    type Output = Interval;

    fn add(self, rhs: &Interval) -> Interval {
        Interval::new(&self.lo + &rhs.lo, &self.hi + &rhs.hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", fmt_ratio(&self.lo), fmt_ratio(&self.hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floor_log2_matches_definition() {
        assert_eq!(floor_log2(&rat(5, 8)), -1);
        assert_eq!(floor_log2(&rat(1, 2)), -1);
        assert_eq!(floor_log2(&rat(1, 4)), -2);
        assert_eq!(floor_log2(&rat(3, 10)), -2);
        assert_eq!(floor_log2(&rat(1, 1)), 0);
        assert_eq!(floor_log2(&rat(7, 1)), 2);
        assert_eq!(floor_log2(&rat(8, 1)), 3);
        for num in 1..200i64 {
            for den in 1..50i64 {
                let q = rat(num, den);
                let e = floor_log2(&q);
                assert!(pow2(e) <= q && q < pow2(e + 1), "{num}/{den}");
            }
        }
    }

    #[test]
    fn ratio_text_round_trip() {
        assert_eq!(fmt_ratio(&rat(4, 6)), "2/3");
        assert_eq!(fmt_ratio(&rat(0, 5)), "0/1");
        assert_eq!(parse_ratio("6/136").unwrap(), rat(3, 68));
        assert_eq!(parse_ratio("3").unwrap(), rat(3, 1));
        assert!(parse_ratio("1/0").is_err());
        assert!(parse_ratio("x").is_err());
    }

    #[test]
    fn interval_ops() {
        let a = Interval::new(rat(1, 4), rat(1, 2));
        let b = Interval::point(rat(1, 8));
        let s = &a + &b;
        assert_eq!(s, Interval::new(rat(3, 8), rat(5, 8)));
        assert!(b.is_exact());
        assert!(Interval::point(rat(1, 2)).is_subset_of(&a));
        let q = a.div_pos(&Interval::new(rat(1, 2), rat(1, 1)));
        assert_eq!(q, Interval::new(rat(1, 4), rat(1, 1)));
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            r#"{"lo":"1/4","hi":"1/2"}"#
        );
    }
}
