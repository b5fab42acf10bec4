//! The bijection `bin` between positive integers and bit strings, and the
//! length-lexicographic order every enumeration in the crate follows.
//!
//! `bin(n)` is the binary expansion of `n` with its leading 1 removed, so
//! `bin(1)` is the empty string, `bin(2) = "0"`, `bin(3) = "1"`, `bin(4) = "00"`.
//! Ordering integers numerically is the same as ordering their images
//! length-lexicographically.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::LabError;

/// A finite binary string. The empty string is a valid value.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    /// The `len` low bits of `value`, most significant first.
    pub fn from_u64(value: u64, len: u32) -> Self {
        Self((0..len).rev().map(|i| (value >> i) & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut bits = Vec::with_capacity(self.len() + other.len());
        bits.extend_from_slice(&self.0);
        bits.extend_from_slice(&other.0);
        Self(bits)
    }

    pub fn prepend(&self, prefix: &[bool]) -> BitString {
        let mut bits = prefix.to_vec();
        bits.extend_from_slice(&self.0);
        Self(bits)
    }

    pub fn is_prefix_of(&self, other: &BitString) -> bool {
        other.0.starts_with(&self.0)
    }

    /// Human label: the bits, or `λ` for the empty string.
    pub fn label(&self) -> String {
        if self.is_empty() {
            "λ".to_string()
        } else {
            self.to_string()
        }
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({})", self.label())
    }
}

impl FromStr for BitString {
    type Err = LabError;

    /// Accepts `0`/`1` characters; the empty string and `λ` both denote λ.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "λ" {
            return Ok(Self::empty());
        }
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(LabError::Config(format!("invalid bit {other:?} in {s:?}"))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Self)
    }
}

/// Length first, then lexicographic with `0 < 1`. This is the order of `bin`.
impl Ord for BitString {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for BitString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A positive integer of arbitrary size.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Index(BigUint);

impl Index {
    pub fn new(n: BigUint) -> Option<Self> {
        (!n.is_zero()).then_some(Self(n))
    }

    pub fn one() -> Self {
        Self(BigUint::one())
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn to_u64(&self) -> Option<u64> {
        self.0.to_u64()
    }
}

impl TryFrom<u64> for Index {
    type Error = LabError;

    fn try_from(n: u64) -> Result<Self, Self::Error> {
        Index::new(BigUint::from(n))
            .ok_or_else(|| LabError::Precondition("index must be ≥ 1".into()))
    }
}

impl fmt::Display for Index {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Binary expansion of `n` without its leading 1.
pub fn bin(n: &Index) -> BitString {
    let bits = n.0.bits();
    BitString((0..bits - 1).rev().map(|i| n.0.bit(i)).collect())
}

/// Inverse of [`bin`]: prepend a 1 and read the result in binary.
pub fn bin_inv(x: &BitString) -> Index {
    let mut n = BigUint::one();
    for &b in x.bits() {
        n <<= 1u32;
        if b {
            n += 1u32;
        }
    }
    Index(n)
}

/// `bin` for machine-sized indices. `n` must be positive.
pub fn bin_u64(n: u64) -> BitString {
    debug_assert!(n >= 1, "bin is defined on positive integers");
    let len = 63 - n.leading_zeros();
    BitString::from_u64(n, len)
}

/// `bin_inv` when the result fits in a `u64` (strings of length ≤ 63).
pub fn bin_inv_u64(x: &BitString) -> Option<u64> {
    if x.len() > 63 {
        return None;
    }
    Some(x.bits().iter().fold(1u64, |n, &b| (n << 1) | u64::from(b)))
}

/// `floor(log2 n)` for `n ≥ 1`, which is also `|bin(n)|`.
pub fn floor_log2(n: u64) -> u32 {
    63 - n.leading_zeros()
}

/// `bin(1), bin(2), …, bin(limit)` in order.
pub fn llex_enumerate(limit: u64) -> impl Iterator<Item = BitString> {
    (1..=limit).map(bin_u64)
}

/// All strings of exactly `len` bits in lexicographic order.
pub fn strings_of_length(len: u32) -> impl Iterator<Item = BitString> {
    assert!(len < 64, "strings_of_length supports lengths below 64");
    (0..1u64 << len).map(move |v| BitString::from_u64(v, len))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(bits: &str) -> BitString {
        bits.parse().unwrap()
    }

    #[test]
    fn bin_table_values() {
        assert_eq!(bin(&Index::one()), BitString::empty());
        assert_eq!(bin_u64(2), s("0"));
        assert_eq!(bin_u64(3), s("1"));
        assert_eq!(bin_u64(4), s("00"));
        assert_eq!(bin_u64(7), s("11"));
        assert_eq!(bin(&Index::try_from(7).unwrap()), s("11"));
    }

    #[test]
    fn bin_inv_values() {
        assert_eq!(bin_inv(&BitString::empty()).to_u64(), Some(1));
        assert_eq!(bin_inv(&s("00")).to_u64(), Some(4));
        assert_eq!(bin_inv(&s("11")).to_u64(), Some(7));
        assert_eq!(bin_inv_u64(&s("11")), Some(7));
    }

    #[test]
    fn llex_prefixes() {
        let first: Vec<_> = llex_enumerate(4).collect();
        assert_eq!(first, vec![BitString::empty(), s("0"), s("1"), s("00")]);
        assert_eq!(
            llex_enumerate(1).collect::<Vec<_>>(),
            vec![BitString::empty()]
        );
        assert_eq!(llex_enumerate(8).last(), Some(s("000")));
    }

    #[test]
    fn index_rejects_zero() {
        assert!(Index::try_from(0).is_err());
        assert!(Index::new(BigUint::zero()).is_none());
    }

    #[test]
    fn big_indices_round_trip() {
        let n = Index::new(BigUint::one() << 200u32).unwrap();
        let x = bin(&n);
        assert_eq!(x.len(), 200);
        assert_eq!(bin_inv(&x), n);
    }

    #[test]
    fn lambda_parses_and_labels() {
        assert_eq!(s("λ"), BitString::empty());
        assert_eq!(BitString::empty().label(), "λ");
        assert!(s("").is_empty());
        assert!("012".parse::<BitString>().is_err());
    }

    #[test]
    fn round_trip_exhaustive() {
        for n in 1..=(1u64 << 20) {
            let x = bin_u64(n);
            assert_eq!(x.len() as u32, floor_log2(n));
            assert_eq!(bin_inv_u64(&x), Some(n));
        }
        for len in 0..=16 {
            for x in strings_of_length(len) {
                let n = bin_inv_u64(&x).unwrap();
                assert_eq!(bin_u64(n), x);
                assert!(1u64 << len <= n && n < 1u64 << (len + 1));
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn order_matches_numeric_order(a in 1u64..1 << 40, b in 1u64..1 << 40) {
                prop_assert_eq!(a.cmp(&b), bin_u64(a).cmp(&bin_u64(b)));
            }

            #[test]
            fn big_and_small_paths_agree(n in 1u64..u64::MAX) {
                let idx = Index::try_from(n).unwrap();
                prop_assert_eq!(bin(&idx), bin_u64(n));
                prop_assert_eq!(bin_inv(&bin_u64(n)), idx);
            }
        }
    }
}
