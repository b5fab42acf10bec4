//! The runtime distribution `ρ(i) = r_i / (t_bin(i) · Υ)` and what it buys:
//! certified intervals for `Υ`, effective thresholds, and the split of the
//! halting set into a computable part and a small residual.

use std::collections::BTreeMap;

use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{bin_u64, BitString};
use crate::error::{LabError, Result};
use crate::exact::{
    floor_log2, fmt_ratio, parse_ratio, pow2, rat_int, ratio_str, Interval, Rational,
};
use crate::machine::{Budget, Machine, Verdict};
use crate::sweep::check_enum_cap;

/// Precision above which `upsilon` on an opaque machine needs an explicit override.
pub const OPAQUE_PRECISION_CAP: u32 = 20;

/// Where a program stands after the cheapest available check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Halts(u64),
    NeverHalts,
    /// Still running when the budget ran out (opaque machines only).
    Unknown,
}

/// Exact verdict on transparent machines, budgeted run otherwise.
pub fn status(machine: &Machine, p: &BitString, budget: Budget) -> Status {
    match machine.decide(p) {
        Some(Verdict::Halts { stop_time, .. }) => Status::Halts(stop_time),
        Some(Verdict::NeverHalts) => Status::NeverHalts,
        None => match machine.run(p, budget).stop_time() {
            Some(t) => Status::Halts(t),
            None => Status::Unknown,
        },
    }
}

/// The weights `r_i` of the series.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Weights {
    /// `r_i = 2^{-i}`.
    UpsilonInduced,
    /// Listed weights `r_1..r_n`, continued by `r_{n+j} = r_n · q^j`.
    UserTable {
        weights: Vec<Rational>,
        ratio: Rational,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum WeightsFile {
    UpsilonInduced,
    UserTable {
        weights: Vec<(String, String)>,
        tail_modulus: TailModulusFile,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
enum TailModulusFile {
    Geometric {
        #[serde(with = "ratio_str")]
        ratio: Rational,
    },
}

impl Weights {
    pub fn user_table(weights: Vec<Rational>, ratio: Rational) -> Result<Self> {
        if weights.is_empty() {
            return Err(LabError::Config(
                "user-table needs at least one weight".into(),
            ));
        }
        if weights.iter().any(|w| w.is_negative()) {
            return Err(LabError::Config("weights must be non-negative".into()));
        }
        if ratio.is_negative() || ratio >= Rational::one() {
            return Err(LabError::Config(format!(
                "geometric ratio {} must lie in [0, 1)",
                fmt_ratio(&ratio)
            )));
        }
        // The declared decay is checked on the listed prefix before the
        // continuation is trusted.
        for (i, pair) in weights.windows(2).enumerate() {
            if pair[1] > &pair[0] * &ratio {
                return Err(LabError::Config(format!(
                    "weight {} = {} exceeds ratio {} times weight {}",
                    i + 2,
                    fmt_ratio(&pair[1]),
                    fmt_ratio(&ratio),
                    i + 1
                )));
            }
        }
        Ok(Weights::UserTable { weights, ratio })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        match serde_json::from_str::<WeightsFile>(text)? {
            WeightsFile::UpsilonInduced => Ok(Weights::UpsilonInduced),
            WeightsFile::UserTable {
                weights,
                tail_modulus: TailModulusFile::Geometric { ratio },
            } => {
                let weights = weights
                    .iter()
                    .map(|(n, d)| parse_ratio(&format!("{n}/{d}")))
                    .collect::<Result<Vec<_>>>()?;
                Weights::user_table(weights, ratio)
            }
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let file = match self {
            Weights::UpsilonInduced => WeightsFile::UpsilonInduced,
            Weights::UserTable { weights, ratio } => WeightsFile::UserTable {
                weights: weights
                    .iter()
                    .map(|w| (w.numer().to_string(), w.denom().to_string()))
                    .collect(),
                tail_modulus: TailModulusFile::Geometric {
                    ratio: ratio.clone(),
                },
            },
        };
        serde_json::to_value(file).expect("weights serialize")
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Weights::UpsilonInduced => "upsilon-induced",
            Weights::UserTable { .. } => "user-table",
        }
    }

    /// `r_i`, for `i ≥ 1`.
    pub fn weight(&self, i: u64) -> Rational {
        assert!(i >= 1);
        match self {
            Weights::UpsilonInduced => pow2(-(i as i64)),
            Weights::UserTable { weights, ratio } => {
                let n = weights.len() as u64;
                if i <= n {
                    weights[(i - 1) as usize].clone()
                } else {
                    &weights[(n - 1) as usize] * num_traits::pow(ratio.clone(), (i - n) as usize)
                }
            }
        }
    }

    /// `Σ_{i > n} r_i`.
    pub fn tail_after(&self, n: u64) -> Rational {
        match self {
            Weights::UpsilonInduced => pow2(-(n as i64)),
            Weights::UserTable { weights, ratio } => {
                let len = weights.len() as u64;
                let last = &weights[(len - 1) as usize];
                let geometric_from = |m: u64| -> Rational {
                    // Σ_{i > m} r_len q^{i-len} for m ≥ len.
                    last * num_traits::pow(ratio.clone(), (m - len + 1) as usize)
                        / (Rational::one() - ratio)
                };
                if n >= len {
                    geometric_from(n)
                } else {
                    let listed: Rational = weights[n as usize..].iter().cloned().sum();
                    listed + geometric_from(len)
                }
            }
        }
    }

    pub fn total(&self) -> Rational {
        self.tail_after(0)
    }

    /// Least `n ≥ 1` with `Σ_{i>n} r_i ≤ 2^{-bits}`.
    pub fn truncation(&self, bits: u32) -> u64 {
        let target = pow2(-(bits as i64));
        least_satisfying(1, |n| self.tail_after(n) <= target)
    }
}

/// Least `n ≥ start` satisfying a monotone predicate, by doubling then bisection.
fn least_satisfying(start: u64, pred: impl Fn(u64) -> bool) -> u64 {
    if pred(start) {
        return start;
    }
    let mut lo = start;
    let mut hi = start.max(1) * 2;
    while !pred(hi) {
        lo = hi;
        hi = hi.checked_mul(2).expect("predicate never satisfied");
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// One series term `r_i / t_bin(i)` as an interval.
fn term(machine: &Machine, weights: &Weights, i: u64, budget: Budget) -> Interval {
    let r = weights.weight(i);
    match status(machine, &bin_u64(i), budget) {
        Status::Halts(t) => Interval::point(r / rat_int(t)),
        Status::NeverHalts => Interval::zero(),
        Status::Unknown => Interval::new(Rational::zero(), r / rat_int(budget.steps() + 1)),
    }
}

/// A runtime distribution fixed to a machine, a weight sequence and a precision.
#[derive(Clone, Debug)]
pub struct RuntimeDistribution {
    machine: Machine,
    weights: Weights,
    precision: u32,
    budget: Budget,
    /// Terms for `i = 1..=terms.len()`.
    terms: Vec<Interval>,
    /// Mass not covered by `terms`: `[0, Σ_{i>n} r_i]`, or zero when the domain is exhausted.
    remainder: Rational,
    upsilon: Interval,
}

/// Certified interval for `Υ = Σ r_i / t_bin(i)` of width `< 2^{-precision}`.
pub fn upsilon(machine: &Machine, weights: &Weights, precision: u32) -> Result<Interval> {
    Ok(
        RuntimeDistribution::new(machine, weights.clone(), precision)?
            .upsilon()
            .clone(),
    )
}

impl RuntimeDistribution {
    /// Computes `Υ` to `precision` bits. Fails with `Degenerate` when no halting
    /// program is found.
    pub fn new(machine: &Machine, weights: Weights, precision: u32) -> Result<Self> {
        let dist = Self::compute(machine, weights, precision)?;
        if !dist.upsilon.lo.is_positive() {
            return Err(LabError::Degenerate(format!(
                "no halting program among the first {} indices; Υ ∈ {}",
                dist.terms.len(),
                dist.upsilon
            )));
        }
        Ok(dist)
    }

    fn compute(machine: &Machine, weights: Weights, precision: u32) -> Result<Self> {
        if precision < 1 {
            return Err(LabError::Precondition(
                "precision must be at least 1".into(),
            ));
        }
        // Half the width goes to truncation, half to unresolved terms.
        let half = precision + 2;
        let mut n = weights.truncation(half);
        let mut remainder = weights.tail_after(n);
        if machine.is_transparent() {
            if let Some(bound) = machine.domain_index_bound() {
                n = bound;
                remainder = Rational::zero();
            }
        }
        let steps = (weights.total() * pow2(half as i64)).ceil().to_integer();
        let steps = steps
            .to_u64()
            .ok_or_else(|| LabError::ResourceLimit("budget exceeds 64 bits".into()))?;
        let budget = Budget::new(steps.max(1))?;
        let terms: Vec<Interval> = (1..=n)
            .into_par_iter()
            .map(|i| term(machine, &weights, i, budget))
            .collect();
        let mut upsilon = Interval::new(Rational::zero(), remainder.clone());
        for t in &terms {
            upsilon = &upsilon + t;
        }
        Ok(Self {
            machine: machine.clone(),
            weights,
            precision,
            budget,
            terms,
            remainder,
            upsilon,
        })
    }

    pub fn machine(&self) -> &Machine {
        &self.machine
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    /// Step budget used for each series term.
    pub fn budget(&self) -> Budget {
        self.budget
    }

    /// Number of explicitly evaluated terms.
    pub fn truncation(&self) -> u64 {
        self.terms.len() as u64
    }

    pub fn upsilon(&self) -> &Interval {
        &self.upsilon
    }

    fn term(&self, i: u64) -> Interval {
        if i <= self.truncation() {
            self.terms[(i - 1) as usize].clone()
        } else if self.remainder.is_zero() {
            Interval::zero()
        } else {
            term(&self.machine, &self.weights, i, self.budget)
        }
    }

    /// Interval for `ρ(i)`.
    pub fn rho(&self, i: u64) -> Result<Interval> {
        if i == 0 {
            return Err(LabError::Precondition("ρ is indexed from 1".into()));
        }
        Ok(clamp_unit(self.term(i).div_pos(&self.upsilon)))
    }

    /// Interval for `Σ_i ρ(i)`; contains 1.
    pub fn total_mass(&self) -> Interval {
        self.conditional_halt_tail(1)
    }

    /// Interval for `Σ_{i ≥ t} ρ(i)`.
    pub fn conditional_halt_tail(&self, t: u64) -> Interval {
        let t = t.max(1);
        let n = self.truncation();
        let mut sum = Interval::zero();
        let last = if self.remainder.is_zero() {
            n
        } else {
            n.max(t - 1 + self.precision as u64 + 2)
        };
        let explicit: Vec<Interval> = (t..=last).into_par_iter().map(|i| self.term(i)).collect();
        for x in &explicit {
            sum = &sum + x;
        }
        let rest = if self.remainder.is_zero() {
            Rational::zero()
        } else {
            self.weights.tail_after(last.max(t - 1))
        };
        sum = &sum + &Interval::new(Rational::zero(), rest);
        clamp_unit(sum.div_pos(&self.upsilon))
    }

    /// Least `b` with certified `Σ_{i ≥ b} ρ(i) < 2^{-k}`, from the bound `t ≥ 1`.
    pub fn tail_modulus(&self, k: u32) -> u64 {
        let target = pow2(-(k as i64)) * &self.upsilon.lo;
        least_satisfying(1, |b| self.weights.tail_after(b - 1) < target)
    }

    /// Least `T > k - ⌊log₂ Υ_lo⌋`. For user-table weights, where that formula
    /// has no guarantee, the tail modulus is returned instead.
    pub fn threshold_time(&self, k: u32) -> u64 {
        match self.weights {
            Weights::UpsilonInduced => {
                let t = k as i64 - floor_log2(&self.upsilon.lo) + 1;
                t.max(1) as u64
            }
            Weights::UserTable { .. } => self.tail_modulus(k),
        }
    }

    /// Checks that `b` is monotone and that the tail bound holds for each `k ≤ k_max`,
    /// evaluating the tail exactly over the evaluated prefix.
    pub fn verify_tail_modulus(&self, k_max: u32) -> Result<()> {
        let mut prev = 0;
        for k in 1..=k_max {
            let b = self.tail_modulus(k);
            if b < prev {
                return Err(LabError::InvariantViolation(format!(
                    "b({k}) = {b} < b({}) = {prev}",
                    k - 1
                )));
            }
            prev = b;
            let tail = self.conditional_halt_tail(b);
            if tail.hi >= pow2(-(k as i64)) {
                return Err(LabError::InvariantViolation(format!(
                    "tail from b({k}) = {b} is {tail}, not below 2^-{k}"
                )));
            }
        }
        Ok(())
    }
}

fn clamp_unit(x: Interval) -> Interval {
    let one = Rational::one();
    let hi = if x.hi > one { one.clone() } else { x.hi };
    let lo = if x.lo > one { one } else { x.lo };
    Interval::new(lo, hi)
}

/// Per-length counts of a decomposition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Stratum {
    pub length: u32,
    /// `2^{b(k+N+2)}`; pairs with smaller stop time are in the computable part.
    pub cutoff_exponent: u64,
    pub halting: u64,
    pub computable: u64,
    pub residual: u64,
    /// Programs neither seen halting nor known to diverge.
    pub unresolved: u64,
}

/// A halting pair in the residual part.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ResidualPair {
    pub program: BitString,
    pub stop_time: u64,
    pub rho: Interval,
}

/// The split of the halting pairs found up to `max_len` into the computable part
/// `t_p < 2^{b(k+|p|+2)}` and the residual.
#[derive(Clone, Debug, Serialize)]
pub struct HaltDecomposition {
    pub k: u32,
    pub max_len: u32,
    pub budget: Option<u64>,
    pub strata: Vec<Stratum>,
    pub residual_pairs: Vec<ResidualPair>,
    /// `Σ 2^{-|p|} ρ(t_p)` over residual pairs.
    pub residual_measure: Interval,
    #[serde(with = "ratio_str")]
    pub bound: Rational,
    pub holds: bool,
}

impl HaltDecomposition {
    /// Whether `(p, t)` belongs to the computable part.
    pub fn is_computable(&self, length: u32, stop_time: u64) -> bool {
        below_cutoff(
            stop_time,
            self.strata[(length - 1) as usize].cutoff_exponent,
        )
    }
}

fn below_cutoff(t: u64, exponent: u64) -> bool {
    exponent >= 64 || t < 1u64 << exponent
}

/// Decomposes the halting programs of `machine` of lengths `1..=max_len` with the
/// modulus of `dist`. `budget` is required for opaque machines and ignored otherwise.
pub fn decompose_halting(
    machine: &Machine,
    dist: &RuntimeDistribution,
    k: u32,
    max_len: u32,
    budget: Option<Budget>,
) -> Result<HaltDecomposition> {
    if k < 1 {
        return Err(LabError::Precondition("k must be at least 1".into()));
    }
    if max_len < 1 {
        return Err(LabError::Precondition(
            "max length must be at least 1".into(),
        ));
    }
    check_enum_cap(max_len)?;
    let run_budget = match (machine.is_transparent(), budget) {
        (true, _) => Budget::new(1)?,
        (false, Some(b)) => b,
        (false, None) => {
            return Err(LabError::Precondition(
                "opaque machines need a step budget".into(),
            ))
        }
    };
    let mut strata = Vec::new();
    let mut residual_pairs = Vec::new();
    let mut residual_measure = Interval::zero();
    for length in 1..=max_len {
        let cutoff_exponent = dist.tail_modulus(k + length + 2);
        let found: Vec<(BitString, Status)> = (0..1u64 << length)
            .into_par_iter()
            .map(|v| {
                let p = BitString::from_u64(v, length);
                let s = status(machine, &p, run_budget);
                (p, s)
            })
            .collect();
        let mut stratum = Stratum {
            length,
            cutoff_exponent,
            halting: 0,
            computable: 0,
            residual: 0,
            unresolved: 0,
        };
        let mut residual_here: BTreeMap<BitString, u64> = BTreeMap::new();
        for (p, s) in found {
            match s {
                Status::Halts(t) => {
                    stratum.halting += 1;
                    if below_cutoff(t, cutoff_exponent) {
                        stratum.computable += 1;
                    } else {
                        stratum.residual += 1;
                        residual_here.insert(p, t);
                    }
                }
                Status::NeverHalts => {}
                Status::Unknown => stratum.unresolved += 1,
            }
        }
        let weight = pow2(-(length as i64));
        for (program, stop_time) in residual_here {
            let rho = dist.rho(stop_time)?;
            residual_measure = &residual_measure + &rho.scale(&weight);
            residual_pairs.push(ResidualPair {
                program,
                stop_time,
                rho,
            });
        }
        strata.push(stratum);
    }
    let bound = pow2(-(k as i64) - 1);
    let holds = residual_measure.hi < bound;
    Ok(HaltDecomposition {
        k,
        max_len,
        budget: if machine.is_transparent() {
            None
        } else {
            Some(run_budget.steps())
        },
        strata,
        residual_pairs,
        residual_measure,
        bound,
        holds,
    })
}
