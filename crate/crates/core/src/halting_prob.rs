//! `Prob_N(dom M)` for each program length, and the partial sums of `ζ_M` and `Ω_M`.
//!
//! A plain machine with a total submachine keeps `Prob_N` above a positive floor;
//! a machine with a prefix-free domain has `Ω < 1`, which forces `Prob_N → 0`.
//! Only finite prefixes are computed, so those limits appear here as a floor and
//! a trend over the computed range.

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::codec::{bin_u64, BitString};
use crate::error::{LabError, Result};
use crate::exact::{fmt_ratio, pow2, rat_int, ratio_str, Interval, Rational};
use crate::machine::{Budget, Machine, MachineSpec};
use crate::runtime::{status, Status};
use crate::sweep::check_enum_cap;

/// Most terms `zeta_partial` will sum.
pub const MAX_ZETA_TERMS: u64 = 1 << 20;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProbPoint {
    pub length: u32,
    pub halting: u64,
    /// Programs still running at the budget.
    pub unresolved: u64,
    /// `halting · 2^-N`.
    #[serde(with = "ratio_str")]
    pub lower_bound: Rational,
    /// `(halting + unresolved) · 2^-N`.
    #[serde(with = "ratio_str")]
    pub upper_bound: Rational,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbCurve {
    pub machine: MachineSpec,
    pub budget: Option<u64>,
    pub points: Vec<ProbPoint>,
}

/// Bounds on `Prob_N(dom M)` for `N = 1..=max_len`; exact on transparent machines.
pub fn prob_curve(machine: &Machine, max_len: u32, budget: Option<Budget>) -> Result<ProbCurve> {
    if max_len < 1 {
        return Err(LabError::Precondition(
            "max length must be at least 1".into(),
        ));
    }
    check_enum_cap(max_len)?;
    let run_budget = run_budget(machine, budget)?;
    let points = (1..=max_len)
        .map(|length| {
            let (halting, unresolved) = (0..1u64 << length)
                .into_par_iter()
                .map(
                    |v| match status(machine, &BitString::from_u64(v, length), run_budget) {
                        Status::Halts(_) => (1u64, 0u64),
                        Status::NeverHalts => (0, 0),
                        Status::Unknown => (0, 1),
                    },
                )
                .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
            let scale = pow2(-(length as i64));
            ProbPoint {
                length,
                halting,
                unresolved,
                lower_bound: rat_int(halting) * &scale,
                upper_bound: rat_int(halting + unresolved) * &scale,
            }
        })
        .collect();
    Ok(ProbCurve {
        machine: machine.spec().clone(),
        budget: (!machine.is_transparent()).then_some(run_budget.steps()),
        points,
    })
}

fn run_budget(machine: &Machine, budget: Option<Budget>) -> Result<Budget> {
    match (machine.is_transparent(), budget) {
        (true, _) => Budget::new(1),
        (false, Some(b)) => Ok(b),
        (false, None) => Err(LabError::Precondition(
            "opaque machines need a step budget".into(),
        )),
    }
}

impl ProbCurve {
    fn range(&self, from: u32, to: u32) -> impl Iterator<Item = &ProbPoint> {
        self.points
            .iter()
            .filter(move |p| (from..=to).contains(&p.length))
    }

    /// Least lower bound over lengths in `[from, to]`.
    pub fn floor(&self, from: u32, to: u32) -> Option<Rational> {
        self.range(from, to).map(|p| p.lower_bound.clone()).min()
    }

    /// Whether the lower bounds never increase over lengths in `[from, to]`.
    pub fn non_increasing(&self, from: u32, to: u32) -> bool {
        let pts: Vec<&ProbPoint> = self.range(from, to).collect();
        pts.windows(2).all(|w| w[1].lower_bound <= w[0].lower_bound)
    }

    /// Bounds on `Σ_N Prob_N(dom M)` over the computed lengths.
    pub fn omega(&self) -> Interval {
        let lo: Rational = self.points.iter().map(|p| p.lower_bound.clone()).sum();
        let hi: Rational = self.points.iter().map(|p| p.upper_bound.clone()).sum();
        Interval::new(lo, hi)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("length,halting,unresolved,lower_bound,upper_bound\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                p.length,
                p.halting,
                p.unresolved,
                fmt_ratio(&p.lower_bound),
                fmt_ratio(&p.upper_bound)
            ));
        }
        out
    }
}

/// Bounds on `Σ_{n ≤ terms, bin(n) ∈ dom M} 1/n`.
pub fn zeta_partial(machine: &Machine, terms: u64, budget: Option<Budget>) -> Result<Interval> {
    if terms < 1 {
        return Err(LabError::Precondition("terms must be at least 1".into()));
    }
    if terms > MAX_ZETA_TERMS {
        return Err(LabError::ResourceLimit(format!(
            "{terms} terms exceeds {MAX_ZETA_TERMS}"
        )));
    }
    let run_budget = run_budget(machine, budget)?;
    let zero = || (Rational::zero(), Rational::zero());
    let (found, unresolved) = (1..=terms)
        .into_par_iter()
        .map(|n| {
            let inv = Rational::new(1.into(), n.into());
            match status(machine, &bin_u64(n), run_budget) {
                Status::Halts(_) => (inv, Rational::zero()),
                Status::NeverHalts => zero(),
                Status::Unknown => (Rational::zero(), inv),
            }
        })
        .reduce(zero, |a, b| (a.0 + b.0, a.1 + b.1));
    let hi = &found + unresolved;
    Ok(Interval::new(found, hi))
}

/// Bounds on `Σ_{N ≤ max_len} Prob_N(dom M)`.
pub fn omega_partial(machine: &Machine, max_len: u32, budget: Option<Budget>) -> Result<Interval> {
    Ok(prob_curve(machine, max_len, budget)?.omega())
}

/// Whether the halting programs found are pairwise prefix-free.
pub fn is_prefix_free(programs: &[BitString]) -> bool {
    let mut sorted: Vec<&BitString> = programs.iter().collect();
    sorted.sort_by(|a, b| a.bits().cmp(b.bits()));
    sorted.windows(2).all(|w| !w[0].is_prefix_of(w[1]))
}

/// `Σ 2^-|p|` over the given programs.
pub fn kraft_sum(programs: &[BitString]) -> Rational {
    programs
        .iter()
        .map(|p| pow2(-(p.len() as i64)))
        .fold(Rational::zero(), |a, b| a + b)
}

/// Whether `x` lies strictly below 1.
pub fn below_one(x: &Rational) -> bool {
    x < &Rational::one()
}
