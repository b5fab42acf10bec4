//! Long stopping times: programs that have run for `2^(2N+2c+1)` steps can only
//! stop at nonrandom times, and nonrandom times are rare in every window
//! `[2^m, T]`, so late stopping times have effective zero density.

use num_bigint::BigUint;
use num_traits::One;
use rayon::prelude::*;
use serde::Serialize;

use crate::codec::{bin_inv_u64, bin_u64, floor_log2, BitString, Index};
use crate::complexity::{classify_time, max_nonrandom_witness, OutputScan, Randomness};
use crate::error::{LabError, Result};
use crate::exact::{big_pow2, pow2, rat, rat_int, ratio_str, Rational};
use crate::machine::{Budget, Machine};
use crate::runtime::{status, Status};
use crate::sweep::check_enum_cap;

/// Label on every fraction computed on an opaque machine.
pub const OVER_ESTIMATE_LABEL: &str = "over-estimate (budget-relative)";
/// Label on fractions computed by exact decision.
pub const EXACT_LABEL: &str = "exact";

/// `(1/(2^s − 1)) Σ_{i=0}^{s} 2^i/(m+i)`.
pub fn window_sum(m: u32, s: u32) -> Result<Rational> {
    if m < 3 || s < 1 {
        return Err(LabError::Precondition(format!(
            "need m ≥ 3 and s ≥ 1, got m = {m}, s = {s}"
        )));
    }
    let sum: Rational = (0..=s).map(|i| pow2(i as i64) / rat_int(m + i)).sum();
    Ok(sum / rat_int((BigUint::one() << s) - 1u32))
}

/// `5/(m+s−1)`.
pub fn window_bound(m: u32, s: u32) -> Rational {
    rat(5, (m + s - 1) as i64)
}

/// The right-hand side of `x_{s+1} = ((2^s−1)/(2^{s+1}−1)) x_s + 2^{s+1}/((2^{s+1}−1)(m+s+1))`.
pub fn window_recurrence(m: u32, s: u32) -> Result<Rational> {
    let x = window_sum(m, s)?;
    let a = pow2(s as i64) - Rational::one();
    let b = pow2(s as i64 + 1) - Rational::one();
    Ok(&a / &b * x + pow2(s as i64 + 1) / (b * rat_int(m + s + 1)))
}

/// `2^|bin(t)| > 2^n · |bin(t)|`, for `n ≥ 4` and `t ≥ 2^(2n−1)`.
pub fn ubound_check(n: u32, t: &Index) -> Result<bool> {
    if n < 4 {
        return Err(LabError::Precondition(format!("need n ≥ 4, got {n}")));
    }
    if t.value() < &big_pow2(2 * n as u64 - 1) {
        return Err(LabError::Precondition(format!(
            "need t ≥ 2^{}, got {t}",
            2 * n - 1
        )));
    }
    let len = t.value().bits() - 1;
    Ok(big_pow2(len) > big_pow2(n as u64) * len)
}

/// `m = 2N + 2c + 1`.
pub fn window_exponent(length: u32, c: u32) -> u32 {
    2 * length + 2 * c + 1
}

/// `θ_N = 2^m + 1`.
pub fn theta(length: u32, c: u32) -> BigUint {
    big_pow2(window_exponent(length, c) as u64) + 1u32
}

/// `max{θ_N, 2^(2 + 5·2^k)}`: past this horizon the stop-candidate density is below `2^-k`.
pub fn k_form_threshold(length: u32, c: u32, k: u32) -> BigUint {
    let k_part = big_pow2(2 + 5 * (1u64 << k));
    theta(length, c).max(k_part)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExclusionCandidate {
    pub program: BitString,
    pub stop_time: u64,
    pub verdict: Randomness,
    /// Index of a witness `≤ 2^L/L`, when one was found.
    pub witness: Option<u64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExclusionReport {
    pub length: u32,
    pub c: u32,
    /// Stop times `≥ 2^threshold_exponent` are checked.
    pub threshold_exponent: u32,
    pub budget: Option<u64>,
    pub halting: u64,
    pub candidates: Vec<ExclusionCandidate>,
    /// Candidates stopping at a time certified random.
    pub violations: Vec<ExclusionCandidate>,
}

/// Checks that no `length`-bit program stops at a random time `≥ 2^(2N+2c+1)`.
/// A random stop time on a machine without a working time wrapper is a fixture
/// error, not a violation.
pub fn late_stop_exclusion(
    machine: &Machine,
    length: u32,
    budget: Option<Budget>,
) -> Result<ExclusionReport> {
    if length < 2 {
        return Err(LabError::Precondition(format!(
            "program length must be ≥ 2, got {length}"
        )));
    }
    check_enum_cap(length)?;
    let budget = effective_budget(machine, budget)?;
    let c = machine.wrapper_constant();
    let m = window_exponent(length, c);
    let floor = 1u64
        .checked_shl(m)
        .ok_or_else(|| LabError::ResourceLimit(format!("2^{m} overflows")))?;
    let stops: Vec<(BitString, u64)> = (0..1u64 << length)
        .into_par_iter()
        .filter_map(|v| {
            let p = BitString::from_u64(v, length);
            match status(machine, &p, budget) {
                Status::Halts(t) => Some((p, t)),
                _ => None,
            }
        })
        .collect();
    let halting = stops.len() as u64;
    let mut candidates = Vec::new();
    let mut violations = Vec::new();
    for (p, t) in stops.into_iter().filter(|(_, t)| *t >= floor) {
        let cap = max_nonrandom_witness(floor_log2(t));
        let wrapper_ok = wrapper_witness(machine, &p, t, budget);
        let (verdict, witness) = match wrapper_ok {
            Some(i) if i <= cap => (Randomness::Nonrandom, Some(i)),
            _ => {
                let scan = OutputScan::build(machine, cap, witness_budget(machine, budget))?;
                let witness = scan.nabla(&bin_u64(t), cap).map(|r| r.value);
                (classify_time(&scan, t), witness)
            }
        };
        let candidate = ExclusionCandidate {
            program: p.clone(),
            stop_time: t,
            verdict,
            witness,
        };
        if verdict == Randomness::Random {
            if wrapper_ok.is_none() {
                return Err(LabError::Config(format!(
                    "fixture is inconsistent with a time wrapper: {} stops at random time {t}",
                    p.label()
                )));
            }
            violations.push(candidate.clone());
        }
        candidates.push(candidate);
    }
    Ok(ExclusionReport {
        length,
        c,
        threshold_exponent: m,
        budget: (!machine.is_transparent()).then_some(budget.steps()),
        halting,
        candidates,
        violations,
    })
}

/// Index of `time(p)` when it halts with output `bin(t)`.
fn wrapper_witness(machine: &Machine, p: &BitString, t: u64, budget: Budget) -> Option<u64> {
    let q = machine.time_wrap(p)?;
    let out = machine.run(&q, witness_budget(machine, budget));
    (out.output() == Some(&bin_u64(t)))
        .then(|| bin_inv_u64(&q))
        .flatten()
}

fn witness_budget(machine: &Machine, budget: Budget) -> Budget {
    budget.saturating_add(machine.time_wrap_step_overhead().unwrap_or(0))
}

fn effective_budget(machine: &Machine, budget: Option<Budget>) -> Result<Budget> {
    match (machine.is_transparent(), budget) {
        (true, _) => Budget::new(1),
        (false, Some(b)) => Ok(b),
        (false, None) => Err(LabError::Precondition(
            "opaque machines need a step budget".into(),
        )),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct KFormCheck {
    pub k: u32,
    /// Whether the horizon exceeds `max{θ_N, 2^(2+5·2^k)}`.
    pub applicable: bool,
    /// Stop-candidate fraction below `2^-k` (only meaningful when applicable).
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DensityReport {
    pub length: u32,
    pub c: u32,
    pub m: u32,
    pub theta: String,
    pub horizon: u64,
    pub s: u32,
    pub window_size: u64,
    pub random_times: u64,
    pub nonrandom_times: u64,
    pub unknown_times: u64,
    #[serde(with = "ratio_str")]
    pub random_time_fraction: Rational,
    #[serde(with = "ratio_str")]
    pub stop_candidate_fraction: Rational,
    #[serde(with = "ratio_str")]
    pub lemma_bound: Rational,
    /// `random_time_fraction > 1 − lemma_bound`.
    pub envelope_holds: bool,
    pub k_form: Vec<KFormCheck>,
    /// Distinct stop times of `length`-bit programs inside the window.
    pub observed_stop_times: u64,
    /// Of those, how many are certified random (must be 0).
    pub observed_random_stop_times: u64,
    pub label: &'static str,
    pub budget: Option<u64>,
}

/// Fractions of random and stop-candidate times over `[2^m, T]` for `length`-bit
/// programs. Exact on transparent machines; on opaque machines times without a
/// certificate count as stop candidates.
pub fn density_report(
    machine: &Machine,
    length: u32,
    horizon: u64,
    budget: Option<Budget>,
) -> Result<DensityReport> {
    check_enum_cap(length)?;
    let budget = effective_budget(machine, budget)?;
    let c = machine.wrapper_constant();
    let m = window_exponent(length, c);
    let th = theta(length, c);
    if BigUint::from(horizon) <= th {
        return Err(LabError::Precondition(format!(
            "horizon {horizon} must exceed θ = {th}"
        )));
    }
    let log = floor_log2(
        horizon
            .checked_add(1)
            .ok_or_else(|| LabError::ResourceLimit("horizon overflows".into()))?,
    );
    let s = log.saturating_sub(m);
    if s < 1 {
        return Err(LabError::Precondition(format!(
            "window too small: s = ⌊log₂(T+1)⌋ − m = {log} − {m} < 1"
        )));
    }
    let start = 1u64 << m;
    let window_size = horizon - start + 1;
    let scan = OutputScan::build(
        machine,
        max_nonrandom_witness(floor_log2(horizon)),
        witness_budget(machine, budget),
    )?;
    let (random, nonrandom, unknown) = (start..=horizon)
        .into_par_iter()
        .map(|t| match classify_time(&scan, t) {
            Randomness::Random => (1u64, 0u64, 0u64),
            Randomness::Nonrandom => (0, 1, 0),
            Randomness::Unknown => (0, 0, 1),
        })
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    let total = rat_int(window_size);
    let random_time_fraction = rat_int(random) / &total;
    let stop_candidate_fraction = rat_int(nonrandom + unknown) / &total;
    let lemma_bound = window_bound(m, s);
    let envelope_holds = random_time_fraction > Rational::one() - &lemma_bound;
    let k_form = [1u32, 2]
        .iter()
        .map(|&k| {
            let applicable = BigUint::from(horizon) > k_form_threshold(length, c, k);
            KFormCheck {
                k,
                applicable,
                holds: stop_candidate_fraction < pow2(-(k as i64)),
            }
        })
        .collect();

    let stop_budget = if machine.is_transparent() {
        budget
    } else {
        Budget::new(budget.steps().min(horizon))?
    };
    let mut stop_times: Vec<u64> = (0..1u64 << length)
        .into_par_iter()
        .filter_map(
            |v| match status(machine, &BitString::from_u64(v, length), stop_budget) {
                Status::Halts(t) if (start..=horizon).contains(&t) => Some(t),
                _ => None,
            },
        )
        .collect();
    stop_times.sort_unstable();
    stop_times.dedup();
    let observed_random_stop_times = stop_times
        .iter()
        .filter(|&&t| classify_time(&scan, t) == Randomness::Random)
        .count() as u64;

    Ok(DensityReport {
        length,
        c,
        m,
        theta: th.to_string(),
        horizon,
        s,
        window_size,
        random_times: random,
        nonrandom_times: nonrandom,
        unknown_times: unknown,
        random_time_fraction,
        stop_candidate_fraction,
        lemma_bound,
        envelope_holds,
        k_form,
        observed_stop_times: stop_times.len() as u64,
        observed_random_stop_times,
        label: label_for(machine),
        budget: (!machine.is_transparent()).then_some(budget.steps()),
    })
}

fn label_for(machine: &Machine) -> &'static str {
    if machine.is_transparent() {
        EXACT_LABEL
    } else {
        OVER_ESTIMATE_LABEL
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExponentialStopDensity {
    pub max_len: u32,
    pub horizon: u64,
    pub c: u32,
    /// Distinct exponential stopping times `≤ T`.
    pub exponential_stop_times: Vec<u64>,
    #[serde(with = "ratio_str")]
    pub fraction: Rational,
    /// Fraction of `t ≤ T` with `t > 2^(2c+1)` not certified random.
    #[serde(with = "ratio_str")]
    pub nonrandom_fraction: Rational,
    /// `fraction ≤ nonrandom_fraction`.
    pub bound_holds: bool,
    pub label: &'static str,
    pub budget: Option<u64>,
}

/// Density in `{1, …, T}` of times `t_p > 2^(2|p|+2c+1)` for programs with
/// `|p| ≤ max_len`, next to the density of nonrandom times beyond `2^(2c+1)`.
pub fn exponential_stop_density(
    machine: &Machine,
    max_len: u32,
    horizon: u64,
    budget: Option<Budget>,
) -> Result<ExponentialStopDensity> {
    check_enum_cap(max_len)?;
    let budget = effective_budget(machine, budget)?;
    let c = machine.wrapper_constant();
    let base = 1u64 << (2 * c + 1);
    if horizon < base {
        return Err(LabError::Precondition(format!(
            "horizon {horizon} must be ≥ 2^{}",
            2 * c + 1
        )));
    }
    let run_budget = if machine.is_transparent() {
        budget
    } else {
        Budget::new(budget.steps().min(horizon))?
    };
    let mut times = Vec::new();
    for len in 0..=max_len {
        let floor = 2 * len as u64 + 2 * c as u64 + 1;
        let found: Vec<u64> = (0..1u64 << len)
            .into_par_iter()
            .filter_map(
                |v| match status(machine, &BitString::from_u64(v, len), run_budget) {
                    Status::Halts(t) if t <= horizon && (floor >= 64 || t > 1u64 << floor) => {
                        Some(t)
                    }
                    _ => None,
                },
            )
            .collect();
        times.extend(found);
    }
    times.sort_unstable();
    times.dedup();
    let scan = OutputScan::build(
        machine,
        max_nonrandom_witness(floor_log2(horizon)),
        witness_budget(machine, budget),
    )?;
    let nonrandom = (base + 1..=horizon)
        .into_par_iter()
        .filter(|&t| classify_time(&scan, t) != Randomness::Random)
        .count() as u64;
    let total = rat_int(horizon);
    let fraction = rat_int(times.len() as u64) / &total;
    let nonrandom_fraction = rat_int(nonrandom) / &total;
    Ok(ExponentialStopDensity {
        max_len,
        horizon,
        c,
        bound_holds: fraction <= nonrandom_fraction,
        exponential_stop_times: times,
        fraction,
        nonrandom_fraction,
        label: label_for(machine),
        budget: (!machine.is_transparent()).then_some(budget.steps()),
    })
}

/// The modulus `B(k)` of the effective-zero-density statement for `length`-bit programs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EffectiveZeroDensityCertificate {
    pub length: u32,
    pub c: u32,
    pub property: &'static str,
}

impl EffectiveZeroDensityCertificate {
    pub fn new(length: u32, c: u32) -> Self {
        Self {
            length,
            c,
            property: "times in [2^m, T] at which a program of this length can stop",
        }
    }

    /// `B(k)`: for every `T > B(k)` the density is below `2^-k`.
    pub fn modulus(&self, k: u32) -> BigUint {
        k_form_threshold(self.length, self.c, k)
    }

    /// Checks a report against the certificate; vacuously true below the modulus.
    pub fn check(&self, report: &DensityReport, k: u32) -> bool {
        BigUint::from(report.horizon) <= self.modulus(k)
            || report.stop_candidate_fraction < pow2(-(k as i64))
    }
}

/// Exact density of certified random times in a window, for tests and reports.
pub fn random_fraction_in(
    machine: &Machine,
    from: u64,
    to: u64,
    budget: Budget,
) -> Result<Rational> {
    if from < 2 || to < from {
        return Err(LabError::Precondition(format!("bad window [{from}, {to}]")));
    }
    let scan = OutputScan::build(machine, max_nonrandom_witness(floor_log2(to)), budget)?;
    let random = (from..=to)
        .into_par_iter()
        .filter(|&t| classify_time(&scan, t) == Randomness::Random)
        .count();
    Ok(rat_int(random as u64) / rat_int(to - from + 1))
}
