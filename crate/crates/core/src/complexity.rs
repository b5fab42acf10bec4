//! Natural complexity `∇(x) = min { n ≥ 1 : M(bin(n)) = x }` and what is built
//! on it: the algorithmic-randomness predicate for strings and times, and the
//! bound `∇(bin(t_p)) ≤ 2^(|p|+c+1)` on the stopping time of a halting program.
//!
//! On transparent machines every search is exact. On opaque machines a search
//! only sees the witnesses that halt within its budget, so a found value is an
//! upper bound on the true `∇`, and the absence of a witness proves something
//! only when every index below the cap halted within the budget.

use std::collections::HashMap;

use num_bigint::BigInt;
use rayon::prelude::*;
use serde::Serialize;

use crate::codec::{bin_inv_u64, bin_u64, floor_log2, BitString, Index};
use crate::error::{LabError, Result};
use crate::exact::Rational;
use crate::machine::{Budget, Machine, Verdict};

/// Largest index range a single witness search will scan.
pub const MAX_SEARCH_INDICES: u64 = 1 << 26;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NablaMode {
    Exact,
    /// Only witnesses halting within the budget were seen; the value is ≥ the true `∇`.
    BudgetLowerBound,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NablaResult {
    pub value: u64,
    pub mode: NablaMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget_used: Option<u64>,
}

enum Output {
    Halted(BitString),
    Never,
    Running,
}

/// Output of `bin(i)`: exact on transparent machines, budgeted otherwise.
fn output_of(machine: &Machine, i: u64, budget: Budget) -> Output {
    let p = bin_u64(i);
    match machine.decide(&p) {
        Some(Verdict::Halts { output, .. }) => Output::Halted(output),
        Some(Verdict::NeverHalts) => Output::Never,
        None => match machine.run(&p, budget).output() {
            Some(out) => Output::Halted(out.clone()),
            None => Output::Running,
        },
    }
}

impl Output {
    fn is(&self, x: &BitString) -> bool {
        matches!(self, Output::Halted(out) if out == x)
    }
}

fn mode_for(machine: &Machine, budget: Budget) -> (NablaMode, Option<u64>) {
    if machine.is_transparent() {
        (NablaMode::Exact, None)
    } else {
        (NablaMode::BudgetLowerBound, Some(budget.steps()))
    }
}

fn cap_to_u64(cap: &Index) -> Result<u64> {
    match cap.to_u64() {
        Some(c) if c <= MAX_SEARCH_INDICES => Ok(c),
        _ => Err(LabError::ResourceLimit(format!(
            "search cap {cap} exceeds the scan limit {MAX_SEARCH_INDICES}"
        ))),
    }
}

/// Least `n ≤ search_cap` with `machine(bin(n)) = x`; `Ok(None)` when no witness
/// exists below the cap (∇ may exceed any cap).
pub fn nabla(
    machine: &Machine,
    x: &BitString,
    search_cap: &Index,
    budget: Budget,
) -> Result<Option<NablaResult>> {
    let cap = cap_to_u64(search_cap)?;
    let found = (1..=cap)
        .into_par_iter()
        .find_first(|&i| output_of(machine, i, budget).is(x));
    let (mode, budget_used) = mode_for(machine, budget);
    Ok(found.map(|value| NablaResult {
        value,
        mode,
        budget_used,
    }))
}

/// The outputs of `bin(1), …, bin(limit)`, computed once and indexed by output.
/// Lets many `∇` queries below the same cap share one pass over the indices.
pub struct OutputScan {
    limit: u64,
    mode: NablaMode,
    budget_used: Option<u64>,
    first_index: HashMap<BitString, u64>,
    /// Least index still running at the budget.
    first_running: Option<u64>,
}

impl OutputScan {
    pub fn build(machine: &Machine, limit: u64, budget: Budget) -> Result<Self> {
        if limit > MAX_SEARCH_INDICES {
            return Err(LabError::ResourceLimit(format!(
                "output scan of {limit} indices exceeds {MAX_SEARCH_INDICES}"
            )));
        }
        let outputs: Vec<Output> = (1..=limit)
            .into_par_iter()
            .map(|i| output_of(machine, i, budget))
            .collect();
        let mut first_index = HashMap::new();
        let mut first_running = None;
        for (i, out) in (1..=limit).zip(outputs) {
            match out {
                Output::Halted(out) => {
                    first_index.entry(out).or_insert(i);
                }
                Output::Running => {
                    first_running.get_or_insert(i);
                }
                Output::Never => {}
            }
        }
        let (mode, budget_used) = mode_for(machine, budget);
        Ok(Self {
            limit,
            mode,
            budget_used,
            first_index,
            first_running,
        })
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn mode(&self) -> NablaMode {
        self.mode
    }

    /// `∇(x)` if some witness `≤ cap` exists; `cap` must not exceed the scan limit.
    pub fn nabla(&self, x: &BitString, cap: u64) -> Option<NablaResult> {
        assert!(
            cap <= self.limit,
            "query cap {cap} beyond scan limit {}",
            self.limit
        );
        self.first_index
            .get(x)
            .copied()
            .filter(|&n| n <= cap)
            .map(|value| NablaResult {
                value,
                mode: self.mode,
                budget_used: self.budget_used,
            })
    }

    /// Whether every index `≤ cap` has a known outcome.
    pub fn resolved_to(&self, cap: u64) -> bool {
        self.first_running.is_none_or(|i| i > cap)
    }

    /// Distinct outputs whose first witness is `≤ cap`.
    pub fn outputs_below(&self, cap: u64) -> impl Iterator<Item = (&BitString, u64)> {
        self.first_index
            .iter()
            .filter(move |(_, &n)| n <= cap)
            .map(|(x, &n)| (x, n))
    }
}

/// The randomness threshold `2^L / L` for strings of length `L ≥ 1`.
pub fn random_threshold(len: u32) -> Rational {
    assert!(len >= 1);
    Rational::new(BigInt::from(1) << len, BigInt::from(len))
}

/// Largest index below `2^L / L`: a witness `n ≤` this makes a length-`L` string nonrandom.
pub fn max_nonrandom_witness(len: u32) -> u64 {
    assert!((1..64).contains(&len));
    ((1u64 << len) - 1) / u64::from(len)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Randomness {
    Random,
    Nonrandom,
    /// No witness under the budget, on a machine where that proves nothing.
    Unknown,
}

/// Whether `bin(t)` satisfies `∇(bin(t)) ≥ 2^|bin(t)| / |bin(t)|`. Needs `t ≥ 2`.
pub fn is_random_time(machine: &Machine, t: &Index, budget: Budget) -> Result<Randomness> {
    let t = t
        .to_u64()
        .ok_or_else(|| LabError::ResourceLimit(format!("time {t} too large to test")))?;
    if t < 2 {
        return Err(LabError::Precondition(
            "randomness of times is defined for t ≥ 2".into(),
        ));
    }
    let len = floor_log2(t);
    let cap = Index::try_from(max_nonrandom_witness(len))?;
    let scan = OutputScan::build(machine, cap_to_u64(&cap)?, budget)?;
    Ok(classify_time(&scan, t))
}

/// Randomness of `t`, reading witnesses from a prepared scan.
pub fn classify_time(scan: &OutputScan, t: u64) -> Randomness {
    debug_assert!(t >= 2);
    let len = floor_log2(t);
    let cap = max_nonrandom_witness(len);
    if scan.nabla(&bin_u64(t), cap).is_some() {
        Randomness::Nonrandom
    } else if scan.resolved_to(cap) {
        Randomness::Random
    } else {
        Randomness::Unknown
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RuntimeBoundCheck {
    pub program: BitString,
    pub stop_time: u64,
    /// `2^(|p|+c+1)`.
    pub cap: u64,
    /// Least witness found for `bin(t_p)`, if any at or below the cap.
    pub nabla: Option<u64>,
    /// `bin⁻¹(time(p))`, the witness the wrapper guarantees.
    pub wrapper_index: u64,
    pub holds: bool,
}

fn wrapper_parts(machine: &Machine) -> Result<(u32, u64)> {
    match (machine.time_wrap_bits(), machine.time_wrap_step_overhead()) {
        (Some(c), Some(steps)) => Ok((c, steps)),
        _ => Err(LabError::Unsupported("machine has no time wrapper".into())),
    }
}

fn bound_cap(len: usize, c: u32) -> Result<u64> {
    let exp = len as u32 + c + 1;
    if exp >= 63 {
        return Err(LabError::ResourceLimit(format!("cap 2^{exp} too large")));
    }
    Ok(1u64 << exp)
}

/// Check `∇(bin(t_p)) ≤ 2^(|p|+c+1)` for one halting program.
///
/// The witness search runs with `budget` plus the wrapper's step overhead, so
/// the wrapped program `time(p)` is always inside the search.
pub fn check_runtime_bound(
    machine: &Machine,
    p: &BitString,
    budget: Budget,
) -> Result<RuntimeBoundCheck> {
    let (c, overhead) = wrapper_parts(machine)?;
    let t = machine.run(p, budget).stop_time().ok_or_else(|| {
        LabError::Precondition(format!("program {} does not halt within budget", p.label()))
    })?;
    let cap = bound_cap(p.len(), c)?;
    let search_budget = budget.saturating_add(overhead);
    let found = nabla(machine, &bin_u64(t), &Index::try_from(cap)?, search_budget)?;
    let wrapper_index = machine
        .time_wrap(p)
        .as_ref()
        .and_then(bin_inv_u64)
        .unwrap_or(u64::MAX);
    let nabla = found.map(|r| r.value);
    Ok(RuntimeBoundCheck {
        program: p.clone(),
        stop_time: t,
        cap,
        nabla,
        wrapper_index,
        holds: nabla.is_some(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RuntimeBoundSummary {
    pub max_len: u32,
    pub budget: u64,
    pub wrapper_bits: u32,
    pub halting_programs: u64,
    pub exceptions: Vec<RuntimeBoundCheck>,
}

/// [`check_runtime_bound`] for every program of length `≤ max_len` that halts
/// within `budget`, sharing one witness scan.
pub fn check_runtime_bound_exhaustive(
    machine: &Machine,
    max_len: u32,
    budget: Budget,
) -> Result<RuntimeBoundSummary> {
    crate::sweep::check_enum_cap(max_len)?;
    let (c, overhead) = wrapper_parts(machine)?;
    let limit = bound_cap(max_len as usize, c)?;
    let scan = OutputScan::build(machine, limit, budget.saturating_add(overhead))?;
    let mut halting = 0u64;
    let mut exceptions = Vec::new();
    for len in 0..=max_len {
        let cap = bound_cap(len as usize, c)?;
        let checks: Vec<Option<RuntimeBoundCheck>> = (0..1u64 << len)
            .into_par_iter()
            .map(|v| {
                let p = BitString::from_u64(v, len);
                let t = machine.run(&p, budget).stop_time()?;
                let nabla = scan.nabla(&bin_u64(t), cap).map(|r| r.value);
                let wrapper_index = machine
                    .time_wrap(&p)
                    .as_ref()
                    .and_then(bin_inv_u64)
                    .unwrap_or(u64::MAX);
                Some(RuntimeBoundCheck {
                    program: p,
                    stop_time: t,
                    cap,
                    nabla,
                    wrapper_index,
                    holds: nabla.is_some(),
                })
            })
            .collect();
        for check in checks.into_iter().flatten() {
            halting += 1;
            if !check.holds {
                exceptions.push(check);
            }
        }
    }
    Ok(RuntimeBoundSummary {
        max_len,
        budget: budget.steps(),
        wrapper_bits: c,
        halting_programs: halting,
        exceptions,
    })
}

/// Fraction of length-`n` strings `x` with `∇(x) ≥ 2^n / n`. Strings outside the
/// machine's range count as random. Transparent machines only.
pub fn random_string_density(n: u32, machine: &Machine) -> Result<Rational> {
    if n == 0 {
        return Err(LabError::Precondition("string length must be ≥ 1".into()));
    }
    if !machine.is_transparent() {
        return Err(LabError::Unsupported(
            "random-string density needs exact ∇ (transparent machine)".into(),
        ));
    }
    if n >= 40 {
        return Err(LabError::ResourceLimit(format!("length {n} too large")));
    }
    let cap = max_nonrandom_witness(n);
    // Budget is irrelevant on transparent machines.
    let scan = OutputScan::build(machine, cap, Budget::new(1)?)?;
    let nonrandom = scan
        .outputs_below(cap)
        .filter(|(x, _)| x.len() == n as usize)
        .count();
    let total = BigInt::from(1u64) << n;
    Ok(Rational::new(&total - BigInt::from(nonrandom), total))
}
