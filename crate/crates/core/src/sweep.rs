//! Exhaustive sweeps over all programs of one length, and the probabilities
//! read off the resulting halting history.
//!
//! The probability space for a sweep of `N`-bit programs observed up to time
//! `T` is `Σ^N × {1..T}` with every pair weighted `2^-N · T^-1`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;

use crate::codec::{strings_of_length, BitString};
use crate::error::{LabError, Result};
use crate::exact::{ratio_str, Rational};
use crate::machine::{Budget, Machine, MachineSpec};

/// Largest program length swept without an explicit override.
pub const DEFAULT_ENUM_CAP: u32 = 24;

/// Environment variable overriding [`DEFAULT_ENUM_CAP`].
pub const ENUM_CAP_VAR: &str = "HALTLAB_ENUM_CAP";

/// Configured cap on program length; `2^cap` programs at most.
pub fn enum_cap() -> u32 {
    std::env::var(ENUM_CAP_VAR)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_ENUM_CAP)
        .min(62)
}

pub fn check_enum_cap(length: u32) -> Result<()> {
    let cap = enum_cap();
    if length > cap {
        return Err(LabError::EnumerationCap { length, cap });
    }
    Ok(())
}

/// Exact stop times of every `length`-bit program that halts by `horizon`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HaltingHistory {
    pub machine: MachineSpec,
    pub length: u32,
    pub horizon: u64,
    pub stops: BTreeMap<BitString, u64>,
}

pub fn sweep(machine: &Machine, length: u32, horizon: u64) -> Result<HaltingHistory> {
    check_enum_cap(length)?;
    let budget = Budget::new(horizon)?;
    let found: Vec<(BitString, u64)> = (0..1u64 << length)
        .into_par_iter()
        .filter_map(|v| {
            let p = BitString::from_u64(v, length);
            machine.run(&p, budget).stop_time().map(|t| (p, t))
        })
        .collect();
    Ok(HaltingHistory {
        machine: machine.spec().clone(),
        length,
        horizon,
        stops: found.into_iter().collect(),
    })
}

impl HaltingHistory {
    pub fn programs(&self) -> u64 {
        1u64 << self.length
    }

    pub fn halting_count(&self) -> u64 {
        self.stops.len() as u64
    }

    /// Number of programs stopping exactly at `t`.
    pub fn count_at(&self, t: u64) -> u64 {
        self.stops.values().filter(|&&s| s == t).count() as u64
    }

    /// Number of programs stopped by `t`.
    pub fn count_by(&self, t: u64) -> u64 {
        self.stops.values().filter(|&&s| s <= t).count() as u64
    }

    /// The same history seen through a shorter window.
    pub fn restrict(&self, horizon: u64) -> HaltingHistory {
        assert!(
            horizon <= self.horizon,
            "restrict can only shrink the window"
        );
        HaltingHistory {
            machine: self.machine.clone(),
            length: self.length,
            horizon,
            stops: self
                .stops
                .iter()
                .filter(|(_, &t)| t <= horizon)
                .map(|(p, &t)| (p.clone(), t))
                .collect(),
        }
    }

    fn fraction_of_programs(&self, count: u64) -> Rational {
        Rational::new(BigInt::from(count), BigInt::from(self.programs()))
    }

    /// `P(p halts exactly at t)` over programs only.
    pub fn prob_halt_at(&self, t: u64) -> Rational {
        self.fraction_of_programs(self.count_at(t))
    }

    /// `P(p halts by t)` over programs only.
    pub fn prob_halt_by(&self, t: u64) -> Rational {
        self.fraction_of_programs(self.count_by(t))
    }

    /// `P(p halts within the window)`.
    pub fn prob_eventual(&self) -> Rational {
        self.fraction_of_programs(self.halting_count())
    }

    /// CSV with one row per program in length-lexicographic order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("program,stop_time\n");
        for p in strings_of_length(self.length) {
            match self.stops.get(&p) {
                Some(t) => writeln!(out, "{p},{t}").unwrap(),
                None => writeln!(out, "{p},RUNNING").unwrap(),
            }
        }
        out
    }

    /// Row-per-program matrix in the layout of the case-study table.
    pub fn matrix(&self) -> HistoryMatrix {
        let rows = strings_of_length(self.length)
            .map(|p| {
                let stop = self.stops.get(&p).copied();
                let cells = (1..=self.horizon)
                    .map(|t| {
                        if stop.is_some_and(|s| s <= t) {
                            'h'
                        } else {
                            '.'
                        }
                    })
                    .collect();
                MatrixRow {
                    program: p,
                    stop_time: stop,
                    cells,
                }
            })
            .collect();
        HistoryMatrix {
            length: self.length,
            horizon: self.horizon,
            rows,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HistoryMatrix {
    pub length: u32,
    pub horizon: u64,
    pub rows: Vec<MatrixRow>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MatrixRow {
    pub program: BitString,
    pub stop_time: Option<u64>,
    /// `h` at every time the program has halted by, `.` elsewhere.
    pub cells: String,
}

fn space_measure(h: &HaltingHistory, pairs: u64) -> Rational {
    Rational::new(
        BigInt::from(pairs),
        BigInt::from(h.programs()) * BigInt::from(h.horizon),
    )
}

/// `Prob(A)`: pairs `(p, t)` where `p` stops exactly at `t`.
pub fn prob_exact(h: &HaltingHistory) -> Rational {
    space_measure(h, h.halting_count())
}

/// `Prob(B)`: pairs `(p, t)` where `p` has stopped by `t`.
pub fn prob_by(h: &HaltingHistory) -> Rational {
    let pairs: u64 = h.stops.values().map(|&t| h.horizon - t + 1).sum();
    space_measure(h, pairs)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConditionalProbs {
    pub t0: u64,
    pub t1: u64,
    /// `P(halts within the window | not halted by t0)`.
    #[serde(with = "ratio_str")]
    pub eventual_given_not_by_t0: Rational,
    /// `P(halts by t1 | not halted by t0)`.
    #[serde(with = "ratio_str")]
    pub by_t1_given_not_by_t0: Rational,
    /// `P(not halted by t0 and halts within the window)`.
    #[serde(with = "ratio_str")]
    pub not_by_t0_and_eventual: Rational,
}

pub fn conditional_probs(h: &HaltingHistory, t0: u64, t1: u64) -> Result<ConditionalProbs> {
    if !(1 <= t0 && t0 <= t1 && t1 <= h.horizon) {
        return Err(LabError::Precondition(format!(
            "need 1 ≤ t0 ≤ t1 ≤ horizon, got t0={t0}, t1={t1}, horizon={}",
            h.horizon
        )));
    }
    let not_by_t0 = h.programs() - h.count_by(t0);
    if not_by_t0 == 0 {
        return Err(LabError::UndefinedConditional(format!(
            "every program halted by t0={t0}"
        )));
    }
    let late = h.stops.values().filter(|&&t| t > t0).count() as u64;
    let late_by_t1 = h.stops.values().filter(|&&t| t > t0 && t <= t1).count() as u64;
    let cond = |n: u64| Rational::new(BigInt::from(n), BigInt::from(not_by_t0));
    Ok(ConditionalProbs {
        t0,
        t1,
        eventual_given_not_by_t0: cond(late),
        by_t1_given_not_by_t0: cond(late_by_t1),
        not_by_t0_and_eventual: h.fraction_of_programs(late),
    })
}

/// Fact-1 style sanity bounds; returns a description of the first violation.
pub fn check_space_bounds(h: &HaltingHistory) -> Result<()> {
    let exact = prob_exact(h);
    let by = prob_by(h);
    let one_over_t = Rational::new(BigInt::from(1), BigInt::from(h.horizon));
    if exact > one_over_t || by > Rational::from_integer(1.into()) || exact < Rational::zero() {
        return Err(LabError::InvariantViolation(format!(
            "probability bound violated for N={}, T={}: exact={exact}, by={by}",
            h.length, h.horizon
        )));
    }
    Ok(())
}

/// Round-robin execution with geometric budget doubling.
///
/// Each phase runs every still-open program, in length-lexicographic order,
/// with twice the previous budget. Since runs are deterministic and monotone in
/// the budget, the discoveries are identical to running each program once with
/// the final budget.
pub struct Dovetailer<'m> {
    machine: &'m Machine,
    open: Vec<BitString>,
    budget: u64,
    stops: BTreeMap<BitString, u64>,
}

impl<'m> Dovetailer<'m> {
    pub fn new(machine: &'m Machine, mut programs: Vec<BitString>) -> Self {
        programs.sort();
        programs.dedup();
        Self {
            machine,
            open: programs,
            budget: 0,
            stops: BTreeMap::new(),
        }
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    /// Run the next phase; returns the programs that halted in it, in order.
    pub fn step(&mut self) -> Vec<(BitString, u64)> {
        self.phase((self.budget * 2).max(1))
    }

    fn phase(&mut self, steps: u64) -> Vec<(BitString, u64)> {
        self.budget = steps;
        let budget = Budget::new(self.budget).expect("positive budget");
        let results: Vec<Option<u64>> = self
            .open
            .par_iter()
            .map(|p| self.machine.run(p, budget).stop_time())
            .collect();
        let mut halted = Vec::new();
        let mut still_open = Vec::new();
        for (p, r) in self.open.drain(..).zip(results) {
            match r {
                Some(t) => halted.push((p, t)),
                None => still_open.push(p),
            }
        }
        self.open = still_open;
        self.stops.extend(halted.iter().cloned());
        halted
    }

    /// Keep doubling until the budget reaches `max_budget`; the last phase is clipped to it.
    pub fn run_until(mut self, max_budget: u64) -> BTreeMap<BitString, u64> {
        while self.budget < max_budget && !self.open.is_empty() {
            self.phase((self.budget * 2).clamp(1, max_budget));
        }
        self.stops
    }
}

/// Sweep by dovetailing instead of one run per program; same result as [`sweep`].
pub fn dovetail_sweep(machine: &Machine, length: u32, horizon: u64) -> Result<HaltingHistory> {
    check_enum_cap(length)?;
    Budget::new(horizon)?;
    let stops = Dovetailer::new(machine, strings_of_length(length).collect()).run_until(horizon);
    Ok(HaltingHistory {
        machine: machine.spec().clone(),
        length,
        horizon,
        stops,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;

    fn table1() -> Machine {
        Machine::from_spec(&MachineSpec::table1()).unwrap()
    }

    fn s(bits: &str) -> BitString {
        bits.parse().unwrap()
    }

    #[test]
    fn table1_history() {
        let h = sweep(&table1(), 3, 17).unwrap();
        let expected: BTreeMap<_, _> = [
            ("000", 1),
            ("110", 1),
            ("011", 8),
            ("100", 14),
            ("010", 15),
            ("111", 16),
        ]
        .into_iter()
        .map(|(p, t)| (s(p), t))
        .collect();
        assert_eq!(h.stops, expected);
        let early = sweep(&table1(), 3, 1).unwrap();
        assert_eq!(
            early.stops.keys().cloned().collect::<Vec<_>>(),
            vec![s("000"), s("110")]
        );
    }

    #[test]
    fn table1_probabilities() {
        let h = sweep(&table1(), 3, 17).unwrap();
        assert_eq!(prob_exact(&h), rat(6, 136));
        // 17 + 17 + 10 + 4 + 3 + 2 stop-by pairs.
        assert_eq!(prob_by(&h), rat(53, 136));
        assert_eq!(h.prob_halt_at(1), rat(1, 4));
        assert_eq!(h.prob_halt_by(8), rat(3, 8));
        assert_eq!(h.prob_eventual(), rat(6, 8));
        let c = conditional_probs(&h, 5, 8).unwrap();
        assert_eq!(c.eventual_given_not_by_t0, rat(2, 3));
        assert_eq!(c.by_t1_given_not_by_t0, rat(1, 6));
        assert_eq!(c.not_by_t0_and_eventual, rat(1, 2));
        check_space_bounds(&h).unwrap();
    }

    #[test]
    fn empty_and_full_histories() {
        let never = Machine::from_spec(&MachineSpec::table(&[])).unwrap();
        let h = sweep(&never, 4, 9).unwrap();
        assert_eq!(prob_exact(&h), Rational::zero());
        assert_eq!(prob_by(&h), Rational::zero());
        let all = Machine::from_spec(&MachineSpec::Total {
            stop_time: 1,
            output: Default::default(),
        })
        .unwrap();
        let h = sweep(&all, 4, 9).unwrap();
        assert_eq!(prob_by(&h), rat(1, 1));
        assert_eq!(prob_exact(&h), rat(1, 9));
    }

    #[test]
    fn length_zero_is_one_program() {
        let vm = Machine::from_spec(&MachineSpec::toy_vm()).unwrap();
        let h = sweep(&vm, 0, 5).unwrap();
        assert_eq!(h.programs(), 1);
        assert_eq!(h.stops.get(&BitString::empty()), Some(&1));
        assert_eq!(h.to_csv(), "program,stop_time\n,1\n");
    }

    #[test]
    fn conditional_errors() {
        let h = sweep(&table1(), 3, 17).unwrap();
        assert!(matches!(
            conditional_probs(&h, 0, 3),
            Err(LabError::Precondition(_))
        ));
        assert!(matches!(
            conditional_probs(&h, 6, 5),
            Err(LabError::Precondition(_))
        ));
        let all = Machine::from_spec(&MachineSpec::Total {
            stop_time: 1,
            output: Default::default(),
        })
        .unwrap();
        let h = sweep(&all, 2, 4).unwrap();
        assert!(matches!(
            conditional_probs(&h, 1, 2),
            Err(LabError::UndefinedConditional(_))
        ));
    }

    #[test]
    fn enumeration_cap() {
        let vm = Machine::from_spec(&MachineSpec::toy_vm()).unwrap();
        assert!(matches!(
            sweep(&vm, DEFAULT_ENUM_CAP + 1, 5),
            Err(LabError::EnumerationCap { .. })
        ));
    }

    #[test]
    fn csv_and_matrix_shapes() {
        let h = sweep(&table1(), 3, 17).unwrap();
        let csv = h.to_csv();
        assert!(csv.starts_with("program,stop_time\n000,1\n001,RUNNING\n010,15\n"));
        let m = h.matrix();
        assert_eq!(m.rows.len(), 8);
        assert_eq!(m.rows[3].cells, ".......hhhhhhhhhh");
        assert_eq!(m.rows[1].cells, ".................");
    }

    #[test]
    fn consistency_and_coherence_on_vm() {
        let vm = Machine::from_spec(&MachineSpec::toy_vm()).unwrap();
        for n in 0..=10 {
            let full = sweep(&vm, n, 300).unwrap();
            check_space_bounds(&full).unwrap();
            for t in [1, 2, 7, 50, 300] {
                let exact_sum: u64 = (1..=t).map(|s| full.count_at(s)).sum();
                assert_eq!(exact_sum, full.count_by(t));
                assert_eq!(full.restrict(t), sweep(&vm, n, t).unwrap());
            }
        }
    }

    #[test]
    fn dovetailing_matches_direct_sweep() {
        let vm = Machine::from_spec(&MachineSpec::toy_vm()).unwrap();
        for (n, t) in [(8, 1000), (10, 777), (6, 1)] {
            assert_eq!(
                dovetail_sweep(&vm, n, t).unwrap(),
                sweep(&vm, n, t).unwrap()
            );
        }
    }

    #[test]
    fn worker_count_does_not_change_history() {
        let vm = Machine::from_spec(&MachineSpec::prefix_free_vm()).unwrap();
        let run = |workers| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .unwrap()
                .install(|| sweep(&vm, 11, 2000).unwrap())
        };
        let one = run(1);
        assert_eq!(one, run(3));
        assert_eq!(one, run(8));
    }
}
