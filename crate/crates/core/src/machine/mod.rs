//! Executable machine semantics.
//!
//! Every execution is budgeted. A run either halts at an exact step count with
//! an output, or is still running when the budget is spent; "never halts" is
//! never reported as an observation. Machines whose halting problem is decided
//! by construction (tables, total machines, dispatchers built from them) are
//! *transparent* and also answer [`Machine::decide`].

pub mod vm;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::codec::{bin_inv_u64, bin_u64, BitString};
use crate::error::{LabError, Result};
use vm::{Discipline, Exec};

/// Extra steps a dispatcher spends reading the unary slot selector.
pub const DISPATCH_OVERHEAD: u64 = 1;

/// Steps the dispatcher clock adds after the run it measures (counter read and print).
pub const CLOCK_STEP_OVERHEAD: u64 = 2;

/// The time-wrapper constant `c` used when a machine has no wrapper of its own.
pub const DEFAULT_WRAPPER_BITS: u32 = vm::TIME_PREFIX_BITS;

/// Step budget for one run; at least one step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Budget(u64);

impl Budget {
    pub fn new(max_steps: u64) -> Result<Self> {
        if max_steps == 0 {
            return Err(LabError::Precondition(
                "budget must be at least one step".into(),
            ));
        }
        Ok(Self(max_steps))
    }

    pub fn steps(self) -> u64 {
        self.0
    }

    pub fn saturating_add(self, extra: u64) -> Self {
        Self(self.0.saturating_add(extra))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum RunOutcome {
    Halted { stop_time: u64, output: BitString },
    Running,
}

impl RunOutcome {
    pub fn stop_time(&self) -> Option<u64> {
        match self {
            RunOutcome::Halted { stop_time, .. } => Some(*stop_time),
            RunOutcome::Running => None,
        }
    }

    pub fn output(&self) -> Option<&BitString> {
        match self {
            RunOutcome::Halted { output, .. } => Some(output),
            RunOutcome::Running => None,
        }
    }

    pub fn is_halted(&self) -> bool {
        matches!(self, RunOutcome::Halted { .. })
    }
}

/// Exact halting status, available on transparent machines only.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Halts { stop_time: u64, output: BitString },
    NeverHalts,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecidabilityClass {
    Transparent,
    Opaque,
}

/// What a total machine prints.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputRule {
    #[default]
    Empty,
    Identity,
    /// The program repeated `n` times; short programs name long, regular strings.
    Repeat(u32),
}

impl OutputRule {
    fn apply(self, p: &BitString) -> BitString {
        match self {
            OutputRule::Empty => BitString::empty(),
            OutputRule::Identity => p.clone(),
            OutputRule::Repeat(n) => BitString::from_bits(p.bits().repeat(n as usize)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableEntry {
    pub program: BitString,
    pub stop_time: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<BitString>,
}

/// Serializable machine definition, as read from a machine file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MachineSpec {
    Table {
        entries: Vec<TableEntry>,
    },
    ToyVm {
        isa_version: u32,
    },
    PrefixFreeVm {
        isa_version: u32,
    },
    Dispatcher {
        submachines: Vec<MachineSpec>,
    },
    /// Halts on every program at a fixed time.
    Total {
        stop_time: u64,
        #[serde(default)]
        output: OutputRule,
    },
    /// Dispatcher slot that runs the enclosing dispatcher and prints `bin` of
    /// its stop time. Only valid inside a dispatcher.
    Clock,
}

impl MachineSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| LabError::Config(e.to_string()))
    }

    /// Table 1 of the case study: eight 3-bit programs, six of which halt.
    pub fn table1() -> Self {
        Self::table(&[
            ("000", 1),
            ("010", 15),
            ("011", 8),
            ("100", 14),
            ("110", 1),
            ("111", 16),
        ])
    }

    /// `bin(1) = λ` halts at 1, `bin(2) = 0` halts at 2, nothing else halts.
    pub fn fixture_f() -> Self {
        Self::table(&[("", 1), ("0", 2)])
    }

    pub fn toy_vm() -> Self {
        Self::ToyVm { isa_version: 1 }
    }

    pub fn prefix_free_vm() -> Self {
        Self::PrefixFreeVm { isa_version: 1 }
    }

    /// A transparent dispatcher: identity at slot 0, the clock at slot 1.
    pub fn universal_identity() -> Self {
        Self::Dispatcher {
            submachines: vec![
                Self::Total {
                    stop_time: 1,
                    output: OutputRule::Identity,
                },
                Self::Clock,
            ],
        }
    }

    /// A transparent dispatcher with some compressible outputs: `x⁴` at slot 0,
    /// the clock at slot 1, identity at slot 2.
    pub fn universal_repeat() -> Self {
        Self::Dispatcher {
            submachines: vec![
                Self::Total {
                    stop_time: 1,
                    output: OutputRule::Repeat(4),
                },
                Self::Clock,
                Self::Total {
                    stop_time: 1,
                    output: OutputRule::Identity,
                },
            ],
        }
    }

    pub fn table(entries: &[(&str, u64)]) -> Self {
        Self::Table {
            entries: entries
                .iter()
                .map(|(p, t)| TableEntry {
                    program: p.parse().expect("fixture programs are bit strings"),
                    stop_time: *t,
                    output: None,
                })
                .collect(),
        }
    }

    /// Builtin machines by name, or a JSON definition file.
    pub fn resolve(source: &str) -> Result<Self> {
        if let Some(name) = source.strip_prefix("builtin:") {
            return match name {
                "toy-vm" => Ok(Self::toy_vm()),
                "prefix-free" | "prefix-free-vm" => Ok(Self::prefix_free_vm()),
                "table1" => Ok(Self::table1()),
                "fixture-f" => Ok(Self::fixture_f()),
                "universal-identity" => Ok(Self::universal_identity()),
                "universal-repeat" => Ok(Self::universal_repeat()),
                "table1-dispatch" => Ok(dispatch_spec(vec![Self::table1(), Self::Clock])?),
                other => Err(LabError::Config(format!(
                    "unknown builtin machine {other:?}"
                ))),
            };
        }
        let text = std::fs::read_to_string(source)
            .map_err(|e| LabError::Config(format!("cannot read machine file {source}: {e}")))?;
        Self::from_json(&text)
    }
}

/// Dispatcher spec over `submachines`: program `0^i 1 x` runs slot `i` on `x`.
pub fn dispatch_spec(submachines: Vec<MachineSpec>) -> Result<MachineSpec> {
    if submachines.is_empty() {
        return Err(LabError::Config(
            "dispatcher needs at least one submachine".into(),
        ));
    }
    Ok(MachineSpec::Dispatcher { submachines })
}

#[derive(Clone, Debug)]
enum Slot {
    Sub(Machine),
    Clock,
}

#[derive(Clone, Debug)]
enum Kind {
    Table {
        stops: HashMap<BitString, (u64, BitString)>,
        max_index: Option<u64>,
    },
    Vm(Discipline),
    Dispatcher(Vec<Slot>),
    Total {
        stop_time: u64,
        output: OutputRule,
    },
}

/// A validated, immutable machine. Cheap to share across worker threads.
#[derive(Clone, Debug)]
pub struct Machine {
    spec: MachineSpec,
    kind: Kind,
}

impl Machine {
    pub fn from_spec(spec: &MachineSpec) -> Result<Self> {
        if matches!(spec, MachineSpec::Clock) {
            return Err(LabError::Config(
                "a clock is only meaningful inside a dispatcher".into(),
            ));
        }
        Self::build(spec)
    }

    fn build(spec: &MachineSpec) -> Result<Self> {
        let kind = match spec {
            MachineSpec::Table { entries } => {
                let mut stops = HashMap::new();
                for e in entries {
                    if e.stop_time == 0 {
                        return Err(LabError::Config(format!(
                            "program {} has stop time 0",
                            e.program.label()
                        )));
                    }
                    let output = e.output.clone().unwrap_or_default();
                    if stops
                        .insert(e.program.clone(), (e.stop_time, output))
                        .is_some()
                    {
                        return Err(LabError::Config(format!(
                            "program {} listed twice",
                            e.program.label()
                        )));
                    }
                }
                let max_index = stops
                    .keys()
                    .map(bin_inv_u64)
                    .try_fold(1u64, |m, i| i.map(|i| m.max(i)));
                Kind::Table { stops, max_index }
            }
            MachineSpec::ToyVm { isa_version } | MachineSpec::PrefixFreeVm { isa_version } => {
                if *isa_version != 1 {
                    return Err(LabError::Config(format!(
                        "unsupported isa_version {isa_version}"
                    )));
                }
                Kind::Vm(if matches!(spec, MachineSpec::ToyVm { .. }) {
                    Discipline::Plain
                } else {
                    Discipline::PrefixFree
                })
            }
            MachineSpec::Dispatcher { submachines } => {
                if submachines.is_empty() {
                    return Err(LabError::Config(
                        "dispatcher needs at least one submachine".into(),
                    ));
                }
                let slots = submachines
                    .iter()
                    .map(|s| match s {
                        MachineSpec::Clock => Ok(Slot::Clock),
                        other => Self::build(other).map(Slot::Sub),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Kind::Dispatcher(slots)
            }
            MachineSpec::Total { stop_time, output } => {
                if *stop_time == 0 {
                    return Err(LabError::Config("total machine needs stop_time ≥ 1".into()));
                }
                Kind::Total {
                    stop_time: *stop_time,
                    output: *output,
                }
            }
            MachineSpec::Clock => unreachable!("clock handled by the dispatcher"),
        };
        Ok(Self {
            spec: spec.clone(),
            kind,
        })
    }

    pub fn spec(&self) -> &MachineSpec {
        &self.spec
    }

    /// Run `p` for at most `budget` steps.
    pub fn run(&self, p: &BitString, budget: Budget) -> RunOutcome {
        self.run_steps(p, budget.steps())
    }

    fn run_steps(&self, p: &BitString, budget: u64) -> RunOutcome {
        match &self.kind {
            Kind::Vm(discipline) => match vm::execute(p, *discipline, budget) {
                Exec::Halted { steps, output } => RunOutcome::Halted {
                    stop_time: steps,
                    output,
                },
                Exec::Diverges | Exec::OutOfBudget => RunOutcome::Running,
            },
            Kind::Dispatcher(slots) => {
                let Some((slot, x)) = split_selector(p) else {
                    return RunOutcome::Running;
                };
                let inner = budget.saturating_sub(DISPATCH_OVERHEAD);
                match slots.get(slot) {
                    None => RunOutcome::Running,
                    Some(Slot::Sub(m)) => match m.run_steps(&x, inner) {
                        RunOutcome::Halted { stop_time, output } => RunOutcome::Halted {
                            stop_time: stop_time + DISPATCH_OVERHEAD,
                            output,
                        },
                        RunOutcome::Running => RunOutcome::Running,
                    },
                    Some(Slot::Clock) => {
                        match self.run_steps(&x, inner.saturating_sub(CLOCK_STEP_OVERHEAD)) {
                            RunOutcome::Halted { stop_time, .. } => RunOutcome::Halted {
                                stop_time: stop_time + CLOCK_STEP_OVERHEAD + DISPATCH_OVERHEAD,
                                output: bin_u64(stop_time),
                            },
                            RunOutcome::Running => RunOutcome::Running,
                        }
                    }
                }
            }
            Kind::Table { .. } | Kind::Total { .. } => match self.decide(p) {
                Some(Verdict::Halts { stop_time, output }) if stop_time <= budget => {
                    RunOutcome::Halted { stop_time, output }
                }
                _ => RunOutcome::Running,
            },
        }
    }

    /// Exact halting status, or `None` on opaque machines.
    pub fn decide(&self, p: &BitString) -> Option<Verdict> {
        if self.class() == DecidabilityClass::Opaque {
            return None;
        }
        Some(self.decide_transparent(p))
    }

    fn decide_transparent(&self, p: &BitString) -> Verdict {
        match &self.kind {
            Kind::Table { stops, .. } => match stops.get(p) {
                Some((t, out)) => Verdict::Halts {
                    stop_time: *t,
                    output: out.clone(),
                },
                None => Verdict::NeverHalts,
            },
            Kind::Total { stop_time, output } => Verdict::Halts {
                stop_time: *stop_time,
                output: output.apply(p),
            },
            Kind::Dispatcher(slots) => {
                let Some((slot, x)) = split_selector(p) else {
                    return Verdict::NeverHalts;
                };
                match slots.get(slot) {
                    None => Verdict::NeverHalts,
                    Some(Slot::Sub(m)) => match m.decide_transparent(&x) {
                        Verdict::Halts { stop_time, output } => Verdict::Halts {
                            stop_time: stop_time + DISPATCH_OVERHEAD,
                            output,
                        },
                        Verdict::NeverHalts => Verdict::NeverHalts,
                    },
                    Some(Slot::Clock) => match self.decide_transparent(&x) {
                        Verdict::Halts { stop_time, .. } => Verdict::Halts {
                            stop_time: stop_time + CLOCK_STEP_OVERHEAD + DISPATCH_OVERHEAD,
                            output: bin_u64(stop_time),
                        },
                        Verdict::NeverHalts => Verdict::NeverHalts,
                    },
                }
            }
            Kind::Vm(_) => unreachable!("VMs are opaque"),
        }
    }

    pub fn class(&self) -> DecidabilityClass {
        match &self.kind {
            Kind::Table { .. } | Kind::Total { .. } => DecidabilityClass::Transparent,
            Kind::Vm(_) => DecidabilityClass::Opaque,
            Kind::Dispatcher(slots) => {
                let all = slots.iter().all(|s| match s {
                    Slot::Clock => true,
                    Slot::Sub(m) => m.class() == DecidabilityClass::Transparent,
                });
                if all {
                    DecidabilityClass::Transparent
                } else {
                    DecidabilityClass::Opaque
                }
            }
        }
    }

    pub fn is_transparent(&self) -> bool {
        self.class() == DecidabilityClass::Transparent
    }

    /// An index beyond which no `bin(i)` halts, when the domain is known to be finite.
    pub fn domain_index_bound(&self) -> Option<u64> {
        match &self.kind {
            Kind::Table { max_index, .. } => *max_index,
            Kind::Dispatcher(slots) => {
                let mut bound = 1u64;
                for (i, slot) in slots.iter().enumerate() {
                    let Slot::Sub(m) = slot else { return None };
                    let sub = m.domain_index_bound()?;
                    let x = selector(i).concat(&bin_u64(sub));
                    bound = bound.max(bin_inv_u64(&x)?);
                }
                Some(bound)
            }
            Kind::Vm(_) | Kind::Total { .. } => None,
        }
    }

    /// `time(p)`, when the machine has a time wrapper.
    pub fn time_wrap(&self, p: &BitString) -> Option<BitString> {
        match &self.kind {
            Kind::Vm(_) => Some(vm::time_wrap(p)),
            Kind::Dispatcher(_) => self.clock_slot().map(|j| selector(j).concat(p)),
            _ => None,
        }
    }

    /// The constant `c` with `|time(p)| = |p| + c`, when a wrapper exists.
    pub fn time_wrap_bits(&self) -> Option<u32> {
        match &self.kind {
            Kind::Vm(_) => Some(vm::TIME_PREFIX_BITS),
            Kind::Dispatcher(_) => self.clock_slot().map(|j| j as u32 + 1),
            _ => None,
        }
    }

    /// `c` for threshold formulas: the machine's own wrapper width, or the VM's.
    pub fn wrapper_constant(&self) -> u32 {
        self.time_wrap_bits().unwrap_or(DEFAULT_WRAPPER_BITS)
    }

    /// Steps `time(p)` takes beyond `t_p`.
    pub fn time_wrap_step_overhead(&self) -> Option<u64> {
        match &self.kind {
            Kind::Vm(_) => Some(vm::TIME_STEP_OVERHEAD),
            Kind::Dispatcher(_) => self
                .clock_slot()
                .map(|_| CLOCK_STEP_OVERHEAD + DISPATCH_OVERHEAD),
            _ => None,
        }
    }

    fn clock_slot(&self) -> Option<usize> {
        match &self.kind {
            Kind::Dispatcher(slots) => slots.iter().position(|s| matches!(s, Slot::Clock)),
            _ => None,
        }
    }

    /// A dispatcher's slots in order; `None` marks the clock.
    pub fn dispatcher_slots(&self) -> Vec<Option<Machine>> {
        match &self.kind {
            Kind::Dispatcher(slots) => slots
                .iter()
                .map(|s| match s {
                    Slot::Sub(m) => Some(m.clone()),
                    Slot::Clock => None,
                })
                .collect(),
            _ => Vec::new(),
        }
    }
}

/// `0^i 1`.
pub fn selector(i: usize) -> BitString {
    let mut bits = vec![false; i];
    bits.push(true);
    BitString::from_bits(bits)
}

fn split_selector(p: &BitString) -> Option<(usize, BitString)> {
    let i = p.bits().iter().position(|&b| b)?;
    Some((i, BitString::from_bits(p.bits()[i + 1..].to_vec())))
}

/// The decidability class of a machine spec.
pub fn decidability_class(spec: &MachineSpec) -> Result<DecidabilityClass> {
    Machine::from_spec(spec).map(|m| m.class())
}

/// Run on a spec; builds the machine first.
pub fn run(spec: &MachineSpec, p: &BitString, budget: Budget) -> Result<RunOutcome> {
    Ok(Machine::from_spec(spec)?.run(p, budget))
}
