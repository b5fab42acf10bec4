//! Budgeted experiments on the halting behaviour of small machines.
//!
//! The crate enumerates programs of a toy machine, records exactly when each
//! one stops, and turns those records into exact probabilities, certified
//! interval bounds on a computable runtime distribution, natural-complexity
//! searches and density counts of stopping times.

pub mod codec;
pub mod complexity;
pub mod density;
pub mod error;
pub mod exact;
pub mod halting_prob;
pub mod machine;
pub mod runtime;
pub mod sweep;

pub use codec::{bin, bin_inv, BitString, Index};
pub use error::{LabError, Result};
pub use exact::{Interval, Rational};
pub use machine::{Budget, Machine, MachineSpec, RunOutcome};
