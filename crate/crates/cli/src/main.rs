//! `haltlab`: every experiment of the lab behind one command.
//!
//! Reports go to stdout as `{"config": …, "result": …}` JSON (or CSV with the
//! config echoed on a leading `#` line). Diagnostics go to stderr.

use std::io::Write;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use haltlab::LabError;

mod commands;

#[derive(Parser, Debug)]
#[command(
    name = "haltlab",
    version,
    about = "Budgeted halting experiments on small machines"
)]
struct Cli {
    /// Worker threads for the sweeps. Never changes the output.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct MachineArg {
    /// `builtin:<name>` or a JSON machine file.
    #[arg(long, default_value = "builtin:universal-repeat")]
    pub machine: String,
}

#[derive(Args, Debug, Clone)]
pub struct BudgetArg {
    /// Step budget; required for opaque machines, rejected for transparent ones.
    #[arg(long)]
    pub budget: Option<u64>,
}

#[derive(Args, Debug, Clone)]
pub struct DistArg {
    /// Bits of precision for Υ.
    #[arg(long, default_value_t = 16)]
    pub precision: u32,

    /// Allow precision above the opaque-machine cap.
    #[arg(long)]
    pub allow_high_precision: bool,

    /// User weight table (JSON); the default is r_i = 2^-i.
    #[arg(long)]
    pub distribution: Option<String>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Halting history of all programs of one length, with its probabilities.
    History {
        #[command(flatten)]
        machine: MachineArg,
        #[arg(long)]
        length: u32,
        #[arg(long)]
        max_time: u64,
        /// Conditioning time (defaults to min(5, max-time)).
        #[arg(long)]
        t0: Option<u64>,
        /// Second time for the conditional (defaults to min(8, max-time)).
        #[arg(long)]
        t1: Option<u64>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Certified interval for Υ.
    Upsilon {
        #[command(flatten)]
        machine: MachineArg,
        #[command(flatten)]
        dist: DistArg,
    },
    /// Threshold time T(k) and the certified tail beyond it.
    Threshold {
        #[command(flatten)]
        machine: MachineArg,
        #[command(flatten)]
        dist: DistArg,
        #[arg(long)]
        k: u32,
    },
    /// Run one program up to T(k).
    Decide {
        #[command(flatten)]
        machine: MachineArg,
        #[command(flatten)]
        dist: DistArg,
        /// Program bits (`0`/`1`; empty for λ).
        #[arg(long, allow_hyphen_values = true)]
        program: String,
        #[arg(long)]
        k: u32,
    },
    /// Random and stop-candidate fractions over [2^m, T].
    Density {
        #[command(flatten)]
        machine: MachineArg,
        #[command(flatten)]
        budget: BudgetArg,
        #[arg(long)]
        length: u32,
        /// Horizon T (defaults to 2^(m+1)).
        #[arg(long)]
        horizon: Option<u64>,
    },
    /// Prob_N(dom M) for a range of lengths.
    Probcurve {
        #[command(flatten)]
        machine: MachineArg,
        #[command(flatten)]
        budget: BudgetArg,
        /// Inclusive range `a..b`.
        #[arg(long, default_value = "1..10")]
        lengths: String,
        /// First length of the trend window.
        #[arg(long, default_value_t = 6)]
        tail_from: u32,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Split the halting pairs into a computable part and a small residual.
    Decompose {
        #[command(flatten)]
        machine: MachineArg,
        #[command(flatten)]
        budget: BudgetArg,
        #[command(flatten)]
        dist: DistArg,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        max_length: u32,
    },
}

/// What a command produced: the text for stdout, plus a failed check if any.
pub struct Outcome {
    pub text: String,
    pub violation: Option<String>,
}

fn exit_code(e: &LabError) -> u8 {
    match e {
        LabError::Config(_)
        | LabError::Precondition(_)
        | LabError::UndefinedConditional(_)
        | LabError::Unsupported(_)
        | LabError::Json(_) => 2,
        LabError::EnumerationCap { .. } | LabError::ResourceLimit(_) => 3,
        LabError::Degenerate(_) => 4,
        LabError::InvariantViolation(_) => 5,
        LabError::Io(_) => 1,
    }
}

fn dispatch(command: Command) -> haltlab::Result<Outcome> {
    match command {
        Command::History {
            machine,
            length,
            max_time,
            t0,
            t1,
            format,
        } => commands::history(&machine, length, max_time, t0, t1, format),
        Command::Upsilon { machine, dist } => commands::upsilon(&machine, &dist),
        Command::Threshold { machine, dist, k } => commands::threshold(&machine, &dist, k),
        Command::Decide {
            machine,
            dist,
            program,
            k,
        } => commands::decide(&machine, &dist, &program, k),
        Command::Density {
            machine,
            budget,
            length,
            horizon,
        } => commands::density(&machine, &budget, length, horizon),
        Command::Probcurve {
            machine,
            budget,
            lengths,
            tail_from,
            format,
        } => commands::probcurve(&machine, &budget, &lengths, tail_from, format),
        Command::Decompose {
            machine,
            budget,
            dist,
            k,
            max_length,
        } => commands::decompose(&machine, &budget, &dist, k, max_length),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = || dispatch(cli.command);
    let result = match cli.workers {
        Some(0) => Err(LabError::Precondition(
            "--workers must be at least 1".into(),
        )),
        Some(w) => match rayon::ThreadPoolBuilder::new().num_threads(w).build() {
            Ok(pool) => pool.install(run),
            Err(e) => Err(LabError::ResourceLimit(format!(
                "cannot start {w} workers: {e}"
            ))),
        },
        None => run(),
    };
    match result {
        Ok(outcome) => {
            let mut out = std::io::stdout().lock();
            if out
                .write_all(outcome.text.as_bytes())
                .and_then(|_| out.flush())
                .is_err()
            {
                return ExitCode::from(1);
            }
            match outcome.violation {
                Some(msg) => {
                    eprintln!("error: check failed: {msg}");
                    ExitCode::from(5)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&LabError::Precondition("x".into())), 2);
        assert_eq!(exit_code(&LabError::Config("x".into())), 2);
        assert_eq!(
            exit_code(&LabError::EnumerationCap {
                length: 30,
                cap: 24
            }),
            3
        );
        assert_eq!(exit_code(&LabError::ResourceLimit("x".into())), 3);
        assert_eq!(exit_code(&LabError::Degenerate("x".into())), 4);
        assert_eq!(exit_code(&LabError::InvariantViolation("x".into())), 5);
    }
}
