//! Verification harness for the `folded-attention` crate: seeded oracle and
//! gradient suites, the analytic cost table, and forward timings.
//!
//! Exit-code contract of the `fa` binary: 0 when every check passes, 1 when
//! a check fails or a run breaks, 2 when the configuration or a size guard
//! rejects the run before it starts.

pub mod config;
mod error;
pub mod report;
pub mod runs;
pub mod schema;

use std::fs::File;
use std::io::{BufWriter, Write};

use folded_attention::cost::{write_csv, write_json};

pub use config::{Cli, Command, OutputFormat, RunConfig, Shape4};
pub use error::HarnessError;
pub use report::{CheckResult, SuiteReport, TimingEntry, Verdict};
pub use runs::{run_all, run_bench, run_cost, run_equivalence, run_gradcheck, CostSummary};

#[derive(Debug, Clone, PartialEq)]
pub enum RunOutput {
    Suite(SuiteReport),
    Cost(CostSummary),
}

impl RunOutput {
    pub fn passed(&self) -> bool {
        match self {
            RunOutput::Suite(r) => r.passed(),
            RunOutput::Cost(_) => true,
        }
    }

    pub fn summary(&self) -> String {
        match self {
            RunOutput::Suite(r) => r.summary(),
            RunOutput::Cost(c) => c.describe(),
        }
    }

    /// The machine-readable part: a suite report, or the scaling table.
    pub fn write(&self, format: OutputFormat, out: impl Write) -> Result<(), HarnessError> {
        match (self, format) {
            (RunOutput::Suite(r), f) => r.write(f, out),
            (RunOutput::Cost(c), OutputFormat::Csv) => {
                write_csv(&c.records, out).map_err(|e| HarnessError::Io(e.to_string()))
            }
            (RunOutput::Cost(c), OutputFormat::Json) => {
                write_json(&c.records, out).map_err(|e| HarnessError::Io(e.to_string()))
            }
        }
    }
}

pub fn execute(cfg: &RunConfig) -> Result<RunOutput, HarnessError> {
    Ok(match cfg.command {
        Command::Equivalence => RunOutput::Suite(run_equivalence(cfg)?),
        Command::Gradcheck => RunOutput::Suite(run_gradcheck(cfg)?),
        Command::Cost => RunOutput::Cost(run_cost(cfg)?),
        Command::Bench => RunOutput::Suite(run_bench(cfg)?),
        Command::All => RunOutput::Suite(run_all(cfg)?),
    })
}

/// Runs `cfg`, writes the output to `cfg.out` (or stdout) and returns the
/// process exit code. The human summary goes to stdout when a file is
/// written, otherwise to stderr so stdout stays machine-readable.
pub fn run_to_exit_code(cfg: &RunConfig) -> u8 {
    let result = execute(cfg).and_then(|out| {
        match &cfg.out {
            Some(path) => {
                let file = File::create(path).map_err(|e| {
                    HarnessError::Io(format!("cannot create {}: {e}", path.display()))
                })?;
                let mut w = BufWriter::new(file);
                out.write(cfg.format, &mut w)?;
                w.flush().map_err(|e| HarnessError::Io(e.to_string()))?;
                print!("{}", out.summary());
            }
            None => {
                let stdout = std::io::stdout();
                let mut lock = stdout.lock();
                out.write(cfg.format, &mut lock)?;
                writeln!(lock).map_err(|e| HarnessError::Io(e.to_string()))?;
                eprint!("{}", out.summary());
            }
        }
        Ok(out.passed())
    });
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("fa: {e}");
            e.exit_code()
        }
    }
}
