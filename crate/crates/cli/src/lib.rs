//! Experiment runner behind the `bptp` binary.
//!
//! `bptp run` solves one instance and writes `results.csv`, `solution.json`
//! and, for margin-deciding kinds, `structure.csv` and `heuristic.json`.
//! `bptp batch` runs a set of `key=value` config files and averages their
//! results into `batch.csv`.

mod batch;
mod config;
mod run;

pub use batch::{batch, BatchRow, BatchSummary, BATCH_FILE};
pub use config::{
    CapacityChoice, InstanceFormat, MarginSet, Mode, RunConfig, RunOptions, DEFAULT_OUT_DIR, DEFAULT_PHASE_SECONDS,
    OUT_DIR_ENV,
};
pub use run::{
    fixed_compensation, load_instance, run, AssignmentJson, CarrierJson, RunOutcome, SolutionJson, HEURISTIC_FILE,
    MATCH_TOL, RESULTS_FILE, SOLUTION_FILE, SOLUTION_SCHEMA_VERSION, STRUCTURE_FILE,
};

/// Exit status for usage errors.
pub const EXIT_USAGE: u8 = 2;
/// Exit status for solver errors and failed comparisons.
pub const EXIT_FAILURE: u8 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Solver(#[from] bilevel_ptp::Error),
    /// Two methods that must agree did not.
    #[error("{0}")]
    Mismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            // Bad instance files and arguments are the caller's to fix.
            CliError::Solver(bilevel_ptp::Error::Parse { .. })
            | CliError::Solver(bilevel_ptp::Error::InvalidInstance(_))
            | CliError::Solver(bilevel_ptp::Error::InvalidArgument(_)) => EXIT_USAGE,
            CliError::Io(e) if e.kind() == std::io::ErrorKind::NotFound => EXIT_USAGE,
            _ => EXIT_FAILURE,
        }
    }
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
