//! Library side of the `dlqr` command-line tool.
//!
//! Exit codes: 0 success, 1 other runtime failure, 2 controller not
//! stabilizing, 3 input or schema error, 4 stationary point / optimal
//! transform does not exist, 5 a numerical check failed.

use std::io::Write;

pub mod args;
pub mod commands;
pub mod format;
pub mod sweep;

pub use args::{Cli, Command};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] dlqr_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Input(String),
    #[error("check failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use dlqr_core::Error as E;
        match self {
            CliError::Core(e) => match e {
                E::NotStabilizing { .. } => 2,
                E::NonSquare { .. }
                | E::DimensionMismatch(_)
                | E::NonFinite(_)
                | E::NotSymmetric(_)
                | E::NotPositiveSemidefinite(_)
                | E::NotPositiveDefinite(_)
                | E::RankDeficientOutput
                | E::AssumptionViolated(_)
                | E::InvalidConfig(_)
                | E::Schema(_) => 3,
                E::SingularX12 | E::OptimalTransformNotFound(_) => 4,
                _ => 1,
            },
            CliError::Io { .. } | CliError::Input(_) => 3,
            CliError::CheckFailed(_) => 5,
        }
    }

    pub(crate) fn stdout(source: std::io::Error) -> Self {
        CliError::Io {
            path: "<stdout>".into(),
            source,
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

/// Runs one command, writing its report to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> CliResult {
    match &cli.command {
        Command::Eval(a) => commands::eval(a, out),
        Command::Stationary(a) => commands::stationary(a, out),
        Command::Landscape(a) => commands::landscape(a, out),
        Command::Gradcheck(a) => {
            commands::gradcheck(a, &dlqr_core::gradient::analytic_gradient, out)
        }
        Command::Descend(a) => commands::descend(a, out),
    }
}
