//! Library side of the `covext` binary: file formats, the subcommands and
//! their exit-code contract.

pub mod commands;
pub mod files;

use thiserror::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_BAD_DATA: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;
pub const EXIT_VERIFY: u8 = 4;
pub const EXIT_STRUCTURE: u8 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("bad input: {0}")]
    BadData(String),
    #[error(transparent)]
    Core(#[from] covext::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use covext::Error as E;
        match self {
            CliError::BadData(_) | CliError::Io { .. } => EXIT_BAD_DATA,
            CliError::Core(e) => match e {
                E::DimensionMismatch { .. }
                | E::NotSchur
                | E::InvalidArgument(_)
                | E::NotPositive { .. }
                | E::ZeroRecord
                | E::NotConjugateClosed { .. } => EXIT_BAD_DATA,
                E::IllConditionedIPlusT { .. } => EXIT_STRUCTURE,
                E::Unsolvable { .. } => EXIT_VERIFY,
                E::ConstantTermMismatch { .. }
                | E::Singular { .. }
                | E::PoleOnCircle { .. }
                | E::NearPole { .. }
                | E::NoConvergence { .. }
                | E::InvalidBranch { .. }
                | E::ExtractedNotSchur => EXIT_SOLVER,
            },
        }
    }
}
