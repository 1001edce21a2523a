//! Experiment orchestration for `seplab`: configuration, the subcommand
//! pipelines and the acceptance criteria behind `verify`.

pub mod commands;
pub mod config;
pub mod criteria;
pub mod output;

use seplab_core::stats::StatsError;
use seplab_core::theory::TheoryError;
use seplab_core::zero_range::ZrError;
use seplab_core::{KernelError, ProfileError, SimError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Zr(#[from] ZrError),
    #[error("{failed} of {total} acceptance criteria failed")]
    VerificationFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigInvalid(_) => 2,
            CliError::VerificationFailed { .. } => 3,
            _ => 1,
        }
    }
}
