//! Orchestration behind the `hsi-acs` binary: phantom generation, simulated
//! adaptive acquisition, reconstruction, evaluation and full sweeps.

// `!(x > 0.0)` rejects NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod files;

use hsi_acs::fusion::FusionError;
use hsi_acs::metrics::MetricsError;
use hsi_acs::sampling::SamplingError;
use thiserror::Error;

pub use commands::{cmd_evaluate, cmd_phantom, cmd_reconstruct, cmd_simulate, cmd_sweep};
pub use config::{Overrides, RunConfig, Source};

#[derive(Debug, Error)]
pub enum CliError {
    /// bad configuration, missing or malformed inputs
    #[error("{0}")]
    Config(String),
    /// the numerics failed on otherwise valid inputs
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<FusionError> for CliError {
    fn from(e: FusionError) -> Self {
        match e {
            FusionError::Diverged { .. } | FusionError::SingularSystem => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<SamplingError> for CliError {
    fn from(e: SamplingError) -> Self {
        match e {
            SamplingError::RankDeficient { .. } | SamplingError::SpanExhausted => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Shape(_) | MetricsError::FeatureCount { .. } | MetricsError::InvalidParameter(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}
