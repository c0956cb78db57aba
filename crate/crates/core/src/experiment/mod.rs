//! Configuration-driven runs, parameter sweeps and the validation battery
//! behind the command-line tool.
//!
//! Every output embeds the configuration that produced it and the tool
//! version. Reports contain no timestamps or host details, so identical
//! configurations give byte-identical files.

mod config;
mod report;
mod run;
mod sweep;
pub mod validate;

pub use config::{
    tolerance_tier, AliceConfig, BobConfig, ExperimentConfig, FieldConfig, GeometryConfig,
    LatticeConfig, MeterConfig, OutputConfig, RunConfig, Spacing, SweepAxis, SweepConfig,
    ValidateConfig, PARAMETERS, TOLERANCE_TIER_ENV, VALIDATION_GROUPS, VALIDATION_SCALE_ENV,
};
pub use report::{format_float, to_json, ToolInfo};
pub use run::{run, FunctionalEstimate, MeterSummary, Protocols, RunReport};
pub use sweep::{sweep, SweepTable, SWEEP_COLUMNS};
pub use validate::{validate, Check, CheckStatus, ValidationReport};

use thiserror::Error;

use crate::influence::{Functional, InfluenceError, PairingError};
use crate::observables::ObservableError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration syntax: {0}")]
    ConfigSyntax(String),
    #[error("invalid configuration field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },
    #[error("{functional} diverges: {source}")]
    Divergent {
        functional: Functional,
        #[source]
        source: PairingError,
    },
    #[error("{functional} could not be evaluated: {source}")]
    Numerical {
        functional: Functional,
        #[source]
        source: PairingError,
    },
    #[error("sweep needs at least one axis in [[sweep.axes]]")]
    NoSweepAxes,
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl ExperimentError {
    /// Process exit status for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::ConfigSyntax(_)
            | ExperimentError::InvalidConfig { .. }
            | ExperimentError::NoSweepAxes => 2,
            ExperimentError::Divergent { .. } => 3,
            _ => 1,
        }
    }
}

impl From<InfluenceError> for ExperimentError {
    fn from(e: InfluenceError) -> Self {
        match e {
            InfluenceError::InvalidSetup(reason) => ExperimentError::InvalidConfig {
                field: "geometry".into(),
                reason,
            },
            InfluenceError::Functional { functional, source } => match source {
                PairingError::IrDivergent
                | PairingError::UvDivergent { .. }
                | PairingError::BothPlateaus => ExperimentError::Divergent { functional, source },
                source => ExperimentError::Numerical { functional, source },
            },
        }
    }
}
