use serde::{Deserialize, Serialize};

use super::report::ToolInfo;
use super::{ExperimentConfig, ExperimentError};
use crate::greens::FieldParams;
use crate::influence::{evaluate_influence, CutoffBehaviour, Functional, InfluenceFunctional};
use crate::observables::{
    duality_report, meter_variance, optimal_epsilon, DualityReport, OptimalMeter,
};
use crate::protocols::CouplingProtocol;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Protocols {
    pub alice: CouplingProtocol,
    pub bob: CouplingProtocol,
}

/// One functional with its quadrature error and regulator dependence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalEstimate {
    pub functional: Functional,
    pub value: f64,
    pub abs_error: f64,
    pub cutoff: CutoffBehaviour,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeterSummary {
    pub epsilon2: f64,
    pub sigma2: f64,
    pub optimal: OptimalMeter,
}

/// Everything `run` writes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: ToolInfo,
    pub config: ExperimentConfig,
    pub field: FieldParams,
    pub protocols: Protocols,
    pub separation: f64,
    /// Functionals not listed here were not evaluated and are zero below.
    pub requested: Vec<Functional>,
    pub influence: InfluenceFunctional,
    pub estimates: Vec<FunctionalEstimate>,
    pub meter: MeterSummary,
    pub duality: DualityReport,
}

/// Evaluates the requested functionals and every observable derived from them.
pub fn run(config: &ExperimentConfig) -> Result<RunReport, ExperimentError> {
    config.validate()?;
    let setup = config.setup()?;
    let spec = config.effective_quadrature()?;
    let requested = config.requested_functionals()?;
    let eval = evaluate_influence(&setup, &spec, &requested)?;
    let infl = eval.functional;
    let estimates = eval
        .estimates
        .iter()
        .map(|(functional, e)| FunctionalEstimate {
            functional: *functional,
            value: e.value,
            abs_error: e.abs_error,
            cutoff: e.cutoff,
        })
        .collect();
    let eps2 = setup.meter_epsilon2;
    Ok(RunReport {
        tool: ToolInfo::default(),
        config: config.clone(),
        field: setup.field,
        protocols: Protocols {
            alice: setup.protocol_a.clone(),
            bob: setup.protocol_b.clone(),
        },
        separation: setup.separation,
        requested: eval.estimates.iter().map(|(f, _)| *f).collect(),
        influence: infl,
        estimates,
        meter: MeterSummary {
            epsilon2: eps2,
            sigma2: meter_variance(&infl, eps2)?,
            optimal: optimal_epsilon(&infl),
        },
        duality: duality_report(&setup, &infl)?,
    })
}
