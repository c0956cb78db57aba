use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::greens::FieldParams;
use crate::influence::{ExperimentSetup, Functional};
use crate::numerics::QuadratureSpec;
use crate::protocols::CouplingProtocol;

/// Environment variable selecting a quadrature tolerance tier
/// (`strict`, `standard` or `fast`); it replaces `[quadrature]`.
pub const TOLERANCE_TIER_ENV: &str = "CTPDUAL_TOLERANCE_TIER";
/// Environment variable multiplying every validation tolerance.
pub const VALIDATION_SCALE_ENV: &str = "CTPDUAL_VALIDATION_SCALE";

/// One experiment, read from a TOML file.
///
/// ```toml
/// [field]
/// mass = 1.0
///
/// [alice]
/// lambda0 = 1.0
/// t_a = 2.0
///
/// [bob]
/// alpha = 1.0
/// t_b = 1.0
///
/// [geometry]
/// separation = 3.0
///
/// [meter]
/// epsilon2 = 1.0
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub field: FieldConfig,
    pub alice: AliceConfig,
    pub bob: BobConfig,
    pub geometry: GeometryConfig,
    pub meter: MeterConfig,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub lattice: LatticeConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub validate: ValidateConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub mass: f64,
    /// Defaults to `10³·max(m, 1/t_B)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uv_cutoff: Option<f64>,
    /// Defaults to `10⁻²·min(d, t_B)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smearing: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AliceConfig {
    pub lambda0: f64,
    pub t_a: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BobConfig {
    pub alpha: f64,
    pub t_b: f64,
    /// Width of raised-cosine switching edges; sharp edges if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub separation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeterConfig {
    pub epsilon2: f64,
}

/// Momentum lattice used by the oracle comparisons in `validate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeConfig {
    /// Sharp cutoff for Keldysh comparisons; both sides use it as `Λ`.
    pub keldysh_cutoff: f64,
    /// Lattice extent for retarded comparisons, raised to `200/r_s` if smaller.
    pub retarded_k_max: f64,
    pub nodes_per_shell: usize,
    /// Smearing radius for the self-pairing comparison; defaults to
    /// `min(d, t_B)/2`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smearing: Option<f64>,
    /// Shell count of the deliberately coarse lattice in the refinement study.
    pub coarse_shells: usize,
    pub coarse_nodes_per_shell: usize,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self {
            keldysh_cutoff: 200.0,
            retarded_k_max: 400.0,
            nodes_per_shell: 8,
            smearing: None,
            coarse_shells: 64,
            coarse_nodes_per_shell: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Functionals to evaluate, by report name. All six by default.
    pub functionals: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            functionals: Functional::ALL
                .iter()
                .map(|f| f.name().to_string())
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub parameter: String,
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default = "default_spacing")]
    pub spacing: Spacing,
}

fn default_spacing() -> Spacing {
    Spacing::Linear
}

impl SweepAxis {
    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|i| {
                let s = i as f64 / (n - 1) as f64;
                if i == 0 {
                    return self.min;
                }
                if i + 1 == n {
                    return self.max;
                }
                match self.spacing {
                    Spacing::Linear => self.min + s * (self.max - self.min),
                    Spacing::Log => (self.min.ln() + s * (self.max / self.min).ln()).exp(),
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub axes: Vec<SweepAxis>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    /// Multiplies every tolerance; `0` makes every non-exact check fail.
    pub tolerance_scale: f64,
    pub seed: u64,
    /// Random spacelike points for the exact causality check.
    pub causality_points: usize,
    /// Of those, how many are also checked against the mode sum.
    pub mode_sum_points: usize,
    pub overlap_samples: usize,
    pub duality_samples: usize,
    /// Check groups to run, from [`VALIDATION_GROUPS`]; the rest are
    /// reported as skipped.
    pub groups: Vec<String>,
}

/// Check groups of `validate`, in the order they run.
pub const VALIDATION_GROUPS: [&str; 13] = [
    "causality",
    "refinement",
    "mode_sum",
    "green_identity",
    "oracle",
    "m_support",
    "particle_number",
    "meter",
    "overlap",
    "duality",
    "massless",
    "divergence",
    "adiabatic",
];

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            tolerance_scale: 1.0,
            seed: 20_240_601,
            causality_points: 1000,
            mode_sum_points: 1000,
            overlap_samples: 100,
            duality_samples: 1000,
            groups: VALIDATION_GROUPS.iter().map(|g| g.to_string()).collect(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<PathBuf>,
}

/// Names accepted by [`ExperimentConfig::get`], [`ExperimentConfig::set`]
/// and sweep axes.
pub const PARAMETERS: [&str; 10] = [
    "mass",
    "uv_cutoff",
    "smearing",
    "lambda0",
    "t_a",
    "alpha",
    "t_b",
    "smoothing",
    "separation",
    "epsilon2",
];

fn invalid(field: &str, reason: impl Into<String>) -> ExperimentError {
    ExperimentError::InvalidConfig {
        field: field.to_string(),
        reason: reason.into(),
    }
}

impl ExperimentConfig {
    /// Parses and validates. Syntax errors carry line and column.
    pub fn from_toml_str(text: &str) -> Result<Self, ExperimentError> {
        let config: Self =
            toml::from_str(text).map_err(|e| ExperimentError::ConfigSyntax(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration is always representable as TOML")
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "mass" => self.field.mass,
            "uv_cutoff" => self.field.uv_cutoff?,
            "smearing" => self.field.smearing?,
            "lambda0" => self.alice.lambda0,
            "t_a" => self.alice.t_a,
            "alpha" => self.bob.alpha,
            "t_b" => self.bob.t_b,
            "smoothing" => self.bob.smoothing?,
            "separation" => self.geometry.separation,
            "epsilon2" => self.meter.epsilon2,
            _ => return None,
        })
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<(), ExperimentError> {
        match name {
            "mass" => self.field.mass = value,
            "uv_cutoff" => self.field.uv_cutoff = Some(value),
            "smearing" => self.field.smearing = Some(value),
            "lambda0" => self.alice.lambda0 = value,
            "t_a" => self.alice.t_a = value,
            "alpha" => self.bob.alpha = value,
            "t_b" => self.bob.t_b = value,
            "smoothing" => self.bob.smoothing = Some(value),
            "separation" => self.geometry.separation = value,
            "epsilon2" => self.meter.epsilon2 = value,
            _ => {
                return Err(invalid(
                    "sweep.axes.parameter",
                    format!("unknown parameter `{name}`"),
                ))
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.quadrature
            .validate()
            .map_err(|e| invalid("quadrature", e.to_string()))?;
        for (name, v) in [
            ("alice.t_a", self.alice.t_a),
            ("bob.t_b", self.bob.t_b),
            ("geometry.separation", self.geometry.separation),
            ("meter.epsilon2", self.meter.epsilon2),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        self.setup()?;
        self.requested_functionals()?;
        let lat = &self.lattice;
        for (name, v) in [
            ("lattice.keldysh_cutoff", lat.keldysh_cutoff),
            ("lattice.retarded_k_max", lat.retarded_k_max),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        if lat.nodes_per_shell == 0 || lat.coarse_nodes_per_shell == 0 {
            return Err(invalid("lattice.nodes_per_shell", "must be positive"));
        }
        if lat.coarse_shells < crate::oracle::MomentumLattice::MIN_SHELLS {
            return Err(invalid(
                "lattice.coarse_shells",
                format!(
                    "must be at least {}",
                    crate::oracle::MomentumLattice::MIN_SHELLS
                ),
            ));
        }
        if let Some(s) = lat.smearing {
            if !(s.is_finite() && s > 0.0) {
                return Err(invalid(
                    "lattice.smearing",
                    format!("must be positive, got {s}"),
                ));
            }
        }
        for (i, axis) in self.sweep.axes.iter().enumerate() {
            let field = |f: &str| format!("sweep.axes[{i}].{f}");
            if !PARAMETERS.contains(&axis.parameter.as_str()) {
                return Err(invalid(
                    &field("parameter"),
                    format!(
                        "unknown parameter `{}`; expected one of {PARAMETERS:?}",
                        axis.parameter
                    ),
                ));
            }
            if axis.points < 2 {
                return Err(invalid(
                    &field("points"),
                    format!("need at least 2, got {}", axis.points),
                ));
            }
            if !(axis.min.is_finite() && axis.max.is_finite()) {
                return Err(invalid(&field("min"), "bounds must be finite"));
            }
            if axis.spacing == Spacing::Log && !(axis.min > 0.0 && axis.max > 0.0) {
                return Err(invalid(
                    &field("spacing"),
                    "log spacing needs positive bounds",
                ));
            }
            if self.sweep.axes[..i]
                .iter()
                .any(|a| a.parameter == axis.parameter)
            {
                return Err(invalid(
                    &field("parameter"),
                    format!("`{}` swept twice", axis.parameter),
                ));
            }
        }
        let v = &self.validate;
        if !(v.tolerance_scale.is_finite() && v.tolerance_scale >= 0.0) {
            return Err(invalid(
                "validate.tolerance_scale",
                "must be finite and non-negative",
            ));
        }
        for (i, g) in v.groups.iter().enumerate() {
            if !VALIDATION_GROUPS.contains(&g.as_str()) {
                return Err(invalid(
                    &format!("validate.groups[{i}]"),
                    format!("unknown group `{g}`; expected one of {VALIDATION_GROUPS:?}"),
                ));
            }
        }
        if v.mode_sum_points > v.causality_points {
            return Err(invalid(
                "validate.mode_sum_points",
                "cannot exceed validate.causality_points",
            ));
        }
        Ok(())
    }

    pub fn requested_functionals(&self) -> Result<Vec<Functional>, ExperimentError> {
        self.run
            .functionals
            .iter()
            .map(|name| {
                Functional::ALL
                    .into_iter()
                    .find(|f| f.name() == name)
                    .ok_or_else(|| {
                        invalid("run.functionals", format!("unknown functional `{name}`"))
                    })
            })
            .collect()
    }

    pub fn field_params(&self) -> Result<FieldParams, ExperimentError> {
        let f = &self.field;
        let t_b = self.bob.t_b;
        let d = self.geometry.separation;
        FieldParams::new(
            f.mass,
            f.uv_cutoff
                .unwrap_or_else(|| FieldParams::default_cutoff(f.mass, t_b)),
            f.smearing
                .unwrap_or_else(|| FieldParams::default_smearing(t_b, d)),
        )
        .map_err(|e| invalid("field", e.to_string()))
    }

    pub fn alice_protocol(&self) -> Result<CouplingProtocol, ExperimentError> {
        CouplingProtocol::alice(self.alice.lambda0, self.alice.t_a)
            .map_err(|e| invalid("alice", e.to_string()))
    }

    pub fn bob_protocol(&self) -> Result<CouplingProtocol, ExperimentError> {
        let b = &self.bob;
        match b.smoothing {
            None => CouplingProtocol::bob(b.alpha, b.t_b),
            Some(tau) => CouplingProtocol::bob_smoothed(b.alpha, b.t_b, tau),
        }
        .map_err(|e| invalid("bob", e.to_string()))
    }

    pub fn setup(&self) -> Result<ExperimentSetup, ExperimentError> {
        let setup = ExperimentSetup {
            protocol_a: self.alice_protocol()?,
            protocol_b: self.bob_protocol()?,
            separation: self.geometry.separation,
            field: self.field_params()?,
            meter_epsilon2: self.meter.epsilon2,
        };
        setup
            .validate()
            .map_err(|e| invalid("geometry", e.to_string()))?;
        Ok(setup)
    }

    /// `[quadrature]`, replaced by a tier named in the environment if set.
    pub fn effective_quadrature(&self) -> Result<QuadratureSpec, ExperimentError> {
        match std::env::var(TOLERANCE_TIER_ENV) {
            Ok(tier) => tolerance_tier(&tier)
                .ok_or_else(|| invalid(TOLERANCE_TIER_ENV, format!("unknown tier `{tier}`"))),
            Err(_) => Ok(self.quadrature),
        }
    }

    /// `validate.tolerance_scale`, times the environment override if set.
    pub fn effective_tolerance_scale(&self) -> Result<f64, ExperimentError> {
        let mut scale = self.validate.tolerance_scale;
        if let Ok(v) = std::env::var(VALIDATION_SCALE_ENV) {
            let extra: f64 = v
                .parse()
                .map_err(|_| invalid(VALIDATION_SCALE_ENV, format!("not a number: `{v}`")))?;
            if !(extra.is_finite() && extra >= 0.0) {
                return Err(invalid(
                    VALIDATION_SCALE_ENV,
                    "must be finite and non-negative",
                ));
            }
            scale *= extra;
        }
        Ok(scale)
    }
}

/// Quadrature presets selectable through [`TOLERANCE_TIER_ENV`].
pub fn tolerance_tier(name: &str) -> Option<QuadratureSpec> {
    let base = QuadratureSpec::default();
    match name {
        "strict" => Some(QuadratureSpec {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_subdivisions: 50_000,
            ..base
        }),
        "standard" => Some(base),
        "fast" => Some(QuadratureSpec {
            rel_tol: 1e-6,
            abs_tol: 1e-10,
            ..base
        }),
        _ => None,
    }
}
