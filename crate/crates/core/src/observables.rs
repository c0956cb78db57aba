//! Physical outputs derived from a computed [`InfluenceFunctional`].
//!
//! Everything here except [`particle_number`] is closed-form algebra on the
//! six pairing scalars, so sweeping meter parameters costs nothing once the
//! pairings are known.
//!
//! ```
//! use ctpdual::influence::InfluenceFunctional;
//! use ctpdual::observables::{optimal_epsilon, overlap};
//!
//! let infl = InfluenceFunctional { gamma_a: 2f64.ln(), ..Default::default() };
//! assert!((overlap(&infl, 1.0).unwrap().re - 0.5).abs() < 1e-15);
//!
//! let meter = InfluenceFunctional { g_r_bb: 4.0, gamma_b: 2.0, ..Default::default() };
//! let opt = optimal_epsilon(&meter);
//! assert_eq!((opt.eps2, opt.sigma2), (4.0, 5.0));
//! ```

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::greens::FieldParams;
use crate::influence::{ExperimentSetup, InfluenceFunctional, PairingError};
use crate::numerics::{adaptive_quad, erf_fn, oscillatory_tail_quad, QuadratureSpec, TailQuad};
use crate::protocols::CouplingProtocol;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ObservableError {
    #[error("meter variance must be positive and finite, got {0}")]
    NonPositiveVariance(f64),
    #[error("spin must be +1 or -1, got {0}")]
    InvalidSpin(f64),
    #[error("visibility must lie in [0, 1], got {0}")]
    InvalidVisibility(f64),
}

fn check_eps2(eps2: f64) -> Result<(), ObservableError> {
    if eps2.is_finite() && eps2 > 0.0 {
        Ok(())
    } else {
        Err(ObservableError::NonPositiveVariance(eps2))
    }
}

/// Overlap of the two spin-conditioned states of field and meter,
/// `e^{−Γ_A} exp(−M²/(4ε²))`. It is real; `⟨σ_x⟩` is its real part and
/// `⟨σ_y⟩` minus its imaginary part.
pub fn overlap(infl: &InfluenceFunctional, eps2: f64) -> Result<Complex64, ObservableError> {
    check_eps2(eps2)?;
    let m = infl.m_decoh;
    Ok(Complex64::new(
        (-infl.gamma_a - m * m / (4.0 * eps2)).exp(),
        0.0,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianDistribution {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianDistribution {
    pub fn pdf(&self, x: f64) -> f64 {
        let z = x - self.mean;
        (-z * z / (2.0 * self.variance)).exp() / (2.0 * PI * self.variance).sqrt()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        0.5 * (1.0 + erf_fn((x - self.mean) / (SQRT_2 * self.variance.sqrt())))
    }
}

/// `Σ² = (𝔊_R^BB)²/(2ε²) + (Γ_B + ε²)/2`.
pub fn meter_variance(infl: &InfluenceFunctional, eps2: f64) -> Result<f64, ObservableError> {
    check_eps2(eps2)?;
    Ok(infl.g_r_bb * infl.g_r_bb / (2.0 * eps2) + 0.5 * (infl.gamma_b + eps2))
}

/// Distribution of Bob's meter reading given Alice's spin `±1`.
pub fn meter_distribution(
    infl: &InfluenceFunctional,
    eps2: f64,
    spin: f64,
) -> Result<GaussianDistribution, ObservableError> {
    if spin != 1.0 && spin != -1.0 {
        return Err(ObservableError::InvalidSpin(spin));
    }
    Ok(GaussianDistribution {
        mean: spin * infl.chi_bar_b,
        variance: meter_variance(infl, eps2)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimalMeter {
    pub eps2: f64,
    pub sigma2: f64,
    /// `𝔊_R^BB = 0`: the optimum sits at the excluded boundary `ε² = 0`.
    pub degenerate: bool,
}

/// Meter variance minimising `Σ²`: `ε² = |𝔊_R^BB|`, `Σ² = |𝔊_R^BB| + Γ_B/2`.
pub fn optimal_epsilon(infl: &InfluenceFunctional) -> OptimalMeter {
    let g = infl.g_r_bb.abs();
    OptimalMeter {
        eps2: g,
        sigma2: g + 0.5 * infl.gamma_b,
        degenerate: g == 0.0,
    }
}

/// `|erf(χ̄_B/(√2 Σ))|`, the trace distance between the two meter-reading
/// distributions, reached by thresholding the reading at zero.
pub fn distinguishability_threshold(
    infl: &InfluenceFunctional,
    eps2: f64,
) -> Result<f64, ObservableError> {
    let sigma = meter_variance(infl, eps2)?.sqrt();
    Ok(erf_fn(infl.chi_bar_b / (SQRT_2 * sigma)).abs())
}

/// `Σ_{λ>0} λ` for `|ψ₁⟩⟨ψ₁| − |ψ₂⟩⟨ψ₂|` with `⟨ψ₁|ψ₂⟩ = cos θ = v`.
pub fn two_level_trace_distance(v: f64) -> Result<f64, ObservableError> {
    if !(0.0..=1.0).contains(&v) {
        return Err(ObservableError::InvalidVisibility(v));
    }
    let (c, s) = (v, (1.0 - v * v).sqrt());
    // ψ₁ = (1, 0), ψ₂ = (c, s)
    let (p, q, r) = (1.0 - c * c, -c * s, -s * s);
    let mid = 0.5 * (p + r);
    let rad = (0.5 * (p - r)).hypot(q);
    Ok([mid + rad, mid - rad].iter().filter(|&&l| l > 0.0).sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub visibility: f64,
    pub d_b_threshold: f64,
    pub d_b_phi: f64,
    /// `1 − v² − D_B²`.
    pub slack: f64,
    pub n_created: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
}

pub fn duality_report(
    setup: &ExperimentSetup,
    infl: &InfluenceFunctional,
) -> Result<DualityReport, ObservableError> {
    let eps2 = setup.meter_epsilon2;
    let ov = overlap(infl, eps2)?;
    let v = ov.norm().min(1.0);
    let d_b = distinguishability_threshold(infl, eps2)?;
    Ok(DualityReport {
        visibility: v,
        d_b_threshold: d_b,
        d_b_phi: two_level_trace_distance(v)?,
        slack: 1.0 - v * v - d_b * d_b,
        n_created: 0.5 * infl.gamma_a,
        sigma_x: ov.re,
        sigma_y: -ov.im,
    })
}

/// Mean number of quanta radiated by a classical source with coupling
/// history `protocol`: `(1/4π²) ∫_m^∞ √(ω² − m²) |λ̃(ω)|² dω`.
///
/// This is an energy-shell integral with its own substitution near threshold,
/// kept separate from the momentum integral behind
/// [`keldysh_pairing`](crate::influence::keldysh_pairing) so the two can check
/// each other.
pub fn particle_number(
    protocol: &CouplingProtocol,
    field: &FieldParams,
    spec: &QuadratureSpec,
) -> Result<f64, PairingError> {
    if protocol.is_zero() {
        return Ok(0.0);
    }
    let m = field.mass;
    if m == 0.0 && protocol.has_plateau() {
        return Err(PairingError::IrDivergent);
    }
    let bp = protocol.breakpoints();
    let span = (bp[bp.len() - 1] - bp[0]).max(1e-300);
    let period = 2.0 * PI / span;
    let spectral = |w: f64| -> f64 {
        match protocol.fourier_transform(w) {
            Ok(a) => a.norm_sqr(),
            Err(_) => f64::NAN,
        }
    };
    let density = |w: f64| ((w - m) * (w + m)).max(0.0).sqrt() * spectral(w) / (4.0 * PI * PI);

    // ω = m + u² near threshold removes the square-root edge.
    let width = period.min(1.0f64.max(m));
    let near = adaptive_quad(
        |u: f64| {
            if u == 0.0 {
                return 0.0;
            }
            let w = m + u * u;
            2.0 * u * u * (2.0 * m + u * u).sqrt() * spectral(w) / (4.0 * PI * PI)
        },
        0.0,
        width.sqrt(),
        spec,
    )?;
    let tail_spec = QuadratureSpec {
        abs_tol: spec.abs_tol.max(0.1 * spec.rel_tol * near.value.abs()),
        ..*spec
    };
    match oscillatory_tail_quad(density, m + width, period, &tail_spec)? {
        TailQuad::Converged(t) => Ok(near.value + t.value),
        TailQuad::Divergent(d) => Err(PairingError::UvDivergent {
            log_slope: d.log_slope,
        }),
    }
}
