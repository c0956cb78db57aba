//! Pairing functionals and the influence functional they assemble into.
//!
//! Every entry of the influence functional is a double time integral of two
//! couplings against a Green's function. Keldysh pairings reduce exactly to
//! a radial mode integral over on-shell frequencies,
//!
//! ```text
//! K(f, g; r) = (1/2π²) ∫₀^∞ dk k² sinc(kr) Re[f̃(ω) g̃(ω)*] / (2ω),
//! ```
//!
//! while retarded pairings are done in time: the light-cone delta collapses
//! one integral and the Bessel tail is integrated over the interior of the
//! cone only, so causal support is exact rather than numerically small.
//!
//! ```
//! use ctpdual::greens::FieldParams;
//! use ctpdual::influence::retarded_pairing;
//! use ctpdual::numerics::QuadratureSpec;
//! use ctpdual::protocols::CouplingProtocol;
//!
//! // Alice ramps down before a light signal from Bob can arrive.
//! let alice = CouplingProtocol::alice(1.0, 0.5).unwrap();
//! let bob = CouplingProtocol::bob(1.0, 2.0).unwrap();
//! let field = FieldParams::with_defaults(1.0, 2.0, 1.0).unwrap();
//! let p = retarded_pairing(&alice, &bob, 1.0, &field, &QuadratureSpec::default()).unwrap();
//! assert_eq!(p.value, 0.0);
//! ```

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::greens::{omega, retarded_tail_at_interval, retarded_tail_integral, FieldParams};
use crate::numerics::{
    adaptive_quad_points, oscillatory_tail_quad, sinc, Estimate, QuadratureError, QuadratureSpec,
    TailQuad,
};
use crate::protocols::{CouplingProtocol, ProtocolError};

/// Alice's source, Bob's meter coupling, where they sit and the field between them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSetup {
    pub protocol_a: CouplingProtocol,
    pub protocol_b: CouplingProtocol,
    /// `|x_A − x_B|`.
    pub separation: f64,
    pub field: FieldParams,
    /// Variance `ε²` of Bob's initial meter wave function.
    pub meter_epsilon2: f64,
}

impl ExperimentSetup {
    pub fn validate(&self) -> Result<(), InfluenceError> {
        let bad = |msg: String| Err(InfluenceError::InvalidSetup(msg));
        if !(self.separation.is_finite() && self.separation > 0.0) {
            return bad(format!(
                "separation must be positive, got {}",
                self.separation
            ));
        }
        if !(self.meter_epsilon2.is_finite() && self.meter_epsilon2 > 0.0) {
            return bad(format!(
                "meter variance must be positive, got {}",
                self.meter_epsilon2
            ));
        }
        if self.protocol_b.has_plateau() {
            return bad("Bob's coupling must vanish in the remote past".into());
        }
        Ok(())
    }
}

/// The six scalars that determine the influence functional.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InfluenceFunctional {
    #[serde(rename = "gamma_A")]
    pub gamma_a: f64,
    #[serde(rename = "gamma_B")]
    pub gamma_b: f64,
    #[serde(rename = "gamma_AB")]
    pub gamma_ab: f64,
    #[serde(rename = "g_R_BB")]
    pub g_r_bb: f64,
    #[serde(rename = "chi_bar_B")]
    pub chi_bar_b: f64,
    pub m_decoh: f64,
}

impl InfluenceFunctional {
    pub fn get(&self, which: Functional) -> f64 {
        match which {
            Functional::GammaA => self.gamma_a,
            Functional::GammaB => self.gamma_b,
            Functional::GammaAB => self.gamma_ab,
            Functional::GRetardedBB => self.g_r_bb,
            Functional::ChiBarB => self.chi_bar_b,
            Functional::MDecoh => self.m_decoh,
        }
    }

    fn set(&mut self, which: Functional, value: f64) {
        let slot = match which {
            Functional::GammaA => &mut self.gamma_a,
            Functional::GammaB => &mut self.gamma_b,
            Functional::GammaAB => &mut self.gamma_ab,
            Functional::GRetardedBB => &mut self.g_r_bb,
            Functional::ChiBarB => &mut self.chi_bar_b,
            Functional::MDecoh => &mut self.m_decoh,
        };
        *slot = value;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Functional {
    #[serde(rename = "gamma_A")]
    GammaA,
    #[serde(rename = "gamma_B")]
    GammaB,
    #[serde(rename = "gamma_AB")]
    GammaAB,
    #[serde(rename = "g_R_BB")]
    GRetardedBB,
    #[serde(rename = "chi_bar_B")]
    ChiBarB,
    #[serde(rename = "m_decoh")]
    MDecoh,
}

impl Functional {
    pub const ALL: [Functional; 6] = [
        Functional::GammaA,
        Functional::GammaB,
        Functional::GammaAB,
        Functional::GRetardedBB,
        Functional::ChiBarB,
        Functional::MDecoh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Functional::GammaA => "gamma_A",
            Functional::GammaB => "gamma_B",
            Functional::GammaAB => "gamma_AB",
            Functional::GRetardedBB => "g_R_BB",
            Functional::ChiBarB => "chi_bar_B",
            Functional::MDecoh => "m_decoh",
        }
    }
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How a pairing depends on the regulators it was computed with.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CutoffBehaviour {
    /// Converged; the value does not depend on Λ or r_s.
    Independent,
    /// The mode integral grows like `log_slope · ln Λ`; the value is the
    /// integral up to `cutoff`.
    UvLogDivergent { cutoff: f64, log_slope: f64 },
    /// Evaluated at the smearing radius in place of a coincident point;
    /// `log_sensitivity` is `d value / d ln r_s`.
    SmearingDependent { radius: f64, log_sensitivity: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingEstimate {
    pub value: f64,
    pub abs_error: f64,
    pub cutoff: CutoffBehaviour,
}

impl PairingEstimate {
    fn zero() -> Self {
        Self {
            value: 0.0,
            abs_error: 0.0,
            cutoff: CutoffBehaviour::Independent,
        }
    }

    fn scaled(self, factor: f64) -> Self {
        let cutoff = match self.cutoff {
            CutoffBehaviour::Independent => CutoffBehaviour::Independent,
            CutoffBehaviour::UvLogDivergent { cutoff, log_slope } => {
                CutoffBehaviour::UvLogDivergent {
                    cutoff,
                    log_slope: factor * log_slope,
                }
            }
            CutoffBehaviour::SmearingDependent {
                radius,
                log_sensitivity,
            } => CutoffBehaviour::SmearingDependent {
                radius,
                log_sensitivity: factor * log_sensitivity,
            },
        };
        Self {
            value: factor * self.value,
            abs_error: factor.abs() * self.abs_error,
            cutoff,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum PairingError {
    #[error(
        "infrared divergence: a coupling with a past plateau radiates without bound into a massless field"
    )]
    IrDivergent,
    #[error("both couplings have a past plateau; the retarded pairing is infinite")]
    BothPlateaus,
    #[error("separation must be finite and non-negative, got {0}")]
    InvalidSeparation(f64),
    #[error("ultraviolet divergence: the mode integral grows by {log_slope:e} per unit of ln k")]
    UvDivergent { log_slope: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum InfluenceError {
    #[error("invalid setup: {0}")]
    InvalidSetup(String),
    #[error("{functional}: {source}")]
    Functional {
        functional: Functional,
        #[source]
        source: PairingError,
    },
}

impl InfluenceError {
    /// The functional that failed, if any.
    pub fn functional(&self) -> Option<Functional> {
        match self {
            InfluenceError::Functional { functional, .. } => Some(*functional),
            InfluenceError::InvalidSetup(_) => None,
        }
    }
}

/// Largest time difference over which the two couplings can correlate, plus `r`.
fn phase_span(f: &CouplingProtocol, g: &CouplingProtocol, r: f64) -> f64 {
    let bf = f.breakpoints();
    let bg = g.breakpoints();
    let (Some(&f0), Some(&f1), Some(&g0), Some(&g1)) =
        (bf.first(), bf.last(), bg.first(), bg.last())
    else {
        return r;
    };
    (f1 - g0)
        .abs()
        .max((g1 - f0).abs())
        .max(f1 - f0)
        .max(g1 - g0)
        + r
}

/// Smallest nonzero phase rate, which sets the longest oscillation period.
fn slowest_phase(f: &CouplingProtocol, g: &CouplingProtocol, r: f64) -> f64 {
    let mut slowest = f64::INFINITY;
    for a in f.breakpoints() {
        for b in g.breakpoints() {
            for d in [(a - b).abs() + r, ((a - b).abs() - r).abs()] {
                if d > 1e-9 {
                    slowest = slowest.min(d);
                }
            }
        }
    }
    slowest
}

/// `(1/2π²) ∫ dk k² sinc(kr) Re[f̃ g̃*]/(2ω)` over `k ≥ 0`.
///
/// The integral is taken to the cutoff `Λ` and then continued beyond it. If
/// the continuation converges it is added and the result is independent of
/// `Λ`. If it grows logarithmically the value at `Λ` is returned together with
/// the measured log slope.
pub fn keldysh_pairing(
    f: &CouplingProtocol,
    g: &CouplingProtocol,
    r: f64,
    field: &FieldParams,
    spec: &QuadratureSpec,
) -> Result<PairingEstimate, PairingError> {
    if !(r.is_finite() && r >= 0.0) {
        return Err(PairingError::InvalidSeparation(r));
    }
    if f.is_zero() || g.is_zero() {
        return Ok(PairingEstimate::zero());
    }
    let m = field.mass;
    if m == 0.0 && (f.has_plateau() || g.has_plateau()) {
        return Err(PairingError::IrDivergent);
    }
    let same = r == 0.0 && f == g;
    let integrand = |k: f64| -> f64 {
        let w = omega(k, m);
        if w == 0.0 {
            return 0.0;
        }
        let (Ok(a), Ok(b)) = (f.fourier_transform(w), g.fourier_transform(w)) else {
            return f64::NAN;
        };
        let spectral = if same {
            a.norm_sqr()
        } else {
            (a * b.conj()).re
        };
        k * k * sinc(k * r) * spectral / (2.0 * w) / (2.0 * PI * PI)
    };

    let span = phase_span(f, g, r);
    let period = 2.0 * PI / span.max(1e-300);
    let panel = period * spec.oscillatory_periods_per_panel;
    let cutoff = field.uv_cutoff;
    let mut points = vec![0.0];
    if m > 0.0 && m < cutoff {
        points.push(m.min(cutoff / 2.0));
    }
    let pieces = (cutoff / panel).ceil() as usize;
    for i in 1..pieces {
        let k = cutoff * i as f64 / pieces as f64;
        if k > *points.last().expect("nonempty") {
            points.push(k);
        }
    }
    points.push(cutoff);
    let body = adaptive_quad_points(integrand, &points, spec)?;

    let tail_spec = QuadratureSpec {
        abs_tol: spec.abs_tol.max(0.1 * spec.rel_tol * body.value.abs()),
        ..*spec
    };
    let slow = slowest_phase(f, g, r).max(span / 1e3);
    let tail_period = (2.0 * PI / slow).min(cutoff / 32.0).max(period);
    match oscillatory_tail_quad(integrand, cutoff, tail_period, &tail_spec)? {
        TailQuad::Converged(t) => Ok(PairingEstimate {
            value: body.value + t.value,
            abs_error: body.abs_error + t.abs_error,
            cutoff: CutoffBehaviour::Independent,
        }),
        TailQuad::Divergent(report) => Ok(PairingEstimate {
            value: body.value,
            abs_error: body.abs_error,
            cutoff: CutoffBehaviour::UvLogDivergent {
                cutoff,
                log_slope: report.log_slope,
            },
        }),
    }
}

/// `∫∫ f(t) G_R(t − t', r) g(t') dt dt'`: the response at `f` to `g`.
///
/// At `r = 0` the smearing radius of `field` is used instead and the result
/// carries its logarithmic sensitivity to that radius.
pub fn retarded_pairing(
    f: &CouplingProtocol,
    g: &CouplingProtocol,
    r: f64,
    field: &FieldParams,
    spec: &QuadratureSpec,
) -> Result<PairingEstimate, PairingError> {
    if !(r.is_finite() && r >= 0.0) {
        return Err(PairingError::InvalidSeparation(r));
    }
    if r > 0.0 {
        let est = retarded_at(f, g, r, field.mass, spec)?;
        return Ok(PairingEstimate {
            value: est.value,
            abs_error: est.abs_error,
            cutoff: CutoffBehaviour::Independent,
        });
    }
    let rs = field.smearing;
    let est = retarded_at(f, g, rs, field.mass, spec)?;
    let h: f64 = 0.05;
    let up = retarded_at(f, g, rs * h.exp(), field.mass, spec)?;
    let down = retarded_at(f, g, rs * (-h).exp(), field.mass, spec)?;
    Ok(PairingEstimate {
        value: est.value,
        abs_error: est.abs_error,
        cutoff: CutoffBehaviour::SmearingDependent {
            radius: rs,
            log_sensitivity: (up.value - down.value) / (2.0 * h),
        },
    })
}

fn retarded_at(
    f: &CouplingProtocol,
    g: &CouplingProtocol,
    r: f64,
    mass: f64,
    spec: &QuadratureSpec,
) -> Result<Estimate, PairingError> {
    let (Some((f_lo, f_hi)), Some((g_lo, g_hi))) = (f.support(), g.support()) else {
        return Ok(Estimate::default());
    };
    if f.has_plateau() && g.has_plateau() {
        return Err(PairingError::BothPlateaus);
    }
    // Both terms need t − t' ≥ r with t ≤ f_hi and t' ≥ g_lo.
    if f_hi <= g_lo + r {
        return Ok(Estimate::default());
    }

    let inner_spec = QuadratureSpec {
        rel_tol: 0.1 * spec.rel_tol,
        abs_tol: 0.1 * spec.abs_tol,
        ..*spec
    };

    // Light cone: (1/4πr) ∫ f(t) g(t − r) dt.
    let lo = f_lo.max(g_lo + r);
    let hi = f_hi.min(g_hi + r);
    let mut light = Estimate::default();
    if lo < hi {
        let pts = merged_points(lo, hi, &f.breakpoints(), &g.breakpoints(), r);
        let e = adaptive_quad_points(|t| f.evaluate(t) * g.evaluate(t - r), &pts, &inner_spec)?;
        let w = 1.0 / (4.0 * PI * r);
        light = Estimate::new(w * e.value, w * e.abs_error);
    }
    if mass == 0.0 {
        return Ok(light);
    }

    // Interior of the cone: ∫ dt f(t) ∫_{t' < t − r} dt' g(t') tail(t − t').
    let outer_lo = f_lo.max(g_lo + r);
    let g_points = g.breakpoints();
    let inner = |t: f64| -> Result<f64, QuadratureError> {
        inner_tail(g, &g_points, t, r, mass, &inner_spec)
    };
    let pts = merged_points(outer_lo, f_hi, &f.breakpoints(), &g_points, r);
    let failure = std::cell::RefCell::new(None);
    let tail = adaptive_quad_points(
        |t| {
            let fv = f.evaluate(t);
            if fv == 0.0 {
                return 0.0;
            }
            match inner(t) {
                Ok(v) => fv * v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            }
        },
        &pts,
        spec,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e.into());
    }
    Ok(light + tail)
}

/// `∫_{t' ≤ t − r} g(t') tail(t − t', r) dt'`, integrated in `s = √((t − t')² − r²)`
/// where the tail is smooth. A past plateau of `g` is folded in through the
/// closed-form integral of the tail.
fn inner_tail(
    g: &CouplingProtocol,
    g_points: &[f64],
    t: f64,
    r: f64,
    mass: f64,
    spec: &QuadratureSpec,
) -> Result<f64, QuadratureError> {
    let s_of = |tp: f64| {
        let tau = t - tp;
        ((tau - r) * (tau + r)).max(0.0).sqrt()
    };
    let integrand = |s: f64| {
        let tau = r.hypot(s);
        g.evaluate(t - tau) * retarded_tail_at_interval(s, mass) * s / tau
    };
    let first = g_points[0];
    let last = *g_points.last().expect("support implies breakpoints");
    // Range of t' inside the cone and inside [first, last].
    let tp_hi = (t - r).min(last);
    let mut value = 0.0;
    if first < tp_hi {
        let s_max = s_of(first);
        let s_min = s_of(tp_hi);
        let mut pts = vec![s_min];
        for &b in g_points.iter().rev() {
            if b > first && b < tp_hi {
                pts.push(s_of(b));
            }
        }
        pts.push(s_max);
        pts.dedup();
        if pts.len() >= 2 {
            value += adaptive_quad_points(integrand, &pts, spec)?.value;
        }
    }
    if g.has_plateau() {
        // λ⁰ ∫_{max(t − first, r)}^∞ tail(τ) dτ
        let tau0 = (t - first).max(r);
        let mut plateau = retarded_tail_integral(r, mass);
        let s0 = ((tau0 - r) * (tau0 + r)).sqrt();
        if s0 > 0.0 {
            let near = |s: f64| retarded_tail_at_interval(s, mass) * s / r.hypot(s);
            plateau -= adaptive_quad_points(near, &[0.0, s0], spec)?.value;
        }
        value += g.past_plateau() * plateau;
    }
    Ok(value)
}

fn merged_points(lo: f64, hi: f64, a: &[f64], b: &[f64], shift: f64) -> Vec<f64> {
    let mut pts = vec![lo, hi];
    pts.extend(a.iter().copied().filter(|&x| x > lo && x < hi));
    pts.extend(b.iter().map(|&x| x + shift).filter(|&x| x > lo && x < hi));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Pairing estimates for every requested functional, in canonical order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfluenceEvaluation {
    pub functional: InfluenceFunctional,
    pub estimates: Vec<(Functional, PairingEstimate)>,
}

impl InfluenceEvaluation {
    pub fn estimate(&self, which: Functional) -> Option<&PairingEstimate> {
        self.estimates
            .iter()
            .find(|(f, _)| *f == which)
            .map(|(_, e)| e)
    }
}

fn evaluate_one(
    which: Functional,
    setup: &ExperimentSetup,
    spec: &QuadratureSpec,
) -> Result<PairingEstimate, PairingError> {
    let (a, b, d, field) = (
        &setup.protocol_a,
        &setup.protocol_b,
        setup.separation,
        &setup.field,
    );
    Ok(match which {
        Functional::GammaA => keldysh_pairing(a, a, 0.0, field, spec)?.scaled(2.0),
        Functional::GammaB => keldysh_pairing(b, b, 0.0, field, spec)?.scaled(2.0),
        Functional::GammaAB => keldysh_pairing(a, b, d, field, spec)?.scaled(-2.0),
        Functional::GRetardedBB => retarded_pairing(b, b, 0.0, field, spec)?,
        Functional::ChiBarB => retarded_pairing(b, a, d, field, spec)?,
        Functional::MDecoh => retarded_pairing(a, b, d, field, spec)?.scaled(-2.0),
    })
}

/// Evaluates the requested functionals in parallel. Functionals that are not
/// requested stay at zero in the assembled [`InfluenceFunctional`].
pub fn evaluate_influence(
    setup: &ExperimentSetup,
    spec: &QuadratureSpec,
    requested: &[Functional],
) -> Result<InfluenceEvaluation, InfluenceError> {
    setup.validate()?;
    let mut wanted: Vec<Functional> = requested.to_vec();
    wanted.sort();
    wanted.dedup();
    let results: Vec<_> = wanted
        .par_iter()
        .map(|&which| {
            evaluate_one(which, setup, spec)
                .map(|e| (which, e))
                .map_err(|source| InfluenceError::Functional {
                    functional: which,
                    source,
                })
        })
        .collect();
    let mut functional = InfluenceFunctional::default();
    let mut estimates = Vec::with_capacity(wanted.len());
    for r in results {
        let (which, e) = r?;
        functional.set(which, e.value);
        estimates.push((which, e));
    }
    Ok(InfluenceEvaluation {
        functional,
        estimates,
    })
}

/// All six functionals.
pub fn compute_influence(
    setup: &ExperimentSetup,
    spec: &QuadratureSpec,
) -> Result<InfluenceFunctional, InfluenceError> {
    evaluate_influence(setup, spec, &Functional::ALL).map(|e| e.functional)
}

/// Branch labels of a pair of forward/backward histories in the r/a basis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeldyshBranchIndices {
    pub s_r: f64,
    pub s_a: f64,
    pub pi_r: f64,
    pub pi_a: f64,
}

impl KeldyshBranchIndices {
    /// From spins `s₁, s₂ ∈ {±1}` and meter momenta `Π₁, Π₂`.
    pub fn from_branches(s1: f64, s2: f64, pi1: f64, pi2: f64) -> Self {
        Self {
            s_r: 0.5 * (s1 + s2),
            s_a: s1 - s2,
            pi_r: 0.5 * (pi1 + pi2),
            pi_a: pi1 - pi2,
        }
    }
}

/// The exponent `iW` for one pair of branches.
///
/// There is no `a`–`a` term: the Green's function between two difference
/// currents vanishes.
#[allow(non_snake_case)]
pub fn iW_value(idx: &KeldyshBranchIndices, infl: &InfluenceFunctional) -> Complex64 {
    let KeldyshBranchIndices {
        s_r,
        s_a,
        pi_r,
        pi_a,
    } = *idx;
    let re = -(s_a * s_a / 4.0) * infl.gamma_a
        - (pi_a * pi_a / 4.0) * infl.gamma_b
        - (pi_a * s_a / 2.0) * infl.gamma_ab;
    let im =
        pi_a * pi_r * infl.g_r_bb - pi_a * s_r * infl.chi_bar_b + (pi_r * s_a / 2.0) * infl.m_decoh;
    Complex64::new(re, im)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

    fn field(m: f64, cutoff: f64) -> FieldParams {
        FieldParams::new(m, cutoff, 1e-2).unwrap()
    }

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    /// Ci(x) for large x from its asymptotic series.
    fn ci_large(x: f64) -> f64 {
        let (mut f, mut g) = (0.0, 0.0);
        let (mut tf, mut tg) = (1.0 / x, 1.0 / (x * x));
        for n in 0..8 {
            f += tf;
            g += tg;
            let k = 2.0 * n as f64;
            tf *= -(k + 1.0) * (k + 2.0) / (x * x);
            tg *= -(k + 2.0) * (k + 3.0) / (x * x);
        }
        f * x.sin() - g * x.cos()
    }

    #[test]
    fn zero_protocols_pair_to_zero() {
        let z = CouplingProtocol::zero();
        let a = CouplingProtocol::alice(1.0, 1.0).unwrap();
        let p = keldysh_pairing(&z, &z, 0.0, &field(1.0, 100.0), &spec()).unwrap();
        assert_eq!(p.value, 0.0);
        let p = retarded_pairing(&a, &z, 1.0, &field(1.0, 100.0), &spec()).unwrap();
        assert_eq!(p.value, 0.0);
    }

    #[test]
    fn massless_plateau_is_infrared_divergent() {
        let a = CouplingProtocol::alice(1.0, 1.0).unwrap();
        assert_eq!(
            keldysh_pairing(&a, &a, 0.0, &field(0.0, 100.0), &spec()),
            Err(PairingError::IrDivergent)
        );
    }

    #[test]
    fn sharp_rectangle_is_log_divergent() {
        let b = CouplingProtocol::bob(1.0, 2.0).unwrap();
        let cutoff = 1000.0;
        let p = keldysh_pairing(&b, &b, 0.0, &field(0.0, cutoff), &spec()).unwrap();
        let x = cutoff * 2.0;
        let want = (x.ln() + EULER_GAMMA - ci_large(x)) / (2.0 * PI * PI);
        assert!(
            (p.value - want).abs() < 1e-8 * want,
            "{} vs {want}",
            p.value
        );
        assert!((2.0 * p.value - 0.828_569_482_699_485).abs() < 1e-8);
        match p.cutoff {
            CutoffBehaviour::UvLogDivergent { log_slope, .. } => {
                let expected = 1.0 / (2.0 * PI * PI);
                assert!(
                    (log_slope - expected).abs() < 0.02 * expected,
                    "{log_slope}"
                );
            }
            other => panic!("expected a UV log divergence, got {other:?}"),
        }
    }

    #[test]
    fn smoothed_rectangle_converges() {
        let b = CouplingProtocol::bob_smoothed(1.0, 2.0, 0.2).unwrap();
        let lo = keldysh_pairing(&b, &b, 0.0, &field(1.0, 200.0), &spec()).unwrap();
        let hi = keldysh_pairing(&b, &b, 0.0, &field(1.0, 2000.0), &spec()).unwrap();
        assert_eq!(lo.cutoff, CutoffBehaviour::Independent);
        assert!((lo.value - hi.value).abs() < 1e-7 * hi.value);
    }

    #[test]
    fn alice_self_pairing_matches_radial_form() {
        // Γ_A = (1/2π²) ∫ dk k² · 2λ²(1 − cos ω t_A)/(t_A² ω⁵)
        let (l, ta, m) = (1.0, 2.0, 1.0);
        let a = CouplingProtocol::alice(l, ta).unwrap();
        let p = keldysh_pairing(&a, &a, 0.0, &field(m, 1e3), &spec()).unwrap();
        let radial = |k: f64| {
            let w = omega(k, m);
            k * k * 2.0 * l * l * (1.0 - (w * ta).cos()) / (ta * ta * w.powi(5)) / (2.0 * PI * PI)
        };
        let mut pts: Vec<f64> = (0..=4000).map(|i| i as f64 * 0.25).collect();
        pts.extend((1..=400).map(|i| 1000.0 * 1.05f64.powi(i)));
        let strict = QuadratureSpec {
            rel_tol: 1e-10,
            abs_tol: 1e-16,
            max_subdivisions: 100_000,
            ..spec()
        };
        let direct = adaptive_quad_points(radial, &pts, &strict).unwrap().value;
        // Beyond ~3·10¹¹ the remaining tail is below 1e-25.
        assert!(
            (2.0 * p.value - direct).abs() < 1e-8 * direct,
            "{} vs {direct}",
            2.0 * p.value
        );
        assert_eq!(p.cutoff, CutoffBehaviour::Independent);
    }

    #[test]
    fn retarded_pairing_light_cone_closed_forms() {
        let f0 = field(0.0, 1e3);
        // M = −2 · (1/4π) ∫₁² (1 − t/2) dt
        let a = CouplingProtocol::alice(1.0, 2.0).unwrap();
        let b = CouplingProtocol::bob(1.0, 2.0).unwrap();
        let p = retarded_pairing(&a, &b, 1.0, &f0, &spec()).unwrap();
        assert!((p.value - 0.25 / (4.0 * PI)).abs() < 1e-14);
        // Alice's plateau seen by Bob across the light cone.
        let (alpha, l, tb, d) = (0.7, 1.3, 1.5, 2.0);
        let a = CouplingProtocol::alice(l, 4.0).unwrap();
        let b = CouplingProtocol::bob(alpha, tb).unwrap();
        let chi = retarded_pairing(&b, &a, d, &f0, &spec()).unwrap();
        assert!((chi.value - alpha * l * tb / (4.0 * PI * d)).abs() < 1e-14);
    }

    #[test]
    fn retarded_support_is_structural() {
        let f1 = field(1.0, 1e3);
        let a = CouplingProtocol::alice(1.0, 0.5).unwrap();
        let b = CouplingProtocol::bob(1.0, 2.0).unwrap();
        assert_eq!(
            retarded_pairing(&a, &b, 1.0, &f1, &spec()).unwrap().value,
            0.0
        );
        // Exactly at the light cone the overlap has measure zero.
        let a = CouplingProtocol::alice(1.0, 1.0).unwrap();
        assert_eq!(
            retarded_pairing(&a, &b, 1.0, &f1, &spec()).unwrap().value,
            0.0
        );
    }

    #[test]
    fn both_plateaus_rejected() {
        let a = CouplingProtocol::alice(1.0, 1.0).unwrap();
        assert_eq!(
            retarded_pairing(&a, &a, 1.0, &field(1.0, 1e3), &spec()),
            Err(PairingError::BothPlateaus)
        );
    }

    #[test]
    fn massive_tail_against_direct_double_integral() {
        // Bob responding to a rectangle source, massive field; brute force in (t, t').
        let m = 1.3;
        let f = CouplingProtocol::bob(1.0, 3.0).unwrap();
        let g = CouplingProtocol::new(
            vec![crate::protocols::Segment::linear(-1.0, 0.5, 0.2, 0.9)],
            0.0,
            None,
        )
        .unwrap();
        let r = 0.8;
        let got = retarded_pairing(&f, &g, r, &field(m, 1e3), &spec())
            .unwrap()
            .value;
        let rule = crate::numerics::gauss_legendre(40);
        let n = 200;
        let mut tail = 0.0;
        for i in 0..n {
            let (a, b) = (3.0 * i as f64 / n as f64, 3.0 * (i + 1) as f64 / n as f64);
            tail += rule.integrate(a, b, |t| {
                let hi = (t - r).min(0.5);
                if hi <= -1.0 {
                    return 0.0;
                }
                // substitute t' = t − √(r² + s²) to smooth the cone edge
                let smax = ((t + 1.0).powi(2) - r * r).sqrt();
                let smin = ((t - hi).powi(2) - r * r).max(0.0).sqrt();
                let mut acc = 0.0;
                let m_pieces = 20;
                for j in 0..m_pieces {
                    let lo_s = smin + (smax - smin) * j as f64 / m_pieces as f64;
                    let hi_s = smin + (smax - smin) * (j + 1) as f64 / m_pieces as f64;
                    acc += rule.integrate(lo_s, hi_s, |s| {
                        let tau = r.hypot(s);
                        g.evaluate(t - tau) * crate::greens::retarded_tail_at_interval(s, m) * s
                            / tau
                    });
                }
                f.evaluate(t) * acc
            });
        }
        let light =
            rule.integrate(0.0, 0.5 + r, |t| f.evaluate(t) * g.evaluate(t - r)) / (4.0 * PI * r);
        let want = light + tail;
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }

    #[test]
    fn self_pairing_uses_smearing() {
        let b = CouplingProtocol::bob(1.0, 1.0).unwrap();
        let f = FieldParams::new(1.0, 1e3, 1e-2).unwrap();
        let p = retarded_pairing(&b, &b, 0.0, &f, &spec()).unwrap();
        // Light cone dominates: ≈ (t_B − r_s)/(4π r_s).
        assert!((p.value - (1.0 - 1e-2) / (4.0 * PI * 1e-2)).abs() < 0.1);
        match p.cutoff {
            CutoffBehaviour::SmearingDependent {
                radius,
                log_sensitivity,
            } => {
                assert_eq!(radius, 1e-2);
                assert!((log_sensitivity + 1.0 / (4.0 * PI * 1e-2)).abs() < 0.1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn meter_off_leaves_only_gamma_a() {
        let setup = ExperimentSetup {
            protocol_a: CouplingProtocol::alice(1.0, 2.0).unwrap(),
            protocol_b: CouplingProtocol::zero(),
            separation: 1.0,
            field: FieldParams::with_defaults(1.0, 1.0, 1.0).unwrap(),
            meter_epsilon2: 1.0,
        };
        let infl = compute_influence(&setup, &spec()).unwrap();
        assert!(infl.gamma_a > 0.0);
        assert_eq!(infl.gamma_b, 0.0);
        assert_eq!(infl.gamma_ab, 0.0);
        assert_eq!(infl.g_r_bb, 0.0);
        assert_eq!(infl.chi_bar_b, 0.0);
        assert_eq!(infl.m_decoh, 0.0);
    }

    #[test]
    fn errors_name_the_functional() {
        let setup = ExperimentSetup {
            protocol_a: CouplingProtocol::alice(1.0, 2.0).unwrap(),
            protocol_b: CouplingProtocol::bob(1.0, 1.0).unwrap(),
            separation: 3.0,
            field: FieldParams::with_defaults(0.0, 1.0, 3.0).unwrap(),
            meter_epsilon2: 1.0,
        };
        let err = compute_influence(&setup, &spec()).unwrap_err();
        assert_eq!(err.functional(), Some(Functional::GammaA));
        assert!(err.to_string().starts_with("gamma_A: infrared divergence"));
        // Without Alice's Keldysh pairings the massless setup is fine.
        let ok = evaluate_influence(
            &setup,
            &spec(),
            &[Functional::GammaB, Functional::ChiBarB, Functional::MDecoh],
        )
        .unwrap();
        assert_eq!(ok.functional.m_decoh, 0.0);
    }

    #[test]
    fn iw_examples() {
        let infl = InfluenceFunctional {
            gamma_a: 0.3,
            gamma_b: 0.7,
            gamma_ab: -0.1,
            g_r_bb: 2.0,
            chi_bar_b: 0.4,
            m_decoh: -0.05,
        };
        let diag = KeldyshBranchIndices::from_branches(1.0, 1.0, 0.6, 0.6);
        assert_eq!(iW_value(&diag, &infl), Complex64::new(0.0, 0.0));
        let pi_r = 1.7;
        let idx = KeldyshBranchIndices::from_branches(1.0, -1.0, pi_r, pi_r);
        let got = iW_value(&idx, &infl);
        assert!((got - Complex64::new(-infl.gamma_a, pi_r * infl.m_decoh)).norm() < 1e-15);
        let zero = InfluenceFunctional::default();
        assert_eq!(iW_value(&idx, &zero), Complex64::new(0.0, 0.0));
    }

    /// Γ_A, Γ_B and Γ_AB of one physical setup, which form a positive
    /// semidefinite quadratic form.
    fn keldysh_block() -> InfluenceFunctional {
        static BLOCK: std::sync::OnceLock<InfluenceFunctional> = std::sync::OnceLock::new();
        *BLOCK.get_or_init(|| {
            let setup = ExperimentSetup {
                protocol_a: CouplingProtocol::alice(1.0, 1.5).unwrap(),
                protocol_b: CouplingProtocol::bob_smoothed(0.8, 1.0, 0.2).unwrap(),
                separation: 0.7,
                field: FieldParams::new(1.0, 200.0, 1e-2).unwrap(),
                meter_epsilon2: 1.0,
            };
            let wanted = [Functional::GammaA, Functional::GammaB, Functional::GammaAB];
            evaluate_influence(&setup, &QuadratureSpec::default(), &wanted)
                .unwrap()
                .functional
        })
    }

    proptest! {
        #[test]
        fn iw_branch_hermiticity(
            s1 in prop::bool::ANY, s2 in prop::bool::ANY,
            p1 in -5.0f64..5.0, p2 in -5.0f64..5.0,
            v in prop::array::uniform6(-3.0f64..3.0),
        ) {
            let s = |b: bool| if b { 1.0 } else { -1.0 };
            let infl = InfluenceFunctional {
                gamma_a: v[0].abs(), gamma_b: v[1].abs(), gamma_ab: v[2],
                g_r_bb: v[3], chi_bar_b: v[4], m_decoh: v[5],
            };
            let fwd = KeldyshBranchIndices::from_branches(s(s1), s(s2), p1, p2);
            let bwd = KeldyshBranchIndices::from_branches(s(s2), s(s1), p2, p1);
            prop_assert!(fwd.s_r.abs() <= 1.0 && [-2.0, 0.0, 2.0].contains(&fwd.s_a));
            let a = iW_value(&fwd, &infl);
            let b = iW_value(&bwd, &infl).conj();
            prop_assert!((a - b).norm() <= 1e-12 * (1.0 + a.norm()));
        }

        #[test]
        fn decoherence_exponent_is_non_positive(
            s1 in prop::bool::ANY, s2 in prop::bool::ANY, p1 in -5.0f64..5.0, p2 in -5.0f64..5.0,
        ) {
            let infl = keldysh_block();
            let s = |b: bool| if b { 1.0 } else { -1.0 };
            let idx = KeldyshBranchIndices::from_branches(s(s1), s(s2), p1, p2);
            prop_assert!(iW_value(&idx, &infl).re <= 1e-12);
        }
    }

    #[test]
    fn keldysh_pairing_is_symmetric() {
        let a = CouplingProtocol::alice(1.0, 1.5).unwrap();
        let b = CouplingProtocol::bob(0.6, 1.0).unwrap();
        let f = field(1.0, 300.0);
        let ab = keldysh_pairing(&a, &b, 0.9, &f, &spec()).unwrap();
        let ba = keldysh_pairing(&b, &a, 0.9, &f, &spec()).unwrap();
        assert!((ab.value - ba.value).abs() < 1e-10 * ab.value.abs().max(1e-12));
    }
}
