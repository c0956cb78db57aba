//! Brute-force counterparts of the closed forms.
//!
//! Nothing here shares code paths with [`crate::influence`] or
//! [`crate::observables`] beyond the protocol definitions and fixed-order
//! Gauss–Legendre rules. Propagators are rebuilt as explicit radial mode sums
//! on a [`MomentumLattice`], couplings are Fourier transformed by direct time
//! quadrature, and the Gaussian meter integrals are done numerically instead
//! of by completing the square. Everything is slow on purpose and uses no
//! series acceleration.
//!
//! Past plateaus are damped by `e^{η(t − t₀)}` and the damping is removed by
//! polynomial extrapolation over [`PLATEAU_DAMPINGS`]. Retarded mode sums,
//! whose light-cone delta makes the momentum integral only conditionally
//! convergent, are regulated by `e^{−k²/2K²}` and Richardson-extrapolated in
//! `1/K`.
//!
//! ```
//! use ctpdual::influence::InfluenceFunctional;
//! use ctpdual::oracle::pi_integral_overlap;
//!
//! let infl = InfluenceFunctional { gamma_a: 0.3, m_decoh: 1.0, ..Default::default() };
//! let v = pi_integral_overlap(&infl, 0.5, 128).unwrap();
//! assert!((v.re - 0.449_328_964_117_222).abs() < 1e-12);
//! ```

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::greens::{omega, retarded_tail, FieldParams};
use crate::influence::InfluenceFunctional;
use crate::numerics::{gauss_legendre, sinc, GaussLegendre};
use crate::protocols::CouplingProtocol;

/// Plateau dampings extrapolated to zero.
pub const PLATEAU_DAMPINGS: [f64; 3] = [1e-5, 1e-6, 1e-7];

/// Time quadrature order per panel.
const TIME_NODES: usize = 16;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum OracleError {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error(
        "lattice k_max = {k_max} does not resolve the problem scales (needs at least {required})"
    )]
    UnresolvedScale { k_max: f64, required: f64 },
    #[error("distance must be positive for a retarded mode sum, got {0}")]
    InvalidSeparation(f64),
    #[error("both couplings have a past plateau")]
    BothPlateaus,
    #[error("a past plateau in a massless Keldysh pairing is infrared divergent")]
    IrDivergent,
    #[error("{0} is not supported by the direct double-time oracle")]
    Unsupported(&'static str),
    #[error("at least {min} nodes are required, got {got}")]
    TooFewNodes { got: usize, min: usize },
    #[error("meter variance must be positive, got {0}")]
    NonPositiveVariance(f64),
    #[error("moment order must be 0, 1 or 2, got {0}")]
    InvalidOrder(u8),
    #[error("spin must be +1 or -1, got {0}")]
    InvalidSpin(f64),
}

/// Radial momentum grid: `n_shells` equal shells on `[0, k_max]`, each with a
/// Gauss–Legendre rule of `nodes_per_shell` points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentumLattice {
    pub k_max: f64,
    pub n_shells: usize,
    pub nodes_per_shell: usize,
}

impl MomentumLattice {
    pub const MIN_SHELLS: usize = 64;

    pub fn new(k_max: f64, n_shells: usize, nodes_per_shell: usize) -> Result<Self, OracleError> {
        let lattice = Self {
            k_max,
            n_shells,
            nodes_per_shell,
        };
        lattice.validate()?;
        Ok(lattice)
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        if !(self.k_max.is_finite() && self.k_max > 0.0) {
            return Err(OracleError::InvalidLattice(format!(
                "k_max must be positive and finite, got {}",
                self.k_max
            )));
        }
        if self.n_shells < Self::MIN_SHELLS {
            return Err(OracleError::InvalidLattice(format!(
                "n_shells must be at least {}, got {}",
                Self::MIN_SHELLS,
                self.n_shells
            )));
        }
        if self.nodes_per_shell == 0 {
            return Err(OracleError::InvalidLattice(
                "nodes_per_shell must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Enough shells that none spans more than one oscillation at phase rate
    /// `rate`, with `nodes_per_shell` nodes each.
    pub fn resolving(k_max: f64, rate: f64, nodes_per_shell: usize) -> Self {
        let shells = (k_max * rate / (2.0 * PI)).ceil() as usize;
        Self {
            k_max,
            n_shells: shells.max(Self::MIN_SHELLS),
            nodes_per_shell,
        }
    }

    /// Same grid with twice as many shells.
    pub fn refined(&self) -> Self {
        Self {
            n_shells: 2 * self.n_shells,
            ..*self
        }
    }

    /// `(k, weight)` in increasing `k`.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        let rule = gauss_legendre(self.nodes_per_shell);
        let width = self.k_max / self.n_shells as f64;
        (0..self.n_shells)
            .flat_map(|i| {
                let a = i as f64 * width;
                rule.mapped(a, a + width).collect::<Vec<_>>()
            })
            .collect()
    }
}

/// Which propagator the lattice pairing rebuilds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairingKind {
    Keldysh,
    Retarded,
}

/// Lattice result at the finest of three shell doublings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeEstimate {
    pub value: f64,
    /// Change over the last doubling.
    pub refinement_error: f64,
    /// `log₂` of the ratio of successive changes; `None` once both changes
    /// sit at rounding level.
    pub observed_order: Option<f64>,
    pub n_shells: usize,
}

/// Smallest `k_max` that resolves both couplings: twenty times the largest
/// of the mass and the inverse durations.
pub fn required_k_max(f: &CouplingProtocol, g: &CouplingProtocol, mass: f64) -> f64 {
    let mut rate = mass;
    for p in [f, g] {
        let b = p.breakpoints();
        if let (Some(lo), Some(hi)) = (b.first(), b.last()) {
            if hi > lo {
                rate = rate.max(1.0 / (hi - lo));
            }
        }
    }
    20.0 * rate
}

/// `∫∫ f(t) G(t − t', r) g(t') dt dt'` with `G` the Keldysh or retarded
/// propagator written as an explicit sum over the lattice modes.
///
/// Keldysh pairings use the lattice as a sharp cutoff at `k_max`, which
/// matches a mode integral truncated at `Λ` when `k_max = Λ`. Retarded
/// pairings need `r > 0` (pass the smearing radius for a self-pairing).
pub fn lattice_pairing(
    kind: PairingKind,
    f: &CouplingProtocol,
    g: &CouplingProtocol,
    r: f64,
    field: &FieldParams,
    lattice: &MomentumLattice,
) -> Result<LatticeEstimate, OracleError> {
    lattice.validate()?;
    let mass = field.mass;
    let required = required_k_max(f, g, mass);
    if lattice.k_max < required {
        return Err(OracleError::UnresolvedScale {
            k_max: lattice.k_max,
            required,
        });
    }
    match kind {
        PairingKind::Keldysh => {
            if !(r.is_finite() && r >= 0.0) {
                return Err(OracleError::InvalidSeparation(r));
            }
            if mass == 0.0 && (f.has_plateau() || g.has_plateau()) {
                return Err(OracleError::IrDivergent);
            }
        }
        PairingKind::Retarded => {
            if !(r.is_finite() && r > 0.0) {
                return Err(OracleError::InvalidSeparation(r));
            }
            if f.has_plateau() && g.has_plateau() {
                return Err(OracleError::BothPlateaus);
            }
        }
    }
    if f.is_zero() || g.is_zero() {
        return Ok(LatticeEstimate {
            value: 0.0,
            refinement_error: 0.0,
            observed_order: None,
            n_shells: 4 * lattice.n_shells,
        });
    }
    let mut values = [0.0; 3];
    let mut level = *lattice;
    for v in values.iter_mut() {
        *v = match kind {
            PairingKind::Keldysh => keldysh_sum(f, g, r, mass, &level),
            PairingKind::Retarded => retarded_sum(f, g, r, mass, &level),
        };
        level = level.refined();
    }
    let d1 = (values[1] - values[0]).abs();
    let d2 = (values[2] - values[1]).abs();
    let floor = 1e-14 * values[2].abs().max(f64::MIN_POSITIVE);
    let observed_order = (d1 > floor && d2 > floor).then(|| (d1 / d2).log2());
    Ok(LatticeEstimate {
        value: values[2],
        refinement_error: d2,
        observed_order,
        n_shells: 4 * lattice.n_shells,
    })
}

/// Lagrange extrapolation of `values[j]` at `PLATEAU_DAMPINGS[j]` to zero damping.
fn extrapolate_damping(values: [f64; 3]) -> f64 {
    let eta = PLATEAU_DAMPINGS;
    let mut out = 0.0;
    for j in 0..3 {
        let mut c = 1.0;
        for i in 0..3 {
            if i != j {
                c *= eta[i] / (eta[i] - eta[j]);
            }
        }
        out += c * values[j];
    }
    out
}

/// Breakpoints of `[lo, hi]` and every interior point of `extra`, with each
/// interval split so that no panel spans more than two periods at `rate`.
fn panel_edges(lo: f64, hi: f64, extra: &[f64], rate: f64, max_width: f64) -> Vec<f64> {
    let mut pts: Vec<f64> = extra
        .iter()
        .copied()
        .filter(|&t| t > lo && t < hi)
        .collect();
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let width = if rate > 0.0 {
        (4.0 * PI / rate).min(max_width)
    } else {
        max_width
    };
    let mut edges = vec![lo];
    for w in pts.windows(2) {
        let n = ((w[1] - w[0]) / width).ceil().max(1.0) as usize;
        let step = (w[1] - w[0]) / n as f64;
        for i in 1..n {
            edges.push(w[0] + i as f64 * step);
        }
        edges.push(w[1]);
    }
    edges
}

/// `∫ f(t) e^{iωt} dt` by composite quadrature, with the damped plateau done
/// in closed form for each damping.
fn time_transform(p: &CouplingProtocol, w: f64, rule: &GaussLegendre) -> [Complex64; 3] {
    let b = p.breakpoints();
    let (lo, hi) = (b[0], b[b.len() - 1]);
    let mut finite = Complex64::default();
    for panel in panel_edges(lo, hi, &b, w, f64::INFINITY).windows(2) {
        finite += rule.integrate(panel[0], panel[1], |t| {
            Complex64::from_polar(p.evaluate(t), w * t)
        });
    }
    let mut out = [finite; 3];
    if p.has_plateau() {
        for (o, eta) in out.iter_mut().zip(PLATEAU_DAMPINGS) {
            *o += p.past_plateau() * Complex64::from_polar(1.0, w * lo) / Complex64::new(eta, w);
        }
    }
    out
}

fn keldysh_sum(
    f: &CouplingProtocol,
    g: &CouplingProtocol,
    r: f64,
    mass: f64,
    lattice: &MomentumLattice,
) -> f64 {
    let rule = gauss_legendre(TIME_NODES);
    let terms: Vec<[f64; 3]> = lattice
        .nodes()
        .par_iter()
        .map(|&(k, wk)| {
            let w = omega(k, mass);
            let ff = time_transform(f, w, &rule);
            let gg = time_transform(g, w, &rule);
            let pre = wk * k * k * sinc(k * r) / (2.0 * w) / (2.0 * PI * PI);
            std::array::from_fn(|j| pre * (ff[j] * gg[j].conj()).re)
        })
        .collect();
    let mut acc = [0.0; 3];
    for t in &terms {
        for j in 0..3 {
            acc[j] += t[j];
        }
    }
    if f.has_plateau() || g.has_plateau() {
        extrapolate_damping(acc)
    } else {
        acc[0]
    }
}

/// `∫∫_{t > t'} f(t) g(t') sin(ω(t − t')) dt dt'` for each plateau damping,
/// by a single sweep in `t` that carries `∫_{−∞}^t g(t') e^{−iωt'} dt'` along.
fn ordered_time_integral(
    f: &CouplingProtocol,
    g: &CouplingProtocol,
    w: f64,
    rule: &GaussLegendre,
) -> [f64; 3] {
    let bf = f.breakpoints();
    let bg = g.breakpoints();
    let g0 = bg[0];
    let start = if g.has_plateau() { bf[0].min(g0) } else { g0 };
    let end = bf[bf.len() - 1];
    if end <= start {
        return [0.0; 3];
    }
    let lambda = g.past_plateau();
    let plateau_c = |t: f64, eta: f64| {
        lambda * (eta * (t - g0)).exp() * Complex64::from_polar(1.0, -w * t)
            / Complex64::new(eta, -w)
    };
    let mut breaks = bf.clone();
    breaks.extend_from_slice(&bg);
    let edges = panel_edges(start, end, &breaks, w, f64::INFINITY);

    let mut carry: [Complex64; 3] = if g.has_plateau() {
        std::array::from_fn(|j| plateau_c(start, PLATEAU_DAMPINGS[j]))
    } else {
        [Complex64::default(); 3]
    };
    let mut outer = [Complex64::default(); 3];
    let g_phase = |t: f64| Complex64::from_polar(g.evaluate(t), -w * t);
    let g_end = bg[bg.len() - 1];
    for panel in edges.windows(2) {
        let (a, b) = (panel[0], panel[1]);
        let in_plateau = g.has_plateau() && b <= g0;
        // Past the end of g the carried integral is constant.
        let settled = a >= g_end;
        for (t, wt) in rule.mapped(a, b) {
            let ft = Complex64::from_polar(f.evaluate(t), w * t) * wt;
            if in_plateau {
                for j in 0..3 {
                    outer[j] += ft * plateau_c(t, PLATEAU_DAMPINGS[j]);
                }
            } else if settled {
                for j in 0..3 {
                    outer[j] += ft * carry[j];
                }
            } else {
                let partial: Complex64 = rule.integrate(a, t, g_phase);
                for j in 0..3 {
                    outer[j] += ft * (carry[j] + partial);
                }
            }
        }
        if in_plateau {
            carry = std::array::from_fn(|j| plateau_c(b, PLATEAU_DAMPINGS[j]));
        } else if !settled {
            let full: Complex64 = rule.integrate(a, b, g_phase);
            for c in carry.iter_mut() {
                *c += full;
            }
        }
    }
    std::array::from_fn(|j| outer[j].im)
}

fn retarded_sum(
    f: &CouplingProtocol,
    g: &CouplingProtocol,
    r: f64,
    mass: f64,
    lattice: &MomentumLattice,
) -> f64 {
    let rule = gauss_legendre(TIME_NODES);
    let k0 = lattice.k_max / 8.0;
    let regulators = [k0, k0 / 2.0, k0 / 4.0];
    let terms: Vec<[[f64; 3]; 3]> = lattice
        .nodes()
        .par_iter()
        .map(|&(k, wk)| {
            let w = omega(k, mass);
            let inner = ordered_time_integral(f, g, w, &rule);
            let pre = wk * k * k * sinc(k * r) / w / (2.0 * PI * PI);
            std::array::from_fn(|l| {
                let reg = (-0.5 * (k / regulators[l]).powi(2)).exp();
                std::array::from_fn(|j| pre * reg * inner[j])
            })
        })
        .collect();
    let mut acc = [[0.0; 3]; 3];
    for t in &terms {
        for l in 0..3 {
            for j in 0..3 {
                acc[l][j] += t[l][j];
            }
        }
    }
    let per_regulator: [f64; 3] = std::array::from_fn(|l| {
        if g.has_plateau() {
            extrapolate_damping(acc[l])
        } else {
            acc[l][0]
        }
    });
    // Error terms in 1/K and 1/K².
    (8.0 * per_regulator[0] - 6.0 * per_regulator[1] + per_regulator[2]) / 3.0
}

/// Pointwise propagators rebuilt from regulated mode sums.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSumPropagators {
    pub retarded: f64,
    pub advanced: f64,
    pub keldysh: f64,
    pub feynman: Complex64,
}

/// Mode sums `(1/2π²r) Σ k sin(kr) (…) e^{−k²/2K²}` of the commutator,
/// Keldysh and time-ordered functions at `(dt, r)`.
///
/// The regulator `K` smears the spatial argument over a Gaussian of width
/// `1/K`, so results converge to the propagators wherever `K·|r − |dt||` is large.
pub fn mode_sum_propagators(
    dt: f64,
    r: f64,
    mass: f64,
    regulator: f64,
    lattice: &MomentumLattice,
) -> Result<ModeSumPropagators, OracleError> {
    lattice.validate()?;
    if !(r.is_finite() && r > 0.0) {
        return Err(OracleError::InvalidSeparation(r));
    }
    let mut commutator = 0.0;
    let mut keldysh = 0.0;
    let mut feynman = Complex64::default();
    for (k, wk) in lattice.nodes() {
        let w = omega(k, mass);
        let radial = wk * k * (k * r).sin() * (-0.5 * (k / regulator).powi(2)).exp();
        commutator += radial * (w * dt).sin() / w;
        keldysh += radial * (w * dt).cos() / (2.0 * w);
        feynman += radial * Complex64::from_polar(1.0, -w * dt.abs()) / (2.0 * w);
    }
    let norm = 1.0 / (2.0 * PI * PI * r);
    let c = norm * commutator;
    Ok(ModeSumPropagators {
        retarded: if dt > 0.0 { c } else { 0.0 },
        advanced: if dt < 0.0 { -c } else { 0.0 },
        keldysh: norm * keldysh,
        feynman: norm * feynman,
    })
}

/// Regulator width for pointwise sums at `(dt, r)`: large against the
/// distance to the light cone and against the mass and `1/r`.
pub fn pointwise_regulator(dt: f64, r: f64, mass: f64) -> f64 {
    let gap = (r - dt.abs()).abs();
    (8.0 / gap).max(200.0 * mass.max(1.0 / r))
}

/// The retarded propagator at a point off the light cone, from two regulated
/// mode sums combined to cancel the `1/K²` smearing error.
pub fn mode_sum_retarded(dt: f64, r: f64, mass: f64) -> Result<f64, OracleError> {
    let k = pointwise_regulator(dt, r, mass);
    let lattice = MomentumLattice::resolving(16.0 * k, r + dt.abs(), 16);
    let coarse = mode_sum_propagators(dt, r, mass, k, &lattice)?.retarded;
    let fine = mode_sum_propagators(dt, r, mass, 2.0 * k, &lattice)?.retarded;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Causal-cancellation residual `|Σ (commutator)|` at a spacelike point under
/// successive shell doublings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementStudy {
    pub n_shells: Vec<usize>,
    pub residuals: Vec<f64>,
}

impl RefinementStudy {
    /// `log₂` of successive residual ratios.
    pub fn observed_orders(&self) -> Vec<f64> {
        self.residuals
            .windows(2)
            .map(|w| (w[0] / w[1]).log2())
            .collect()
    }

    /// Every doubling at least halves the residual, or both residuals are
    /// already below `floor`.
    pub fn at_least_linear(&self, floor: f64) -> bool {
        self.residuals
            .windows(2)
            .all(|w| w[1] <= 0.5 * w[0] || w[1].max(w[0]) <= floor)
    }
}

pub fn causal_refinement_study(
    dt: f64,
    r: f64,
    mass: f64,
    regulator: f64,
    base: &MomentumLattice,
    levels: usize,
) -> Result<RefinementStudy, OracleError> {
    let mut lattice = *base;
    let mut study = RefinementStudy {
        n_shells: Vec::with_capacity(levels),
        residuals: Vec::with_capacity(levels),
    };
    for _ in 0..levels {
        let p = mode_sum_propagators(dt.abs(), r, mass, regulator, &lattice)?;
        study.n_shells.push(lattice.n_shells);
        study.residuals.push(p.retarded.abs());
        lattice = lattice.refined();
    }
    Ok(study)
}

/// `∫∫ f(t) G_R(t − t', r) g(t') dt dt'` by nested fixed-order quadrature in
/// time, with the light-cone delta integrated out by hand.
///
/// `max_panel` bounds the panel length of the composite rules. A massive
/// field with a past plateau in `g` is not supported: the Bessel tail would
/// then have to be integrated over an infinite past.
pub fn direct_retarded_pairing(
    f: &CouplingProtocol,
    g: &CouplingProtocol,
    r: f64,
    mass: f64,
    max_panel: f64,
) -> Result<f64, OracleError> {
    if !(r.is_finite() && r > 0.0) {
        return Err(OracleError::InvalidSeparation(r));
    }
    if f.has_plateau() && g.has_plateau() {
        return Err(OracleError::BothPlateaus);
    }
    if mass > 0.0 && g.has_plateau() {
        return Err(OracleError::Unsupported(
            "a massive tail against a past plateau",
        ));
    }
    let (Some((f_lo, f_hi)), Some((g_lo, g_hi))) = (f.support(), g.support()) else {
        return Ok(0.0);
    };
    let rule = gauss_legendre(TIME_NODES);
    let bf = f.breakpoints();
    let bg = g.breakpoints();
    let mut breaks = bf.clone();
    breaks.extend(bg.iter().map(|t| t + r));
    let rate = mass;

    let mut total = 0.0;
    let (lo, hi) = (f_lo.max(g_lo + r), f_hi.min(g_hi + r));
    if hi > lo {
        for p in panel_edges(lo, hi, &breaks, 0.0, max_panel).windows(2) {
            total += rule.integrate(p[0], p[1], |t| f.evaluate(t) * g.evaluate(t - r));
        }
        total /= 4.0 * PI * r;
    }
    if mass > 0.0 {
        let lo = f_lo.max(g_lo + r);
        if f_hi > lo {
            for p in panel_edges(lo, f_hi, &breaks, rate, max_panel).windows(2) {
                total += rule.integrate(p[0], p[1], |t| {
                    let upper = g_hi.min(t - r);
                    if upper <= g_lo {
                        return 0.0;
                    }
                    let mut inner = 0.0;
                    for q in panel_edges(g_lo, upper, &bg, rate, max_panel).windows(2) {
                        inner += rule.integrate(q[0], q[1], |s| {
                            g.evaluate(s) * retarded_tail(t - s, r, mass)
                        });
                    }
                    f.evaluate(t) * inner
                });
            }
        }
    }
    Ok(total)
}

/// Composite Gauss–Legendre nodes on `[−half, half]` in panels of 32.
fn symmetric_nodes(half: f64, panels: usize, rule: &GaussLegendre) -> Vec<(f64, f64)> {
    let width = 2.0 * half / panels as f64;
    (0..panels)
        .flat_map(|i| {
            let a = -half + i as f64 * width;
            rule.mapped(a, a + width).collect::<Vec<_>>()
        })
        .collect()
}

fn check_variance(eps2: f64) -> Result<(), OracleError> {
    if eps2.is_finite() && eps2 > 0.0 {
        Ok(())
    } else {
        Err(OracleError::NonPositiveVariance(eps2))
    }
}

/// `√(ε²/π) ∫ dΠ_r exp(−ε²Π_r² − Γ_A + iΠ_r M)` on `n_nodes` points.
pub fn pi_integral_overlap(
    infl: &InfluenceFunctional,
    eps2: f64,
    n_nodes: usize,
) -> Result<Complex64, OracleError> {
    const MIN_NODES: usize = 128;
    if n_nodes < MIN_NODES {
        return Err(OracleError::TooFewNodes {
            got: n_nodes,
            min: MIN_NODES,
        });
    }
    check_variance(eps2)?;
    let rule = gauss_legendre(32);
    let half = (46.0 / eps2).sqrt();
    let mut acc = Complex64::default();
    for (p, w) in symmetric_nodes(half, n_nodes.div_ceil(32), &rule) {
        acc += w * Complex64::from_polar((-eps2 * p * p - infl.gamma_a).exp(), p * infl.m_decoh);
    }
    Ok((eps2 / PI).sqrt() * acc)
}

/// Meter-reading density `P^±(χ)` rebuilt from the double momentum integral
/// over `(Π_r, Π_a)`. The `Π_r` integral is done once per `Π_a` node.
struct MeterDensity {
    /// `(Π_a, weight·exp(−(ε² + Γ_B)Π_a²/4), ∫dΠ_r …)`.
    q: Vec<(f64, f64, Complex64)>,
    prefactor: f64,
    /// `±χ̄_B`.
    offset: f64,
    /// Half-width of the `χ ∓ χ̄_B` range outside which `P` is negligible.
    half_width: f64,
}

impl MeterDensity {
    fn new(infl: &InfluenceFunctional, eps2: f64, spin: f64) -> Result<Self, OracleError> {
        check_variance(eps2)?;
        if spin != 1.0 && spin != -1.0 {
            return Err(OracleError::InvalidSpin(spin));
        }
        let rule = gauss_legendre(32);
        let g = infl.g_r_bb;
        let gb = infl.gamma_b;
        // The Π_r integral decays like exp(−G²Π_a²/4ε²) in Π_a.
        let decay = (eps2 + gb + g * g / eps2) / 4.0;
        let half_a = (46.0 / decay).sqrt();
        let half_r = (46.0 / eps2).sqrt();
        let half_width = 12.0 * (g * g / eps2 + gb + eps2).sqrt();

        let a_panels = ((2.0 * half_width * half_a / 8.0).ceil() as usize).max(8);
        let q = symmetric_nodes(half_a, a_panels, &rule)
            .par_iter()
            .map(|&(pa, wa)| {
                let panels = ((pa.abs() * g.abs() * half_r / 8.0).ceil() as usize).max(8);
                let mut acc = Complex64::default();
                for (pr, wr) in symmetric_nodes(half_r, panels, &rule) {
                    acc += wr * Complex64::from_polar((-eps2 * pr * pr).exp(), pa * pr * g);
                }
                (pa, wa * (-(eps2 + gb) * pa * pa / 4.0).exp(), acc)
            })
            .collect();
        Ok(Self {
            q,
            prefactor: (eps2 / PI).sqrt() / (2.0 * PI),
            offset: spin * infl.chi_bar_b,
            half_width,
        })
    }

    /// `P` at `χ = x ± χ̄_B`.
    fn at(&self, x: f64) -> f64 {
        let mut acc = Complex64::default();
        for &(pa, wa, qa) in &self.q {
            acc += wa * qa * Complex64::from_polar(1.0, x * pa);
        }
        self.prefactor * acc.re
    }

    /// `∫ h(x) P dx` over `x ∈ [lo, hi]`, in the shifted variable.
    fn integrate(&self, lo: f64, hi: f64, h: impl Fn(f64) -> f64 + Sync) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        let rule = gauss_legendre(32);
        let panels = 32;
        let width = (hi - lo) / panels as f64;
        let nodes: Vec<(f64, f64)> = (0..panels)
            .flat_map(|i| {
                let a = lo + i as f64 * width;
                rule.mapped(a, a + width).collect::<Vec<_>>()
            })
            .collect();
        let terms: Vec<f64> = nodes
            .par_iter()
            .map(|&(x, w)| w * h(x) * self.at(x))
            .collect();
        terms.iter().sum()
    }
}

/// `∫ χ^n P^±(χ) dχ` for `n = 0, 1` and the central moment about `±χ̄_B` for
/// `n = 2`, with `P^±` rebuilt from the momentum integrals.
pub fn meter_moment_oracle(
    infl: &InfluenceFunctional,
    eps2: f64,
    spin: f64,
    order: u8,
) -> Result<f64, OracleError> {
    if order > 2 {
        return Err(OracleError::InvalidOrder(order));
    }
    let d = MeterDensity::new(infl, eps2, spin)?;
    let offset = d.offset;
    Ok(d.integrate(-d.half_width, d.half_width, |x| match order {
        0 => 1.0,
        1 => x + offset,
        _ => x * x,
    }))
}

/// `|∫_0^∞ (P⁺ − P⁻) dχ|` with the density rebuilt from the momentum
/// integrals. Uses `P⁻(χ) = P⁺(−χ)`.
pub fn threshold_distance_oracle(
    infl: &InfluenceFunctional,
    eps2: f64,
) -> Result<f64, OracleError> {
    let d = MeterDensity::new(infl, eps2, 1.0)?;
    let w = d.half_width;
    let zero = -d.offset;
    let above = d.integrate(zero.max(-w), w, |_| 1.0);
    let below = d.integrate(-w, zero.min(w), |_| 1.0);
    Ok((above - below).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_validation() {
        assert!(MomentumLattice::new(100.0, 64, 16).is_ok());
        assert!(MomentumLattice::new(100.0, 63, 16).is_err());
        assert!(MomentumLattice::new(0.0, 64, 16).is_err());
        assert!(MomentumLattice::new(100.0, 64, 0).is_err());
        let l = MomentumLattice::new(10.0, 64, 4).unwrap();
        let nodes = l.nodes();
        assert_eq!(nodes.len(), 256);
        let total: f64 = nodes.iter().map(|n| n.1).sum();
        assert!((total - 10.0).abs() < 1e-12);
        assert!(nodes.windows(2).all(|w| w[0].0 < w[1].0));
        assert_eq!(l.refined().n_shells, 128);
    }

    #[test]
    fn damping_extrapolation_is_exact_for_quadratics() {
        let f = |e: f64| 2.0 + 3.0 * e - 5e4 * e * e;
        let v = extrapolate_damping(PLATEAU_DAMPINGS.map(f));
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn overlap_examples() {
        let zero = InfluenceFunctional::default();
        assert!((pi_integral_overlap(&zero, 1.0, 128).unwrap() - 1.0).norm() < 1e-14);
        let decohered = InfluenceFunctional {
            gamma_a: 1.0,
            ..Default::default()
        };
        let v = pi_integral_overlap(&decohered, 2.0, 128).unwrap();
        assert!((v.re - (-1.0f64).exp()).abs() < 1e-14 && v.im.abs() < 1e-15);
        assert!(pi_integral_overlap(&zero, 1.0, 127).is_err());
        assert!(pi_integral_overlap(&zero, 0.0, 128).is_err());
    }

    #[test]
    fn meter_moments() {
        let infl = InfluenceFunctional {
            gamma_b: 0.4,
            g_r_bb: 0.7,
            chi_bar_b: 0.3,
            ..Default::default()
        };
        let eps2 = 0.5;
        let sigma2 = 0.49 / (2.0 * eps2) + 0.5 * (0.4 + eps2);
        for spin in [1.0, -1.0] {
            let n = meter_moment_oracle(&infl, eps2, spin, 0).unwrap();
            assert!((n - 1.0).abs() < 1e-12, "{n}");
            let m = meter_moment_oracle(&infl, eps2, spin, 1).unwrap();
            assert!((m - spin * 0.3).abs() < 1e-12, "{m}");
            let v = meter_moment_oracle(&infl, eps2, spin, 2).unwrap();
            assert!((v - sigma2).abs() < 1e-12 * sigma2, "{v} vs {sigma2}");
        }
        assert!(meter_moment_oracle(&infl, eps2, 1.0, 3).is_err());
        assert!(meter_moment_oracle(&infl, eps2, 0.5, 0).is_err());
    }

    #[test]
    fn threshold_distance_at_one_sigma() {
        // χ̄_B = Σ gives erf(1/√2).
        let infl = InfluenceFunctional {
            gamma_b: 1.0,
            g_r_bb: 0.5,
            chi_bar_b: (0.25 / 2.0 + 0.5 * (1.0 + 1.0f64)).sqrt(),
            ..Default::default()
        };
        let d = threshold_distance_oracle(&infl, 1.0).unwrap();
        assert!((d - 0.682_689_492_137_086).abs() < 1e-11, "{d}");
    }

    #[test]
    fn spacelike_mode_sum_cancels() {
        for (dt, r, m) in [(0.5, 1.0, 1.0), (-2.0, 3.0, 0.5), (0.0, 0.4, 2.0)] {
            let k = pointwise_regulator(dt, r, m);
            let lattice = MomentumLattice::resolving(8.0 * k, r + f64::abs(dt), 16);
            let p = mode_sum_propagators(dt.abs(), r, m, k, &lattice).unwrap();
            assert!(p.retarded.abs() < 1e-8, "{dt} {r} {m}: {}", p.retarded);
        }
    }

    #[test]
    fn timelike_mode_sum_matches_bessel_tail() {
        for (dt, r, m) in [(2.0, 1.0, 1.0), (1.5, 0.5, 2.0), (5.0, 1.0, 0.3)] {
            let v = mode_sum_retarded(dt, r, m).unwrap();
            let want = retarded_tail(dt, r, m);
            assert!((v - want).abs() < 1e-6, "{dt} {r} {m}: {v} vs {want}");
        }
    }

    #[test]
    fn green_identity_holds_mode_by_mode() {
        let lattice = MomentumLattice::resolving(600.0, 4.0, 16);
        for (dt, r) in [(0.5, 1.0), (-1.5, 1.0), (2.5, 0.7)] {
            let p = mode_sum_propagators(dt, r, 1.0, 100.0, &lattice).unwrap();
            let rhs = Complex64::new(p.keldysh, -0.5 * (p.retarded + p.advanced));
            assert!((p.feynman - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn refinement_study_on_a_coarse_lattice() {
        let coarse = MomentumLattice::new(300.0, 64, 4).unwrap();
        let study = causal_refinement_study(0.5, 1.0, 1.0, 300.0 / 8.0, &coarse, 4).unwrap();
        assert!(study.residuals[0] > 1e-6, "{:?}", study.residuals);
        assert!(study.at_least_linear(1e-12), "{:?}", study.residuals);
    }

    #[test]
    fn massless_light_cone_pairings() {
        let alice = CouplingProtocol::alice(1.0, 2.0).unwrap();
        let bob = CouplingProtocol::bob(1.0, 2.0).unwrap();
        let m = direct_retarded_pairing(&alice, &bob, 1.0, 0.0, 0.1).unwrap();
        assert!((m - 0.25 / (4.0 * PI)).abs() < 1e-14, "{m}");
        let bob = CouplingProtocol::bob(0.7, 1.0).unwrap();
        let alice = CouplingProtocol::alice(1.3, 0.5).unwrap();
        let chi = direct_retarded_pairing(&bob, &alice, 2.0, 0.0, 0.1).unwrap();
        assert!((chi - 0.7 * 1.3 / (4.0 * PI * 2.0)).abs() < 1e-14, "{chi}");
    }

    #[test]
    fn direct_pairing_rejects_unsupported_inputs() {
        let alice = CouplingProtocol::alice(1.0, 2.0).unwrap();
        let bob = CouplingProtocol::bob(1.0, 2.0).unwrap();
        assert!(matches!(
            direct_retarded_pairing(&bob, &alice, 1.0, 1.0, 0.1),
            Err(OracleError::Unsupported(_))
        ));
        assert_eq!(
            direct_retarded_pairing(&alice, &alice, 1.0, 0.0, 0.1),
            Err(OracleError::BothPlateaus)
        );
        assert!(direct_retarded_pairing(&bob, &bob, 0.0, 0.0, 0.1).is_err());
    }
}
