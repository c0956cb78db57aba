use serde::{Deserialize, Serialize};

use super::quad::{adaptive_quad, adaptive_quad_points, Estimate};
use super::{QuadratureError, QuadratureSpec};

/// Outcome of a semi-infinite integral.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TailQuad {
    Converged(Estimate),
    Divergent(DivergenceReport),
}

/// Evidence that `∫_a^∞` grows without bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    /// Integral from the lower limit up to `upper_limit`.
    pub partial_value: f64,
    pub upper_limit: f64,
    /// Growth of the partial integral per unit of `ln x` over the last window.
    pub log_slope: f64,
}

const MAX_WINDOWS: usize = 14;
const MIN_WINDOWS: usize = 4;
const SLOPE_RATIO: f64 = 0.85;

/// Levin u-transform of a sequence of partial sums.
///
/// Returns `None` when a term vanishes, since the remainder model divides by it.
pub fn levin_u(partial_sums: &[f64]) -> Option<f64> {
    let len = partial_sums.len();
    if len < 3 {
        return partial_sums.last().copied();
    }
    let k = len - 1;
    let beta = 1.0;
    let last = beta + k as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut binom = 1.0;
    for j in 0..=k {
        let term = if j == 0 {
            partial_sums[0]
        } else {
            partial_sums[j] - partial_sums[j - 1]
        };
        if term == 0.0 || !term.is_finite() {
            return None;
        }
        let omega = (beta + j as f64) * term;
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let c = sign * binom * ((beta + j as f64) / last).powi(k as i32 - 1);
        num += c * partial_sums[j] / omega;
        den += c / omega;
        binom = binom * (k - j) as f64 / (j + 1) as f64;
    }
    let v = num / den;
    v.is_finite().then_some(v)
}

/// C∞ step falling from 1 at `s = 0` to 0 at `s = 1`.
fn smooth_step_down(s: f64) -> f64 {
    if s <= 0.0 {
        return 1.0;
    }
    if s >= 1.0 {
        return 0.0;
    }
    let up = (-1.0 / s).exp();
    let down = (-1.0 / (1.0 - s)).exp();
    down / (up + down)
}

/// `∫_a^∞ f(x) dx` for integrands that decay slowly, possibly while oscillating.
///
/// `period` is the longest oscillation period present in `f` (any length scale
/// for non-oscillating integrands). The integral is cut off smoothly over
/// `[a + X, a + 2X]`, which suppresses the oscillating part of the remainder
/// far below its amplitude, and `X` is doubled from `max(|a|, 32·period)`.
/// The cut-off integrals are extrapolated with the Levin u-transform.
///
/// The growth of the cut-off integral per unit of `ln x` is tracked across
/// doublings; if it does not fall off the integral is reported as
/// [`TailQuad::Divergent`].
pub fn oscillatory_tail_quad<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    period: f64,
    spec: &QuadratureSpec,
) -> Result<TailQuad, QuadratureError> {
    spec.validate()?;
    if !(period.is_finite() && period > 0.0) {
        return Err(QuadratureError::InvalidPeriod(period));
    }
    if !a.is_finite() {
        return Err(QuadratureError::InvalidInterval {
            a,
            b: f64::INFINITY,
        });
    }
    let panel = period * spec.oscillatory_periods_per_panel;
    let x0 = a.abs().max(32.0 * period);
    let shift = if a > 0.0 { 0.0 } else { x0 - a };

    let mut body = Estimate::default();
    let mut reached = a;
    let mut cut: Vec<f64> = Vec::with_capacity(MAX_WINDOWS);
    let mut slopes: Vec<f64> = Vec::with_capacity(MAX_WINDOWS);
    let mut references: Vec<f64> = Vec::with_capacity(MAX_WINDOWS);
    let mut levin: Vec<f64> = Vec::with_capacity(MAX_WINDOWS);
    for n in 0..MAX_WINDOWS {
        let x = x0 * (1u64 << n) as f64;
        let start = a + x;
        body = body + integrate_partitioned(&f, reached, start, panel, spec)?;
        reached = start;
        let window = integrate_partitioned(
            &|t: f64| f(t) * smooth_step_down((t - start) / x),
            start,
            start + x,
            panel,
            spec,
        )?;
        let value = body.value + window.value;
        // The same cut-off applied to 1/(t + c), which grows by exactly one per
        // unit of ln t, calibrates the slope.
        let reference = ((start + shift) / (a + shift)).ln()
            + adaptive_quad(
                |t: f64| smooth_step_down((t - start) / x) / (t + shift),
                start,
                start + x,
                spec,
            )?
            .value;
        if let (Some(&prev), Some(&prev_ref)) = (cut.last(), references.last()) {
            slopes.push((value - prev) / (reference - prev_ref));
        }
        cut.push(value);
        references.push(reference);
        levin.push(levin_u(&cut).unwrap_or(value));

        if n < 2 {
            continue;
        }
        let target = spec.target(levin[n]);
        let significant = |s: f64| s.abs() * 2f64.ln() > target;
        if n + 1 >= MIN_WINDOWS {
            let grows = slopes[slopes.len() - 3..].windows(2).all(|w| {
                significant(w[1])
                    && w[0].signum() == w[1].signum()
                    && w[1].abs() >= SLOPE_RATIO * w[0].abs()
            });
            if grows {
                return Ok(TailQuad::Divergent(DivergenceReport {
                    partial_value: value,
                    upper_limit: start + x,
                    log_slope: *slopes.last().expect("at least three slopes"),
                }));
            }
        } else if slopes.iter().any(|&s| significant(s)) {
            // Too early to tell slow convergence from a logarithmic divergence.
            continue;
        }
        let d1 = (levin[n] - levin[n - 1]).abs();
        let d2 = (levin[n - 1] - levin[n - 2]).abs();
        if d1 <= target && d2 <= target {
            return Ok(TailQuad::Converged(Estimate::new(
                levin[n],
                d1.max(d2) + body.abs_error + window.abs_error,
            )));
        }
    }
    let n = levin.len() - 1;
    Err(QuadratureError::NotConverged {
        estimate: levin[n],
        error: (levin[n] - levin[n - 1]).abs(),
        subdivisions: MAX_WINDOWS,
    })
}

fn integrate_partitioned<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    panel: f64,
    spec: &QuadratureSpec,
) -> Result<Estimate, QuadratureError> {
    if hi <= lo {
        return Ok(Estimate::default());
    }
    let pieces = ((hi - lo) / panel).ceil().max(1.0) as usize;
    let step = (hi - lo) / pieces as f64;
    let mut points: Vec<f64> = (0..pieces).map(|i| lo + i as f64 * step).collect();
    points.push(hi);
    adaptive_quad_points(f, &points, spec)
}
