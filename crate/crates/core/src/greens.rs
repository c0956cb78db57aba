//! Free scalar Green's functions in 3+1 dimensions.
//!
//! The retarded propagator of `(−∂² + m²)` is a light-cone delta plus a
//! smooth Bessel tail inside the cone,
//!
//! ```text
//! G_R(Δt, r) = θ(Δt) [ δ(Δt − r)/(4πr) − (m/4π) J₁(m s)/s · θ(Δt − r) ],   s = √(Δt² − r²),
//! ```
//!
//! and is kept in that split form so the delta can be consumed analytically
//! by the pairings. The Keldysh function only enters through its mode weight
//! `1/(2ω)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::j1_over_x;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum GreensError {
    #[error("distance must be positive, got {0} (use the smearing radius for self-pairings)")]
    NonPositiveDistance(f64),
    #[error("mode frequency {omega} lies below the mass shell m = {mass}")]
    BelowMassShell { omega: f64, mass: f64 },
    #[error("invalid field parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

/// Mass, UV cutoff and detector smearing radius, in natural units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldParams {
    pub mass: f64,
    pub uv_cutoff: f64,
    pub smearing: f64,
}

impl FieldParams {
    pub fn new(mass: f64, uv_cutoff: f64, smearing: f64) -> Result<Self, GreensError> {
        if !(mass.is_finite() && mass >= 0.0) {
            return Err(GreensError::InvalidParameter {
                name: "mass",
                value: mass,
                reason: "must be finite and non-negative",
            });
        }
        if !(uv_cutoff.is_finite() && uv_cutoff > mass) {
            return Err(GreensError::InvalidParameter {
                name: "uv_cutoff",
                value: uv_cutoff,
                reason: "must be finite and exceed the mass",
            });
        }
        if !(smearing.is_finite() && smearing > 0.0) {
            return Err(GreensError::InvalidParameter {
                name: "smearing",
                value: smearing,
                reason: "must be finite and positive",
            });
        }
        Ok(Self {
            mass,
            uv_cutoff,
            smearing,
        })
    }

    /// `Λ = 10³·max(m, 1/t_B)` and `r_s = 10⁻²·min(d, t_B)`.
    pub fn with_defaults(mass: f64, t_b: f64, separation: f64) -> Result<Self, GreensError> {
        Self::new(
            mass,
            Self::default_cutoff(mass, t_b),
            Self::default_smearing(t_b, separation),
        )
    }

    pub fn default_cutoff(mass: f64, t_b: f64) -> f64 {
        1e3 * mass.max(1.0 / t_b)
    }

    pub fn default_smearing(t_b: f64, separation: f64) -> f64 {
        1e-2 * separation.min(t_b)
    }
}

/// `√(k² + m²)`.
pub fn omega(k: f64, m: f64) -> f64 {
    k.hypot(m)
}

/// Split value of the retarded propagator at `(Δt, r)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetardedKernelValue {
    /// Weight of `δ(Δt − r)`.
    pub delta_coefficient: f64,
    /// Smooth part, zero outside the open forward light cone.
    pub tail: f64,
}

/// The smooth part alone, `−(m²/4π)·J₁(ms)/(ms)` for `Δt > r`.
pub fn retarded_tail(dt: f64, r: f64, mass: f64) -> f64 {
    if dt <= r || mass == 0.0 {
        return 0.0;
    }
    retarded_tail_at_interval(((dt - r) * (dt + r)).sqrt(), mass)
}

/// The smooth part as a function of the proper interval `s > 0`.
pub fn retarded_tail_at_interval(s: f64, mass: f64) -> f64 {
    -mass * mass / (4.0 * PI) * j1_over_x(mass * s)
}

pub fn retarded_kernel(
    dt: f64,
    r: f64,
    params: &FieldParams,
) -> Result<RetardedKernelValue, GreensError> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(GreensError::NonPositiveDistance(r));
    }
    Ok(RetardedKernelValue {
        delta_coefficient: 1.0 / (4.0 * PI * r),
        tail: retarded_tail(dt, r, params.mass),
    })
}

/// `G_A(x, y) = G_R(y, x)`: the retarded split evaluated at `−Δt`. The delta
/// then sits at `Δt = −r`.
pub fn advanced_kernel(
    dt: f64,
    r: f64,
    params: &FieldParams,
) -> Result<RetardedKernelValue, GreensError> {
    retarded_kernel(-dt, r, params)
}

/// `∫_r^∞ tail(τ, r) dτ = −(1 − e^{−mr})/(4πr)`.
///
/// Together with the light-cone weight this gives the static Yukawa potential
/// `e^{−mr}/(4πr)`.
pub fn retarded_tail_integral(r: f64, mass: f64) -> f64 {
    if mass == 0.0 {
        return 0.0;
    }
    (-mass * r).exp_m1() / (4.0 * PI * r)
}

/// Keldysh weight `1/(2ω)` of one on-shell mode.
pub fn keldysh_mode_weight(omega: f64, mass: f64) -> Result<f64, GreensError> {
    if !(omega.is_finite() && omega > 0.0 && omega >= mass) {
        return Err(GreensError::BelowMassShell { omega, mass });
    }
    Ok(0.5 / omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{bessel_j1, oscillatory_tail_quad, QuadratureSpec, TailQuad};
    use proptest::prelude::*;

    fn params(m: f64) -> FieldParams {
        FieldParams::new(m, 1e3 * m.max(1.0), 1e-2).unwrap()
    }

    #[test]
    fn dispersion() {
        assert_eq!(omega(0.0, 1.0), 1.0);
        assert_eq!(omega(3.0, 4.0), 5.0);
        assert_eq!(omega(1.0, 0.0), 1.0);
    }

    #[test]
    fn kernel_examples() {
        let v = retarded_kernel(0.5, 1.0, &params(1.0)).unwrap();
        assert_eq!(v.tail, 0.0);
        let v = retarded_kernel(2.0, 1.0, &params(0.0)).unwrap();
        assert_eq!(v.tail, 0.0);
        assert_eq!(v.delta_coefficient, 1.0 / (4.0 * PI));
        let v = retarded_kernel(2.0, 1.0, &params(1.0)).unwrap();
        let s = 3f64.sqrt();
        assert!((v.tail + bessel_j1(s) / s / (4.0 * PI)).abs() < 1e-16);
        assert!((v.tail + 0.026_620_752_249_290_7).abs() < 1e-14);
        assert!(retarded_kernel(1.0, 0.0, &params(1.0)).is_err());
        assert!(retarded_kernel(1.0, -1.0, &params(1.0)).is_err());
    }

    #[test]
    fn tail_is_continuous_into_the_light_cone() {
        let m = 2.0;
        let edge = -m * m / (8.0 * PI);
        let just_inside = retarded_tail(1.0 + 1e-12, 1.0, m);
        assert!((just_inside - edge).abs() < 1e-10);
    }

    #[test]
    fn mode_weight() {
        assert_eq!(keldysh_mode_weight(1.0, 1.0).unwrap(), 0.5);
        assert_eq!(keldysh_mode_weight(2.0, 1.0).unwrap(), 0.25);
        assert!(keldysh_mode_weight(0.5, 1.0).is_err());
        assert!(keldysh_mode_weight(0.0, 0.0).is_err());
    }

    #[test]
    fn field_params_validation_and_defaults() {
        let p = FieldParams::with_defaults(1.0, 2.0, 3.0).unwrap();
        assert_eq!(p.uv_cutoff, 1e3);
        assert_eq!(p.smearing, 2e-2);
        let p = FieldParams::with_defaults(0.0, 0.5, 0.1).unwrap();
        assert_eq!(p.uv_cutoff, 2e3);
        assert!((p.smearing - 1e-3).abs() < 1e-18);
        assert!(FieldParams::new(-1.0, 10.0, 0.1).is_err());
        assert!(FieldParams::new(5.0, 5.0, 0.1).is_err());
        assert!(FieldParams::new(1.0, 10.0, 0.0).is_err());
    }

    #[test]
    fn static_limit_is_yukawa() {
        for (r, m) in [(1.0, 1.0), (0.3, 2.5), (4.0, 0.2)] {
            let spec = QuadratureSpec {
                abs_tol: 1e-13,
                ..Default::default()
            };
            let num =
                match oscillatory_tail_quad(|t| retarded_tail(t, r, m), r, 2.0 * PI / m, &spec)
                    .unwrap()
                {
                    TailQuad::Converged(e) => e.value,
                    TailQuad::Divergent(d) => panic!("{d:?}"),
                };
            let closed = retarded_tail_integral(r, m);
            assert!(
                (num - closed).abs() < 1e-8,
                "r={r} m={m}: {num} vs {closed}"
            );
            let yukawa = 1.0 / (4.0 * PI * r) + closed;
            assert!((yukawa - (-m * r).exp() / (4.0 * PI * r)).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn spacelike_tail_is_exactly_zero(r in 1e-6f64..1e3, frac in -10.0f64..1.0, m in 0.0f64..10.0) {
            let dt = r * frac;
            let v = retarded_kernel(dt, r, &params(m)).unwrap();
            prop_assert_eq!(v.tail, 0.0);
        }

        #[test]
        fn advanced_is_retarded_reversed(dt in -20.0f64..20.0, r in 0.01f64..10.0, m in 0.0f64..5.0) {
            let p = params(m);
            prop_assert_eq!(advanced_kernel(dt, r, &p).unwrap(), retarded_kernel(-dt, r, &p).unwrap());
            if dt > 0.0 {
                prop_assert_eq!(advanced_kernel(dt, r, &p).unwrap().tail, 0.0);
            }
        }
    }
}
