//! Quadrature and special functions.
//!
//! Everything the physics modules integrate goes through this module:
//! a global adaptive Gauss–Kronrod (G10/K21) integrator, a semi-infinite
//! integrator for slowly decaying oscillatory tails that reports divergence
//! as an ordinary outcome, composite Gauss–Legendre rules, and the two
//! special functions the observables need (J₁ and erf).

mod gauss_legendre;
mod quad;
mod special;
mod tail;

pub use gauss_legendre::{gauss_legendre, GaussLegendre};
pub use quad::{adaptive_quad, adaptive_quad_points, Estimate};
pub use special::{bessel_j1, erf_fn, j1_over_x, sinc};
pub use tail::{levin_u, oscillatory_tail_quad, DivergenceReport, TailQuad};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerances and budgets shared by every integrator in the crate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Panel length of the tail integrator in units of the supplied period.
    pub oscillatory_periods_per_panel: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            max_subdivisions: 10_000,
            oscillatory_periods_per_panel: 0.5,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<(), QuadratureError> {
        let ok = self.rel_tol > 0.0
            && self.rel_tol.is_finite()
            && self.abs_tol > 0.0
            && self.abs_tol.is_finite()
            && self.max_subdivisions >= 16
            && self.oscillatory_periods_per_panel > 0.0
            && self.oscillatory_periods_per_panel.is_finite();
        if ok {
            Ok(())
        } else {
            Err(QuadratureError::InvalidSpec(*self))
        }
    }

    /// Tolerance target for an integral whose current estimate is `value`.
    pub fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum QuadratureError {
    #[error("invalid quadrature settings: {0:?}")]
    InvalidSpec(QuadratureSpec),
    #[error("invalid integration interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
    #[error("integrand is not finite at x = {at}")]
    NonFinite { at: f64 },
    #[error(
        "quadrature did not converge after {subdivisions} subdivisions \
         (best estimate {estimate:e}, estimated error {error:e})"
    )]
    NotConverged {
        estimate: f64,
        error: f64,
        subdivisions: usize,
    },
    #[error("invalid oscillation period {0}")]
    InvalidPeriod(f64),
}
