//! Time-dependent couplings of the two detectors.
//!
//! A [`CouplingProtocol`] is a piecewise function of time built from
//! segments, each interpolated linearly or with a raised-cosine edge, and an
//! optional constant plateau extending to `t → −∞`. The plateau stands for a
//! coupling that was switched on adiabatically in the remote past; it is never
//! truncated at a finite time. Frequency transforms are taken by parts so the
//! plateau only contributes through the jumps and slopes that follow it.
//!
//! ```
//! use ctpdual::protocols::CouplingProtocol;
//!
//! let alice = CouplingProtocol::alice(1.0, 2.0).unwrap();
//! assert_eq!(alice.evaluate(-5.0), 1.0);
//! assert_eq!(alice.evaluate(1.0), 0.5);
//! assert_eq!(alice.evaluate(3.0), 0.0);
//! ```

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{gauss_legendre, sinc};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    Linear,
    /// `v(t) = v₀ + (v₁ − v₀)(1 − cos(π(t − t₀)/τ))/2`, flat at both ends.
    RaisedCosine,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub t_start: f64,
    pub t_end: f64,
    pub value_start: f64,
    pub value_end: f64,
    #[serde(default)]
    pub interpolation: Interpolation,
}

impl Segment {
    pub fn linear(t_start: f64, t_end: f64, value_start: f64, value_end: f64) -> Self {
        Self {
            t_start,
            t_end,
            value_start,
            value_end,
            interpolation: Interpolation::Linear,
        }
    }

    pub fn raised_cosine(t_start: f64, t_end: f64, value_start: f64, value_end: f64) -> Self {
        Self {
            interpolation: Interpolation::RaisedCosine,
            ..Self::linear(t_start, t_end, value_start, value_end)
        }
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    fn value_at(&self, t: f64) -> f64 {
        let u = (t - self.t_start) / self.duration();
        let w = match self.interpolation {
            Interpolation::Linear => u,
            Interpolation::RaisedCosine => 0.5 * (1.0 - (PI * u).cos()),
        };
        self.value_start + (self.value_end - self.value_start) * w
    }

    /// `∫ λ'(t) e^{iωt} dt` over the open segment.
    fn slope_transform(&self, omega: f64) -> Complex64 {
        let dv = self.value_end - self.value_start;
        if dv == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let tau = self.duration();
        let phase = Complex64::from_polar(1.0, omega * self.t_start);
        match self.interpolation {
            Interpolation::Linear => {
                // (e^{ix} − 1)/(ix) = sinc x + i (x/2) sinc²(x/2)
                let x = omega * tau;
                let h = sinc(0.5 * x);
                phase * Complex64::new(sinc(x), 0.5 * x * h * h) * dv
            }
            Interpolation::RaisedCosine => {
                // p ∫₀^τ sin(pu) e^{iωu} du with p = π/τ, written around ω = p.
                let p = PI / tau;
                let x = (omega - p) * tau;
                let h = sinc(0.5 * x);
                let bracket = Complex64::new(-0.5 * x * h * h, sinc(x));
                phase * bracket * (0.5 * dv * p * p * tau / (omega + p))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ProtocolError {
    #[error("{name} must be positive and finite, got {value}")]
    NonPositiveDuration { name: &'static str, value: f64 },
    #[error("{name} must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },
    #[error("segment {index} has t_end ≤ t_start")]
    EmptySegment { index: usize },
    #[error("segment {index} starts before segment {previous} ends")]
    Overlap { index: usize, previous: usize },
    #[error("past plateau {plateau} does not match the first segment value {first}")]
    PlateauMismatch { plateau: f64, first: f64 },
    #[error("a past plateau needs at least one segment to end it")]
    PlateauWithoutSegments,
    #[error("segment {index} reaches {value}, above the amplitude {amplitude}")]
    ExceedsAmplitude {
        index: usize,
        value: f64,
        amplitude: f64,
    },
    #[error("edge width {tau_s} does not fit twice into the window {t_b}")]
    EdgeTooWide { tau_s: f64, t_b: f64 },
    #[error("frequency transform needs ω > 0, got {0}")]
    NonPositiveFrequency(f64),
}

/// A coupling history `λ(t)`.
///
/// Values are right-continuous: at a segment boundary the later segment wins,
/// and at the last `t_end` the protocol is already zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProtocol", into = "RawProtocol")]
pub struct CouplingProtocol {
    segments: Vec<Segment>,
    past_plateau: f64,
    amplitude: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProtocol {
    segments: Vec<Segment>,
    #[serde(default)]
    past_plateau: f64,
    #[serde(default)]
    amplitude: Option<f64>,
}

impl TryFrom<RawProtocol> for CouplingProtocol {
    type Error = ProtocolError;

    fn try_from(raw: RawProtocol) -> Result<Self, ProtocolError> {
        CouplingProtocol::new(raw.segments, raw.past_plateau, raw.amplitude)
    }
}

impl From<CouplingProtocol> for RawProtocol {
    fn from(p: CouplingProtocol) -> Self {
        RawProtocol {
            segments: p.segments,
            past_plateau: p.past_plateau,
            amplitude: Some(p.amplitude),
        }
    }
}

fn check_finite(name: &'static str, value: f64) -> Result<f64, ProtocolError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(ProtocolError::NonFinite { name, value })
    }
}

fn check_duration(name: &'static str, value: f64) -> Result<f64, ProtocolError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ProtocolError::NonPositiveDuration { name, value })
    }
}

impl CouplingProtocol {
    /// Validates and builds a protocol. Without an explicit `amplitude` the
    /// largest `|value|` is used.
    pub fn new(
        segments: Vec<Segment>,
        past_plateau: f64,
        amplitude: Option<f64>,
    ) -> Result<Self, ProtocolError> {
        check_finite("past_plateau", past_plateau)?;
        for (index, s) in segments.iter().enumerate() {
            check_finite("t_start", s.t_start)?;
            check_finite("t_end", s.t_end)?;
            check_finite("value_start", s.value_start)?;
            check_finite("value_end", s.value_end)?;
            if s.t_end <= s.t_start {
                return Err(ProtocolError::EmptySegment { index });
            }
            if index > 0 && s.t_start < segments[index - 1].t_end {
                return Err(ProtocolError::Overlap {
                    index,
                    previous: index - 1,
                });
            }
        }
        if past_plateau != 0.0 {
            let first = segments
                .first()
                .ok_or(ProtocolError::PlateauWithoutSegments)?
                .value_start;
            if (first - past_plateau).abs() > 1e-12 * past_plateau.abs() {
                return Err(ProtocolError::PlateauMismatch {
                    plateau: past_plateau,
                    first,
                });
            }
        }
        let peak = segments
            .iter()
            .flat_map(|s| [s.value_start.abs(), s.value_end.abs()])
            .fold(past_plateau.abs(), f64::max);
        let amplitude = match amplitude {
            None => peak,
            Some(a) => {
                check_finite("amplitude", a)?;
                for (index, s) in segments.iter().enumerate() {
                    for v in [s.value_start, s.value_end] {
                        if v.abs() > a.abs() * (1.0 + 1e-12) {
                            return Err(ProtocolError::ExceedsAmplitude {
                                index,
                                value: v,
                                amplitude: a,
                            });
                        }
                    }
                }
                a
            }
        };
        Ok(Self {
            segments,
            past_plateau,
            amplitude,
        })
    }

    /// Plateau `λ⁰` on `(−∞, 0]`, ramp `λ⁰(1 − t/t_A)` on `[0, t_A]`, zero after.
    pub fn alice(lambda0: f64, t_a: f64) -> Result<Self, ProtocolError> {
        check_finite("lambda0", lambda0)?;
        check_duration("t_A", t_a)?;
        Self::new(
            vec![Segment::linear(0.0, t_a, lambda0, 0.0)],
            lambda0,
            Some(lambda0),
        )
    }

    /// Rectangle of height `α` on `[0, t_B)`.
    pub fn bob(alpha: f64, t_b: f64) -> Result<Self, ProtocolError> {
        check_finite("alpha", alpha)?;
        check_duration("t_B", t_b)?;
        Self::new(
            vec![Segment::linear(0.0, t_b, alpha, alpha)],
            0.0,
            Some(alpha),
        )
    }

    /// Bob's window with raised-cosine edges of width `tau_s` inside `[0, t_B]`.
    pub fn bob_smoothed(alpha: f64, t_b: f64, tau_s: f64) -> Result<Self, ProtocolError> {
        check_finite("alpha", alpha)?;
        check_duration("t_B", t_b)?;
        check_duration("tau_s", tau_s)?;
        if 2.0 * tau_s > t_b {
            return Err(ProtocolError::EdgeTooWide { tau_s, t_b });
        }
        let mut segments = vec![Segment::raised_cosine(0.0, tau_s, 0.0, alpha)];
        if t_b - tau_s > tau_s {
            segments.push(Segment::linear(tau_s, t_b - tau_s, alpha, alpha));
        }
        segments.push(Segment::raised_cosine(t_b - tau_s, t_b, alpha, 0.0));
        Self::new(segments, 0.0, Some(alpha))
    }

    /// The protocol that is identically zero.
    pub fn zero() -> Self {
        Self {
            segments: Vec::new(),
            past_plateau: 0.0,
            amplitude: 0.0,
        }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn past_plateau(&self) -> f64 {
        self.past_plateau
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn has_plateau(&self) -> bool {
        self.past_plateau != 0.0
    }

    pub fn is_zero(&self) -> bool {
        self.past_plateau == 0.0
            && self
                .segments
                .iter()
                .all(|s| s.value_start == 0.0 && s.value_end == 0.0)
    }

    /// `(start, end)` of the support; `start` is `−∞` for a plateau.
    /// `None` for the zero protocol.
    pub fn support(&self) -> Option<(f64, f64)> {
        if self.is_zero() {
            return None;
        }
        let first = self.segments.first()?;
        let last = self.segments.last()?;
        let start = if self.has_plateau() {
            f64::NEG_INFINITY
        } else {
            first.t_start
        };
        Some((start, last.t_end))
    }

    /// Every segment boundary, sorted and deduplicated.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .segments
            .iter()
            .flat_map(|s| [s.t_start, s.t_end])
            .collect();
        pts.dedup();
        pts
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        let Some(first) = self.segments.first() else {
            return 0.0;
        };
        if t < first.t_start {
            return self.past_plateau;
        }
        // Last segment whose start is ≤ t.
        let idx = self.segments.partition_point(|s| s.t_start <= t) - 1;
        let s = &self.segments[idx];
        if t < s.t_end {
            s.value_at(t)
        } else {
            0.0
        }
    }

    /// Jumps `(t, λ(t⁺) − λ(t⁻))` of the protocol, excluding zero jumps.
    pub fn jumps(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut level = self.past_plateau;
        let mut reached = f64::NEG_INFINITY;
        for s in &self.segments {
            if s.t_start > reached && level != 0.0 && reached.is_finite() {
                out.push((reached, -level));
                level = 0.0;
            }
            if s.value_start != level {
                out.push((s.t_start, s.value_start - level));
            }
            level = s.value_end;
            reached = s.t_end;
        }
        if level != 0.0 {
            out.push((reached, -level));
        }
        out
    }

    /// `λ̃(ω) = ∫ λ(t) e^{iωt} dt` for `ω > 0`.
    ///
    /// Integrating by parts, `λ̃(ω) = (i/ω) ∫ e^{iωt} dλ(t)`, which is a finite
    /// sum over jumps and segment slopes even with a plateau. When there is no
    /// plateau and `ω` times the support is small the by-parts sum cancels to
    /// leading order, so the transform is integrated directly instead.
    ///
    /// ```
    /// use ctpdual::protocols::CouplingProtocol;
    ///
    /// let bob = CouplingProtocol::bob(1.0, 2.0).unwrap();
    /// let low = bob.fourier_transform(1e-9).unwrap();
    /// assert!((low.re - 2.0).abs() < 1e-12);
    /// ```
    pub fn fourier_transform(&self, omega: f64) -> Result<Complex64, ProtocolError> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(ProtocolError::NonPositiveFrequency(omega));
        }
        let Some((start, end)) = self.support() else {
            return Ok(Complex64::new(0.0, 0.0));
        };
        if !self.has_plateau() && omega * (end - start) < 0.5 {
            return Ok(self.direct_transform(omega));
        }
        let mut d = Complex64::new(0.0, 0.0);
        for (t, jump) in self.jumps() {
            d += Complex64::from_polar(jump, omega * t);
        }
        for s in &self.segments {
            d += s.slope_transform(omega);
        }
        Ok(Complex64::new(0.0, 1.0 / omega) * d)
    }

    fn direct_transform(&self, omega: f64) -> Complex64 {
        let rule = gauss_legendre(16);
        self.segments
            .iter()
            .map(|s| {
                rule.integrate(s.t_start, s.t_end, |t| {
                    Complex64::from_polar(s.value_at(t), omega * t)
                })
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{adaptive_quad_points, QuadratureSpec};
    use proptest::prelude::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1e-300)
    }

    #[test]
    fn constructors_evaluate() {
        let a = CouplingProtocol::alice(1.0, 2.0).unwrap();
        assert_eq!(a.evaluate(-5.0), 1.0);
        assert_eq!(a.evaluate(0.0), 1.0);
        assert_eq!(a.evaluate(1.0), 0.5);
        assert_eq!(a.evaluate(2.0), 0.0);
        assert_eq!(a.evaluate(3.0), 0.0);

        let b = CouplingProtocol::bob(1.0, 2.0).unwrap();
        assert_eq!(b.evaluate(1.0), 1.0);
        assert_eq!(b.evaluate(0.0), 1.0);
        assert_eq!(b.evaluate(-0.1), 0.0);
        assert_eq!(b.evaluate(2.0), 0.0);
        let half = CouplingProtocol::bob(0.5, 2.0).unwrap();
        assert_eq!(half.evaluate(2.1), 0.0);
    }

    #[test]
    fn constructors_reject_bad_durations() {
        assert!(CouplingProtocol::alice(1.0, 0.0).is_err());
        assert!(CouplingProtocol::alice(1.0, -1.0).is_err());
        assert!(CouplingProtocol::alice(f64::NAN, 1.0).is_err());
        assert!(CouplingProtocol::bob(1.0, 0.0).is_err());
        assert!(CouplingProtocol::bob(1.0, f64::INFINITY).is_err());
        assert!(CouplingProtocol::bob_smoothed(1.0, 1.0, 0.6).is_err());
    }

    #[test]
    fn validation_catches_malformed_segments() {
        let overlap = vec![
            Segment::linear(0.0, 2.0, 1.0, 1.0),
            Segment::linear(1.0, 3.0, 1.0, 0.0),
        ];
        assert!(matches!(
            CouplingProtocol::new(overlap, 0.0, None),
            Err(ProtocolError::Overlap { index: 1, .. })
        ));
        let mismatch = vec![Segment::linear(0.0, 1.0, 0.5, 0.0)];
        assert!(matches!(
            CouplingProtocol::new(mismatch, 1.0, None),
            Err(ProtocolError::PlateauMismatch { .. })
        ));
        assert!(matches!(
            CouplingProtocol::new(vec![Segment::linear(1.0, 1.0, 0.0, 0.0)], 0.0, None),
            Err(ProtocolError::EmptySegment { index: 0 })
        ));
        assert!(matches!(
            CouplingProtocol::new(vec![Segment::linear(0.0, 1.0, 2.0, 0.0)], 0.0, Some(1.0)),
            Err(ProtocolError::ExceedsAmplitude { .. })
        ));
    }

    #[test]
    fn serde_round_trip_validates() {
        let a = CouplingProtocol::bob_smoothed(0.7, 3.0, 0.5).unwrap();
        let json = serde_json::to_string(&a).unwrap();
        let back: CouplingProtocol = serde_json::from_str(&json).unwrap();
        assert_eq!(a, back);
        let bad = r#"{"segments":[{"t_start":0,"t_end":1,"value_start":0.5,"value_end":0}],"past_plateau":1}"#;
        assert!(serde_json::from_str::<CouplingProtocol>(bad).is_err());
    }

    #[test]
    fn jumps_of_rectangles_and_gaps() {
        let b = CouplingProtocol::bob(2.0, 3.0).unwrap();
        assert_eq!(b.jumps(), vec![(0.0, 2.0), (3.0, -2.0)]);
        assert!(CouplingProtocol::alice(1.0, 1.0)
            .unwrap()
            .jumps()
            .is_empty());
        let gap = CouplingProtocol::new(
            vec![
                Segment::linear(0.0, 1.0, 1.0, 1.0),
                Segment::linear(2.0, 3.0, 1.0, 1.0),
            ],
            0.0,
            None,
        )
        .unwrap();
        assert_eq!(
            gap.jumps(),
            vec![(0.0, 1.0), (1.0, -1.0), (2.0, 1.0), (3.0, -1.0)]
        );
        assert_eq!(gap.evaluate(1.5), 0.0);
    }

    #[test]
    fn alice_transform_closed_form() {
        let a = CouplingProtocol::alice(1.0, 1.0).unwrap();
        let got = a.fourier_transform(1.0).unwrap();
        let want = -(Complex64::from_polar(1.0, 1.0) - 1.0);
        assert!(close(got, want, 1e-14), "{got} vs {want}");
        assert!((got.re - 0.459_697_694_131_860_3).abs() < 1e-12);
        assert!((got.im + 0.841_470_984_807_896_5).abs() < 1e-12);

        let a2 = CouplingProtocol::alice(1.0, 2.0).unwrap();
        assert!(a2.fourier_transform(PI).unwrap().norm() < 1e-15);
    }

    #[test]
    fn bob_transform_small_and_large_omega() {
        let b = CouplingProtocol::bob(1.0, 2.0).unwrap();
        let low = b.fourier_transform(1e-10).unwrap();
        assert!((low - Complex64::new(2.0, 0.0)).norm() < 1e-9);
        for w in [0.01, 0.2, 0.26, 1.0, 7.5, 1e3] {
            let want = (Complex64::from_polar(1.0, 2.0 * w) - 1.0) / Complex64::new(0.0, w);
            assert!(
                close(b.fourier_transform(w).unwrap(), want, 1e-12),
                "ω = {w}"
            );
        }
    }

    #[test]
    fn transform_rejects_non_positive_frequency() {
        let b = CouplingProtocol::bob(1.0, 2.0).unwrap();
        assert!(b.fourier_transform(0.0).is_err());
        assert!(b.fourier_transform(-1.0).is_err());
        assert_eq!(
            CouplingProtocol::zero().fourier_transform(1.0).unwrap(),
            Complex64::new(0.0, 0.0)
        );
    }

    /// `∫ λ e^{iωt}` by brute force: adaptive quadrature over the support and,
    /// for a plateau, `∫_{−T}^{t₀} λ⁰ e^{ηt} e^{iωt}` with `T = 40/η` followed by
    /// Richardson extrapolation in η.
    fn numeric_transform(p: &CouplingProtocol, omega: f64) -> Complex64 {
        let spec = QuadratureSpec {
            rel_tol: 1e-12,
            abs_tol: 1e-13,
            max_subdivisions: 100_000,
            ..Default::default()
        };
        let mut pts = p.breakpoints();
        let (lo, hi) = (pts[0], *pts.last().unwrap());
        let n = ((hi - lo) * omega / PI).ceil() as usize;
        for i in 1..n {
            pts.push(lo + (hi - lo) * i as f64 / n as f64);
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let re = adaptive_quad_points(|t| p.evaluate(t) * (omega * t).cos(), &pts, &spec).unwrap();
        let im = adaptive_quad_points(|t| p.evaluate(t) * (omega * t).sin(), &pts, &spec).unwrap();
        let mut total = Complex64::new(re.value, im.value);
        if p.has_plateau() {
            // Fixed 20-point rules per half period; adaptive error bookkeeping over
            // thousands of cancelling panels would swamp the tolerance.
            let rule = crate::numerics::gauss_legendre(20);
            let plateau = |eta: f64| {
                let t_lo = lo - 40.0 / eta;
                let m = ((lo - t_lo) * omega / PI).ceil() as usize;
                let step = (lo - t_lo) / m as f64;
                (0..m)
                    .map(|i| {
                        let a = t_lo + i as f64 * step;
                        rule.integrate(a, a + step, |t| {
                            Complex64::from_polar(
                                p.past_plateau() * (eta * (t - lo)).exp(),
                                omega * t,
                            )
                        })
                    })
                    .sum::<Complex64>()
            };
            let eta = 1e-3 * omega;
            total += (plateau(eta) * 8.0 - plateau(2.0 * eta) * 6.0 + plateau(4.0 * eta)) / 3.0;
        }
        total
    }

    #[test]
    fn transform_matches_damped_time_quadrature() {
        let protos = [
            CouplingProtocol::alice(1.0, 1.0).unwrap(),
            CouplingProtocol::alice(0.3, 7.0).unwrap(),
            CouplingProtocol::bob(1.0, 2.0).unwrap(),
            CouplingProtocol::bob_smoothed(0.8, 2.0, 0.4).unwrap(),
        ];
        for p in &protos {
            for w in [0.1, 0.5, 1.0, 3.3, 10.0] {
                let got = p.fourier_transform(w).unwrap();
                let want = numeric_transform(p, w);
                assert!(close(got, want, 1e-6), "{p:?} ω = {w}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn raised_cosine_near_resonance() {
        // ω = π/τ makes the raised-cosine denominator vanish in naive form.
        let p = CouplingProtocol::bob_smoothed(1.0, 2.0, 0.5).unwrap();
        let w = PI / 0.5;
        let at = p.fourier_transform(w).unwrap();
        let near = p.fourier_transform(w * (1.0 + 1e-9)).unwrap();
        assert!((at - near).norm() < 1e-7);
        assert!(close(at, numeric_transform(&p, w), 1e-8));
    }

    fn arb_protocol() -> impl Strategy<Value = CouplingProtocol> {
        (
            prop::collection::vec(
                (0.05f64..2.0, -1.0f64..1.0, 0.0f64..0.5, any::<bool>()),
                1..5,
            ),
            -1.0f64..1.0,
            -2.0f64..2.0,
        )
            .prop_map(|(pieces, v0, t0)| {
                let mut t = t0;
                let mut v = v0;
                let mut segments = Vec::new();
                for (len, dv, gap, smooth) in pieces {
                    let seg = if smooth {
                        Segment::raised_cosine(t, t + len, v, v + dv)
                    } else {
                        Segment::linear(t, t + len, v, v + dv)
                    };
                    segments.push(seg);
                    t += len + gap;
                    v += dv;
                }
                CouplingProtocol::new(segments, 0.0, None).unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn by_parts_transform_matches_quadrature(p in arb_protocol(), w in 0.05f64..20.0) {
            let got = p.fourier_transform(w).unwrap();
            let want = numeric_transform(&p, w);
            prop_assert!((got - want).norm() <= 1e-8 * (1.0 + want.norm()), "{} vs {}", got, want);
        }

        #[test]
        fn alice_modulus_matches_kernel(l in -3.0f64..3.0, ta in 0.05f64..50.0, w in 0.01f64..100.0) {
            let p = CouplingProtocol::alice(l, ta).unwrap();
            let got = p.fourier_transform(w).unwrap().norm_sqr();
            let want = 2.0 * l * l * (1.0 - (w * ta).cos()) / (ta * ta * w.powi(4));
            let scale = 4.0 * l * l / (ta * ta * w.powi(4));
            prop_assert!((got - want).abs() <= 1e-10 * scale, "{} vs {}", got, want);
        }

        #[test]
        fn constructed_protocols_are_bounded_and_right_continuous(
            a in -2.0f64..2.0, dur in 0.01f64..10.0, t in -20.0f64..20.0
        ) {
            for p in [CouplingProtocol::alice(a, dur).unwrap(), CouplingProtocol::bob(a, dur).unwrap()] {
                let v = p.evaluate(t);
                prop_assert!(v.abs() <= a.abs() * (1.0 + 1e-15));
                if t >= dur {
                    prop_assert_eq!(v, 0.0);
                }
                for b in p.breakpoints() {
                    let right = p.evaluate(b + 1e-9);
                    prop_assert!((p.evaluate(b) - right).abs() <= 1e-8 * a.abs() / dur);
                }
            }
        }
    }
}
