//! Decoherence and which-path duality for two detectors coupled to a free
//! scalar field.
//!
//! Alice's spin sources the field and she switches off over a time `t_A`.
//! Bob measures the field a distance `d` away with a Gaussian meter. The
//! crate computes the six pairing integrals behind the influence functional
//! ([`influence`]), the meter statistics and duality relation they imply
//! ([`observables`]), independent oracles for all of them ([`oracle`]), and
//! the configuration-driven runs behind the `ctpdual` binary
//! ([`experiment`]).
//!
//! ```
//! use ctpdual::greens::FieldParams;
//! use ctpdual::influence::{compute_influence, ExperimentSetup};
//! use ctpdual::numerics::QuadratureSpec;
//! use ctpdual::observables::duality_report;
//! use ctpdual::protocols::CouplingProtocol;
//!
//! let setup = ExperimentSetup {
//!     protocol_a: CouplingProtocol::alice(1.0, 2.0).unwrap(),
//!     protocol_b: CouplingProtocol::bob(1.0, 1.0).unwrap(),
//!     separation: 1.0,
//!     field: FieldParams::with_defaults(1.0, 1.0, 1.0).unwrap(),
//!     meter_epsilon2: 1.0,
//! };
//! let infl = compute_influence(&setup, &QuadratureSpec::default()).unwrap();
//! let report = duality_report(&setup, &infl).unwrap();
//! assert!(infl.m_decoh != 0.0);
//! assert!(report.slack >= 0.0);
//! ```

pub mod experiment;
pub mod greens;
pub mod influence;
pub mod numerics;
pub mod observables;
pub mod oracle;
pub mod protocols;
