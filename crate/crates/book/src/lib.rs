//! The guide under `book/`, compiled so `cargo test --doc` runs every listing.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/protocols.md")]
pub mod protocols {}
#[doc = include_str!("../../../book/src/propagators.md")]
pub mod propagators {}
#[doc = include_str!("../../../book/src/quadrature.md")]
pub mod quadrature {}
#[doc = include_str!("../../../book/src/influence.md")]
pub mod influence {}
#[doc = include_str!("../../../book/src/meter.md")]
pub mod meter {}
#[doc = include_str!("../../../book/src/duality.md")]
pub mod duality {}
#[doc = include_str!("../../../book/src/oracles.md")]
pub mod oracles {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
