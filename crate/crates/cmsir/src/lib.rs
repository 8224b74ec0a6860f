//! SIR epidemics on configuration-model random (multi)graphs.
//!
//! The crate has three legs that are kept in agreement with each other:
//!
//! * [`simulate`] — an exact event-driven simulation of the continuous-time
//!   SIR dynamics in which the random multigraph is revealed edge by edge
//!   while the epidemic spreads (dynamic half-edge pairing),
//! * [`limit`] — the deterministic large-population limit: generating-function
//!   style limit curves, the theta/v_I differential system, the final-size
//!   root, and the basic reproductive ratio,
//! * [`volterra`] — renewal-type integral representations of the same limit
//!   curves, solved independently by Picard fixed-point iteration and used to
//!   cross-verify the differential route.
//!
//! [`ensemble`] runs seeded Monte Carlo ensembles of the simulator against the
//! limit curves, and [`model`] holds population/rate configuration, validation
//! and sampling. All numeric code is generic over the scalar type via
//! [`scalar::Real`]; the crate root exports `f64` aliases for the common
//! instantiations.

// Guards are written as `!(x > y)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod ensemble;
pub mod error;
pub mod limit;
pub mod model;
pub mod ode;
pub mod report;
pub mod rng;
pub mod scalar;
pub mod simulate;
pub mod volterra;

pub use error::{Error, Result};
pub use scalar::Real;

/// Default scalar used by the CLI and the bundled tests.
pub type Scalar = f64;

pub type EpidemicRates = model::EpidemicRates<Scalar>;
pub type LimitProfile = model::LimitProfile<Scalar>;
pub type DegreeDist = model::DegreeDist<Scalar>;
pub type LimitFunctions = limit::LimitFunctions<Scalar>;
pub type ThetaPath = limit::ThetaPath<Scalar>;
pub type VPaths = limit::VPaths<Scalar>;
pub type SolveControls = limit::SolveControls<Scalar>;
pub type Trajectory = simulate::Trajectory<Scalar>;
pub type SimOutcome = simulate::SimOutcome<Scalar>;
pub type RunOpts = simulate::RunOpts<Scalar>;
pub type EnsembleConfig = ensemble::EnsembleConfig<Scalar>;
pub type EnsembleReport = ensemble::EnsembleReport<Scalar>;
pub type ResidualReport = volterra::ResidualReport<Scalar>;
