//! Monte Carlo and finite-difference engine for Markov-modulated marked point
//! processes `X = (Z, L)`: a jump-diffusion `Z` driving the intensity of a
//! marked point process that moves the level `L`.
//!
//! * [`model`] — coefficient bundles, the catalog, the generator, assumption checks
//! * [`simulate`] — reference-measure and physical-measure path simulation
//! * [`feynman_kac`] — Monte Carlo estimators of the value function
//! * [`pide`] — grid solution of the backward equation
//! * [`verify`] — cross-checks between the two routes
//! * [`export`] — CSV artifacts
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the `*64` aliases
//! below fix double precision.

// Argument checks are written as `!(x > 0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod export;
pub mod feynman_kac;
pub mod model;
pub mod pide;
pub mod scalar;
pub mod simulate;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type ModelSpec64 = model::ModelSpec<f64>;
pub type State64 = model::State<f64>;
pub type Trajectory64 = simulate::Trajectory<f64>;
pub type EstimatorResult64 = feynman_kac::EstimatorResult<f64>;
pub type McPlan64 = feynman_kac::McPlan<f64>;
pub type GridSpec64 = pide::GridSpec<f64>;
pub type PIDESolution64 = pide::PIDESolution<f64>;
pub type ComparisonReport64 = verify::ComparisonReport<f64>;

pub type ModelSpec32 = model::ModelSpec<f32>;
pub type Trajectory32 = simulate::Trajectory<f32>;
pub type PIDESolution32 = pide::PIDESolution<f32>;
