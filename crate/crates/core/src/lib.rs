//! Simulation and statistical verification toolkit for stochastic point-vortex
//! systems in the plane.
//!
//! The crate is organised bottom-up:
//!
//! - [`kernel`]: exact and regularized Biot–Savart kernels.
//! - [`dynamics`]: seeded Monte Carlo integration of the vortex SDEs and an
//!   exact sampler for the squared-radius (CIR) transition.
//! - [`observables`]: path functionals and closed-form moment formulas.
//! - [`estimators`]: relative entropy, Wasserstein and energy distances,
//!   normality tests and exponential-rate fits.
//! - [`limitlaw`]: samplers for the two-vortex limit law, the time-reversal
//!   check and the collision-probability experiment.
//! - [`cli`]: config-driven experiment runner behind the `vortexlab` binary.
//!
//! The simulation layers are generic over the floating-point type through
//! [`Scalar`]; the aliases below fix it to `f64`, which is what the
//! estimators and the runner use.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod estimators;
pub mod kernel;
pub mod limitlaw;
pub mod observables;
mod scalar;

pub use error::{Result, VortexError};
pub use scalar::Scalar;

/// Planar vector in double precision.
pub type Vec2d = kernel::Vec2<f64>;
/// Kernel regularization level in double precision.
pub type Regularization = kernel::RegularizationLevel<f64>;
/// Physical model in double precision.
pub type System = dynamics::SystemSpec<f64>;
/// Numerical controls in double precision.
pub type Params = dynamics::SimParams<f64>;
/// Replica batch in double precision.
pub type Batch = dynamics::StateBatch<f64>;
/// Initial-condition sampler in double precision.
pub type Init = dynamics::Init<f64>;
/// Per-replica path functionals in double precision.
pub type Functionals = observables::FunctionalSample<f64>;
