//! Discrete-gradient gradient flows for total-variation image restoration.
//!
//! Images live on a uniform grid ([`grid::ImageGrid`]); restoration energies
//! ([`functionals::FunctionalModel`]) are minimized by following their
//! gradient flow with energy-stable discrete-gradient integrators
//! ([`dg`]). Baselines (explicit Euler, lagged diffusivity) share the same
//! driver so that traces are directly comparable.
//!
//! Data-parallel loops use rayon unless the default `parallel` feature is
//! disabled. Reductions are blocked identically in both builds, so results
//! agree bit for bit.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dg;
pub mod energy;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod io;
pub mod par;
pub mod solvers;

pub use dg::{
    discrete_gradient, run_flow, Method, Scheme, StepController, StepOptions, StopCriteria,
    Termination,
};
pub use energy::Energy;
pub use error::{Error, Result};
pub use functionals::{FunctionalModel, Mask, ModelKind};
pub use grid::{ImageGrid, Kernel};
