//! Numerical core for the one-dimensional nonlocal convection-diffusion
//! equation
//!
//! ```text
//! u_t = J * u - u - a (|u|^{q-1} u)_x,    u(0) = phi,
//! ```
//!
//! with `J` a nonnegative, even, unit-mass kernel with finite second moment
//! and `q >= 2`.
//!
//! The crate is `no_std` (it needs `alloc`) and performs no IO. It contains:
//!
//! - [`grid`]: uniform grids, cell-averaged fields, norms, interpolation and
//!   the scaling operator `u_lambda(t, x) = lambda u(lambda^2 t, lambda x)`.
//! - [`kernel`]: kernel families, their moments and Fourier constants,
//!   discretization, and zero-padded convolution (FFT and direct).
//! - [`solver`]: a monotone explicit finite-volume integrator with a
//!   per-step energy ledger, Kruzkov entropy audits and a vanishing
//!   viscosity cross-check.
//! - [`profiles`]: the closed-form self-similar limits (heat kernel and the
//!   Hopf-Cole Burgers diffusion wave).
//! - [`analysis`]: decay fits, renormalized distances to the limit profiles,
//!   tail bounds, nonlocal quadratic forms and randomized functional
//!   inequality audits.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analysis;
pub mod error;
pub mod fft;
pub mod grid;
pub mod kernel;
pub mod profiles;
pub mod quadrature;
pub mod solver;

pub use error::{Error, Result};
pub use grid::{Field, Grid};
pub use kernel::{ConvolutionPath, DiscreteKernel, KernelSpec};
pub use profiles::{BurgersProfile, HeatProfile, Profile};
pub use solver::{Scheme, SolutionStore, SolverConfig};
