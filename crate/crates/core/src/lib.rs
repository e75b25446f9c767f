//! Pseudospectral simulation and verification laboratory for the coupled
//! cubic Schrödinger system
//!
//! ```text
//! i∂t u1 + ½∂x² u1 = 3λ1 |u1|² u1
//! i∂t u2 + ½∂x² u2 = λ6 (2|u1|² u2 + u1² ū2)
//! ```
//!
//! in one space dimension. When `(λ6 − λ1)(λ6 − 3λ1) < 0` the second
//! component decays like `t^{-1/2 + μ|W1|²}` instead of the free `t^{-1/2}`;
//! the modules here evaluate the closed-form asymptotic profiles, integrate
//! the limit ODE independently, run forward, profile-frame and backward
//! (final-state) solvers, and fit the resulting decay exponents.
//!
//! Module map:
//!
//! * [`coeffs`]: `(λ1, λ6)` algebra and regime classification.
//! * [`profiles`]: asymptotic profiles `F1`, `F2`, the diagonalizer `P`, `Q(t)`.
//! * [`odesys`]: general cubic limit-ODE right-hand sides and a log-time RK4.
//! * [`spectral`]: grids, continuous Fourier transform, `U(t)`, `M`, `D`, `J`.
//! * [`evolve`]: split-step, profile-frame and final-state solvers.
//! * [`analysis`]: decay fits, scattering data, profile errors.
//! * [`cli`]: experiment orchestration behind the `cubic-nls` binary.

// `!(a < b)` is used on purpose to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod coeffs;
pub mod error;
pub mod evolve;
pub mod odesys;
pub mod profiles;
pub mod spectral;

pub use coeffs::{Coefficients, Regime};
pub use error::{Error, Result};
pub use num_complex::Complex64;
