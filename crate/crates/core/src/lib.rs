//! Numerical laboratory for Vasicek models driven by Gaussian processes.
//!
//! The crate is organised bottom-up:
//!
//! * [`covariance`]: covariance models `R(t,s)` with their mixed derivatives
//!   and the constants `(β, C_β, C'_β)` of the kernel bound.
//! * [`simulate`]: exact Gaussian driver sampling (Cholesky, circulant
//!   embedding) and Vasicek trajectories built from a driver.
//! * [`estimators`]: moment and least-squares estimators of `k` and `μ`,
//!   the divergence-integral correction and CLT standardisations.
//! * [`hquad`]: quadrature for inner products in the reproducing Hilbert
//!   space of the driver, contraction norms and the chaos-kernel library.
//! * [`harness`]: seeded, parallel Monte-Carlo experiments measuring
//!   Kolmogorov distances and their decay in `T`.
//! * [`config`]: the flat `key = value` configuration format shared by the
//!   command line tool.

pub mod config;
pub mod covariance;
pub mod error;
pub mod estimators;
pub mod fmt;
pub mod harness;
pub mod hquad;
pub mod rng;
pub mod simulate;
pub mod special;

pub use error::{Error, Result};
