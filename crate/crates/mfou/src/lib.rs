//! Spectral likelihood toolkit for the discretely observed mixed fractional
//! Ornstein-Uhlenbeck (mfOU) process
//!
//! ```text
//! dX_t = -alpha X_t dt + d(sigma B^H_t + W_t)
//! ```
//!
//! observed on the grid `k*delta`, `k = 1..=n`, with unknown parameter
//! `theta = (sigma, H, alpha)`. The crate provides
//!
//! - the exact sampled spectral density, its parameter derivatives and the
//!   low-frequency limit profiles ([`spectral`]);
//! - Toeplitz covariance builders, Cholesky whitening and centered Gaussian
//!   quadratic forms ([`toeplitz`]);
//! - closed-form and quadrature evaluation of the asymptotic information
//!   constants in all three Hurst regimes ([`fisher`]);
//! - exact Gaussian log-likelihood, score matrices, the two-stage score
//!   orthogonalization, the triangular rate transform and a local-expansion
//!   checker ([`likelihood`]);
//! - exact stationary path simulation by Cholesky or circulant embedding
//!   ([`simulate`]);
//! - a Monte Carlo verification harness with deterministic, seedable
//!   replication and CSV/JSON exports ([`harness`]);
//! - a command line front end ([`cli`]).
//!
//! All data-parallel inner loops (quadrature grids, matrix factorizations,
//! replication sweeps) run on rayon when the default `parallel` feature is
//! enabled and fall back to equivalent sequential code without it. Results
//! are bit-identical across thread counts and across the two modes.

// `!(x > 0)` deliberately rejects NaN alongside non-positive values, and the
// dense kernels index row prefixes where iterator forms obscure the shapes.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod fisher;
pub mod harness;
pub mod likelihood;
pub mod linalg;
pub mod model;
pub mod quadrature;
pub mod simulate;
pub mod special;
pub mod spectral;
pub mod toeplitz;

pub(crate) mod par;

pub use error::{Error, Result};
pub use model::{HurstRegime, LocalAlternative, ModelParams, SamplingScheme};
