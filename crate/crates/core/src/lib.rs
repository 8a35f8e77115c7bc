//! Tikhonov regularization restricted to compact sets of non-negative
//! coordinate networks, together with the numerical machinery needed to
//! study it on limited-angle tomography:
//!
//! - [`grid`]: pixel grids on `[-1, 1]^2` and the Shepp-Logan phantom.
//! - [`radon`]: a matrix-free parallel-beam Radon transform and its exact transpose.
//! - [`linop`]: the [`LinearOperator`] contract and a conjugate-gradient solver.
//! - [`tikhonov`]: classical Tikhonov solutions and the auxiliary element `z_alpha`.
//! - [`mlp`]: a leaky-ReLU coordinate MLP with ReLU output, reverse-mode
//!   gradients, Adam and infinity-norm weight projection.
//! - [`nnsolver`]: fitting the network so its image minimizes the Tikhonov functional.
//! - [`rules`]: a-priori parameter choice rules and network sizing.
//! - [`experiment`]: noise, SNR bookkeeping, noise-level sweeps and rate fits.
//! - [`io`]: binary image, sinogram and checkpoint formats.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod error;
pub mod experiment;
pub mod grid;
pub mod io;
pub mod linop;
pub mod mlp;
pub mod nnsolver;
pub mod radon;
pub mod rules;
pub mod tikhonov;

pub use error::{Error, Result};
pub use grid::{Ellipse, ImageGrid};
pub use linop::{cg_solve, CgOptions, CgSolution, DiagonalOperator, LinearOperator};
pub use mlp::{AdamConfig, AdamState, MlpArchitecture, MlpParams};
pub use nnsolver::{reconstruct_nn, NnReconstruction, NnReconstructionConfig};
pub use radon::{RadonGeometry, RadonOperator, SinogramGrid};
pub use tikhonov::{solve_tikhonov, z_alpha, TikhonovProblem, TikhonovSolution};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
