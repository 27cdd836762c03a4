//! Numerical laboratory for non-self-adjoint transfer operators.
//!
//! The crate discretizes integral operators with kernels of the form
//!
//! ```text
//! K(x, y) = exp(-W² ζ² (x - y)² - U(x)/2 - U(y)/2)
//! ```
//!
//! on composite Gauss–Legendre grids, compares them against the closed-form
//! non-self-adjoint harmonic oscillator, measures the block structure of
//! `μ⁻¹K` relative to the Gaussian `g_α`, and evaluates means and connected
//! correlations of one-dimensional chains with complex action.
//!
//! Modules, bottom-up:
//!
//! * [`potentials`]: complex potentials and sampled assumption checks.
//! * [`contour`]: contour rotation angle and saddle parameters.
//! * [`harmonic`]: exact spectral data of the harmonic oscillator kernel.
//! * [`discretize`]: grids, Nyström assembly, projection of functions.
//! * [`linalg`]: vectors, operators and Hermitian power iteration.
//! * [`spectral`]: eigenpairs, singular values, block decomposition.
//! * [`asymptotics`]: W-sweeps and power-law fits.
//! * [`chain`]: the lattice model built on the rotated transfer operator.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod chain;
pub mod contour;
pub mod discretize;
mod error;
pub mod harmonic;
pub mod linalg;
pub mod potentials;
mod quadrature;
pub mod spectral;

pub use num_complex::Complex64 as C64;

pub use asymptotics::{fit_power_law, PowerFit, SweepResult};
pub use chain::{ChainModel, ChainPotential, CorrelationSeries};
pub use contour::{saddle_params, solve_rotation, Rotation, RotationParams};
pub use discretize::{
    assemble_operator, auto_resolution, build_grid, project_function, DiscretizedOperator, Grid, Kernel, Resolution,
    TransferKernel,
};
pub use error::{Error, Result};
pub use harmonic::{HarmonicParams, HarmonicSpectrum};
pub use linalg::{DenseMatrix, LinearOperator, PowerOptions};
pub use potentials::{AssumptionReport, Observable, ObservableKind, Potential, PotentialKind};
pub use spectral::{BlockReport, Blocks, EigenPair};
