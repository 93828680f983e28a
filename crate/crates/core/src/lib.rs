//! Hat-function frames on the lattice `tℤ`, the transition operator
//! `C = G^{-1/2}`, and the maps between operators on `L²(ℝ)` and band
//! matrices on `ℓ²(ℤ)` that they induce.
//!
//! The crate is organised bottom-up:
//!
//! - [`piecewise`] and [`quadrature`]: exact piecewise-polynomial algebra.
//! - [`lattice`]: the scaled hats `φ_n^t`, their Gram data and refinement.
//! - [`toeplitz`]: symbol calculus for symmetric Toeplitz operators.
//! - [`line_ops`]: multiplication and convolution-kernel operators on the line.
//! - [`compression`]: the orthonormal family `ψ_n^t`, `γ_t`, `α_t` and `β_t`.
//! - [`field`]: experiments over the parameter `t`, including `t → 0`.
//! - [`report`]: configuration files, CSV/JSON reports and the command runner.

pub mod compression;
pub mod error;
pub mod field;
pub mod lattice;
pub mod line_ops;
pub mod piecewise;
pub mod quadrature;
pub mod report;
pub mod toeplitz;
pub mod window;

pub use error::{Error, Result};
pub use lattice::{HatIndex, LatticeScale};
pub use piecewise::PiecewisePolynomial;
pub use toeplitz::{BandToeplitz, CoeffSequence};
pub use window::{LatticeVector, WindowMatrix, WindowSpec};
