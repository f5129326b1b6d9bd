//! Statistical inference for principal components of spiked sample
//! covariance matrices.
//!
//! The crate provides:
//!
//! - closed-form Marchenko-Pastur spectral maps and auxiliary functions
//!   ([`mp_law`]),
//! - spiked population models with Gaussian or two-point entries and
//!   reproducible data generation ([`model`]),
//! - dense symmetric eigendecomposition with spike estimation from the
//!   leading sample eigenvalues ([`spectral`]),
//! - the asymptotic covariance objects of the outlier eigenvalues and
//!   eigenvector projections ([`asymptotics`]),
//! - two adaptive eigenspace tests: equality against a given subspace and
//!   orthogonality to it ([`inference`]),
//! - a deterministic Monte Carlo harness with scenario presets and a CLI
//!   ([`harness`]).

pub mod asymptotics;
pub mod eig;
pub mod error;
pub mod harness;
pub mod inference;
pub mod model;
pub mod mp_law;
pub mod rng;
pub mod spectral;
pub mod tol;

pub use error::{Error, Result};
pub use tol::Tolerances;
