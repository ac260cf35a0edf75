//! CQI-driven beamforming for limited-feedback FDD MIMO links.
//!
//! The base station only sees, per communication round, the index of the best
//! codeword (PMI) and the achieved gain at that codeword (CQI). This crate
//! turns a history of such reports into beamforming vectors:
//!
//! - [`channel_model`]: synthetic covariance matrices, pilot matrices and the
//!   Hermitian eigendecomposition shared by everything else.
//! - [`codebook`] and [`feedback`]: the UE side, PMI/CQI generation.
//! - [`am_estimator`]: alternating minimization over phase rotations and the
//!   beam vector for the regularized modulus-fitting problem.
//! - [`bayes_tuner`]: evidence maximization that picks the regularization
//!   weight from the data.
//! - [`multistream`]: sequential estimation of orthogonal beams through
//!   null-space reparameterization.
//! - [`baseline`]: the comparison beamformers.
//! - [`harness`]: Monte-Carlo experiments, metrics and CSV output.

pub mod am_estimator;
pub mod baseline;
pub mod bayes_tuner;
pub mod channel_model;
pub mod codebook;
mod error;
pub mod feedback;
pub mod harness;
pub mod linalg;
pub mod multistream;
pub mod rng;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex<f64>;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<C64>;
