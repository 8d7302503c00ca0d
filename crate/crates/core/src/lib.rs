//! Dynamic tomography from time-sequential projections using a
//! partially separable model of the projection data.
//!
//! The pipeline: simulate a moving object ([`phantom`]) observed one view
//! per time sample ([`sampling`], [`radon`]), fit the harmonic temporal
//! model ([`psmodel`], [`solver`]), then rebuild full sinograms and
//! reconstruct each frame ([`recon`]). [`analysis`] holds the conditioning
//! and error-bound diagnostics.

pub mod analysis;
pub mod error;
pub mod linalg;
pub mod phantom;
pub mod psmodel;
pub mod radon;
pub mod recon;
pub mod sampling;
pub mod solver;

pub use error::{Error, Result};
