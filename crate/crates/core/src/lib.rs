//! Bayesian survey-weighted regression for categorical data observed with
//! misclassification.
//!
//! The crate is `no_std` (with `alloc`) so that the samplers and Gibbs
//! kernels can be embedded anywhere; file formats, configuration and the
//! command line live in the `misreport` companion crate.
//!
//! Three models are provided, all fit with Pólya-Gamma augmented Gibbs
//! samplers under a weighted pseudo-likelihood:
//!
//! - [`binary`]: a misreported binary response with sensitivity and
//!   specificity parameters.
//! - [`multiclass`]: a misreported K-category response with a column
//!   stochastic reporting-rate matrix.
//! - [`covariate`]: an outcome regression on a subset of the sample whose
//!   binary covariate is misreported and modeled on the full sample.
//!
//! [`sim`] reproduces the informative-sampling bias study used to validate
//! the binary model.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod binary;
pub mod covariate;
pub mod data;
pub mod distributions;
pub mod draws;
mod error;
mod gibbs;
pub mod linalg;
pub mod math;
pub mod multiclass;
pub mod rng;
pub mod sim;

pub use binary::FitConfig;
pub use data::{DesignMatrix, ScaledWeights, SurveyDataset};
pub use draws::{PosteriorDraws, PosteriorSummaryRow};
pub use error::{Error, Result};



