//! Online Dirichlet change-point detection for compositional multivariate
//! time series, with a simplex transform that extends it to general
//! multivariate data.
//!
//! The pipeline: model each homogeneous segment as one Dirichlet
//! distribution, scan an active window for the split maximizing the
//! two-segment log-likelihood, and accept the split when a permutation-style
//! random-subset test declares the log-likelihood ratio significant.
//! General (unconstrained) data is first standardized and mapped into the
//! simplex by the multi-dimensional expit, which preserves log-likelihood
//! ratios and KL separation.

pub mod datagen;
pub mod detector;
pub mod dirichlet;
pub mod error;
pub mod eval;
pub mod simplex;
pub mod special;
pub mod transform;

mod seed;

pub use detector::{
    detect, ChangePointReport, Detector, DetectorConfig, ScanResult, SignificanceMethod,
};
pub use dirichlet::{DirichletParams, SufficientStats};
pub use simplex::{Composition, SegmentLabeling, Series, SeriesKind};
pub use transform::Standardization;
