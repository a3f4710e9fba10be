//! Error types, one enum per subsystem.

use thiserror::Error;

use crate::dirichlet::DirichletParams;

/// Errors from special-function evaluation.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum SpecialFnError {
    #[error("{function}: argument {x} outside domain")]
    Domain { function: &'static str, x: f64 },
}

/// Errors from simplex types and validation.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum SimplexError {
    #[error("invalid sample: {reason}")]
    InvalidSample { reason: String },
    #[error("invalid series: {reason}")]
    InvalidSeries { reason: String },
    #[error("invalid change-point labeling: {reason}")]
    InvalidLabeling { reason: String },
}

/// Errors from Dirichlet density evaluation and fitting.
#[derive(Debug, Clone, Error)]
pub enum DirichletError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("invalid concentration parameters: {reason}")]
    InvalidParams { reason: String },
    #[error("empty segment: log-likelihood needs at least one sample")]
    EmptySegment,
    #[error("MLE needs at least 2 samples, got {got}")]
    TooFewSamples { got: usize },
    #[error(
        "MLE did not converge after {iterations} iterations (residual {residual:.3e})"
    )]
    NonConvergence {
        iterations: usize,
        residual: f64,
        /// Last iterate, for diagnostics.
        last: DirichletParams,
    },
}

/// Errors from the simplex transform.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum TransformError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("standardization needs at least 2 samples, got {got}")]
    InsufficientData { got: usize },
    #[error("expected a general-kind series")]
    NotGeneral,
    #[error("{function}: non-finite or boundary input")]
    Domain { function: &'static str },
    #[error("density is zero (log-density -inf) at sample {index}")]
    DegenerateDensity { index: usize },
}

/// Errors from the change-point detector.
#[derive(Debug, Clone, Error)]
pub enum DetectorError {
    #[error("invalid config: {reason}")]
    InvalidConfig { reason: String },
    #[error("window of {len} samples is too short; need at least {need}")]
    InsufficientWindow { len: usize, need: usize },
    #[error("series of {len} samples is too short; need at least {need}")]
    InsufficientData { len: usize, need: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("expected a compositional series")]
    NotCompositional,
    #[error("every candidate split failed to fit")]
    AllCandidatesFailed,
    #[error("significance test exhausted its replicate retry budget")]
    SignificanceFailure,
    #[error(transparent)]
    Dirichlet(#[from] DirichletError),
}

/// Errors from synthetic data generation.
#[derive(Debug, Clone, Error)]
pub enum DataGenError {
    #[error("invalid generation spec: {reason}")]
    InvalidSpec { reason: String },
    #[error("sample redraw budget exhausted in segment {segment}")]
    RedrawBudgetExhausted { segment: usize },
    #[error("target symmetric KL {target} unreachable on the search path")]
    SearchFailure { target: f64 },
    #[error(transparent)]
    Simplex(#[from] SimplexError),
    #[error(transparent)]
    Dirichlet(#[from] DirichletError),
}

/// Errors from evaluation scoring.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("contract violation: {reason}")]
    Contract { reason: String },
}
