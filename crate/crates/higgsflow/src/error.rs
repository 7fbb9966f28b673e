//! Error type shared across the crate.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("shape/metadata mismatch: {0}")]
    Shape(String),
    #[error("twist/degree mismatch: {0}")]
    Twist(String),
    #[error("gauge transformation singular at site {site} (|det| = {det:.3e})")]
    SingularGauge { site: usize, det: f64 },
    #[error("metric not positive definite (min eigenvalue {0:.3e})")]
    Metric(f64),
    #[error("integrator diverged: energy increased after {0} step halvings")]
    IntegratorDivergence(usize),
    #[error("flow has not converged: |grad| = {0:.3e}")]
    NotConverged(f64),
    #[error("ambiguous limit: rounding error {0:.3e} exceeds 0.05")]
    AmbiguousLimit(f64),
    #[error("limit pair is not split: off-block moment map norm {0:.3e}")]
    NotSplit(f64),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("reverse samples insufficient: {0}")]
    NeedsDeeperSamples(String),
    #[error("harmonic space dimension {found} does not match the index count {expected}")]
    HarmonicDimension { found: usize, expected: usize },
    #[error("linear algebra backend failure: {0}")]
    Backend(String),
}

pub type Result<T> = std::result::Result<T, Error>;
