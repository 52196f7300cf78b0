use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid needs at least 2 cells, got {0}")]
    GridTooSmall(usize),
    #[error("grid size mismatch: {left} vs {right}")]
    GridMismatch { left: usize, right: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("negative mass {mass} in {what}")]
    NegativeMass { what: &'static str, mass: f64 },
    #[error("invalid interval [{0}, {1})")]
    InvalidInterval(f64, f64),
    #[error("degenerate branch: slope must be non-zero")]
    DegenerateBranch,
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("weight is not positive at x = {x} (W = {value})")]
    WeightNotPositive { x: f64, value: f64 },
    #[error("weight table is empty")]
    EmptyWeightTable,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("measure has zero total mass")]
    EmptyMeasure,
    #[error("measure is not a probability measure (total mass {0})")]
    NotProbability(f64),
    #[error("depth {depth} exceeds the maximum {max}")]
    DepthExceeded { depth: usize, max: usize },
    #[error("harmonic residual {residual:e} exceeds {limit:e}")]
    HarmonicResidual { residual: f64, limit: f64 },
    #[error("harmonic normalisation: integral of h is {0}, expected 1")]
    HarmonicNormalisation(f64),
    #[error("power iteration produced a negative iterate ({0:e})")]
    NegativeIterate(f64),
    #[error("perron eigenvalue must be positive, got {0}")]
    NonPositiveEigenvalue(f64),
    #[error("power iteration did not converge in {iterations} steps (last change {change:e})")]
    NonConvergence { iterations: usize, change: f64 },
    #[error("the Fourier cascade applies only to the doubling map system")]
    NotDoubling,
    #[error("degenerate conditioning: h({x}) = {h:e}")]
    DegenerateConditioning { x: f64, h: f64 },
    #[error("point {0} lies in no branch image")]
    NotInBranchImage(f64),
    #[error("path has no coordinates beyond its base")]
    EmptyPath,
    #[error("branch index {index} out of range (system has {count})")]
    BranchIndex { index: usize, count: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
