use alloc::string::String;

/// Errors raised by density construction, fusion and simulation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("covariance is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("covariance is ill-conditioned (condition number {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("invalid mixture weights: {0}")]
    InvalidWeights(String),

    #[error("invalid probabilities: {0}")]
    InvalidProbabilities(String),

    #[error("degenerate density on domain")]
    DegenerateDensity,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("absolute continuity violated at cell {cell}: p > 0 but q = 0")]
    AbsoluteContinuity { cell: usize },

    #[error("inconsistent common information at cell {cell}")]
    InconsistentCommonInformation { cell: usize },

    #[error("inconsistent common information: ratio component ({q}, {r}) samples where the common density vanishes")]
    InconsistentCommonDensity { q: usize, r: usize },

    #[error("disjoint supports: the fused product has no mass")]
    DisjointSupports,

    #[error("proposal strategy out of validated range (dimension {dim} > 5)")]
    ProposalOutOfRange { dim: usize },

    #[error("proposal misses support of ratio component ({q}, {r})")]
    ProposalMissesSupport { q: usize, r: usize },

    #[error("all ratio components were pruned")]
    AllComponentsPruned,

    #[error("observation has zero marginal likelihood under the belief")]
    ZeroMarginalLikelihood,

    #[error("incomplete fusion: region {region} holds new information but was not selected")]
    IncompleteFusion { region: usize },

    #[error("incomplete fusion: region weights hold new information but were not selected")]
    IncompleteRegionWeights,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Configuration(String),
}

pub type Result<T> = core::result::Result<T, Error>;
