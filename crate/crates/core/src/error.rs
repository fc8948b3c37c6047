//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A matrix expected to have full column rank does not.
    #[error("rank deficient: numerical rank {rank} < {cols} columns")]
    RankDeficient { rank: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Every size-k column subset was rank deficient.
    #[error("no feasible subset of size {k}")]
    InfeasibleSubset { k: usize },

    /// Exhaustive subset enumeration is capped.
    #[error("best-subset enumeration requires p <= {max}, got p = {p}")]
    SubsetTooLarge { p: usize, max: usize },

    #[error("fitter is not linear; no hat-matrix trace exists")]
    NotLinear,

    /// Tensor-product quadrature is only implemented for small dimensions.
    #[error("quadrature dimension {n} exceeds the supported maximum {max}")]
    DimensionTooLarge { n: usize, max: usize },

    /// A Monte Carlo statistic came out NaN or infinite.
    #[error("non-finite statistic at replicate {replicate}")]
    NonFiniteStatistic { replicate: u64 },

    /// A fitter failed while processing one replicate.
    #[error("replicate {replicate}: {source}")]
    Replicate {
        replicate: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// Heatmap rows do not form a complete rectangular grid.
    #[error("incomplete grid: expected {expected} rows, got {got}")]
    IncompleteGrid { expected: usize, got: usize },

    #[error("subset-curve search exhausted {tried} design seeds without non-monotonicity")]
    SearchExhausted { tried: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
