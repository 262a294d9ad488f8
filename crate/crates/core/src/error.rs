use thiserror::Error;

/// Errors produced anywhere in the randomization-test pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArtError {
    #[error("need at least 2 clusters, found {found}")]
    TooFewClusters { found: usize },

    #[error("cluster {label:?} has no observations")]
    EmptyCluster { label: String },

    #[error("row {row} has {found} covariates, expected {expected}")]
    WidthMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {field} at row {row}")]
    NonFiniteValue { field: String, row: usize },

    #[error("dataset has no covariate columns")]
    NoCovariates,

    #[error("invalid hypothesis: {0}")]
    InvalidHypothesis(String),

    #[error(
        "coefficients are not identified within cluster {label:?} (index {cluster}): \
         reciprocal condition number {rcond:.3e} of the cluster Gram matrix"
    )]
    IdentificationFailure {
        cluster: usize,
        label: String,
        rcond: f64,
    },

    #[error("full-sample Gram matrix is singular (reciprocal condition number {rcond:.3e})")]
    SingularFullGram { rcond: f64 },

    #[error("randomized standard deviation is zero; the studentized statistic is undefined")]
    DegenerateVariance,

    #[error("score covariance matrix is singular")]
    SingularSigma,

    #[error(
        "exhaustive sign group over {q} clusters exceeds the limit of {limit}; use sampled mode"
    )]
    GroupTooLarge { q: usize, limit: usize },

    #[error("sampled sign group needs at least 2 draws, got {0}")]
    TooFewDraws(usize),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("significance level alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),

    #[error("cannot form {q} blocks from {n} observations")]
    TooFewObservations { n: usize, q: usize },

    #[error("grouping maps every cluster to a single label")]
    DegenerateGrouping,

    #[error("grouping has no entry for cluster {0:?}")]
    IncompleteGrouping(String),

    #[error("no grid point was left unrejected; refine the grid")]
    GridTooCoarse,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid simulation design: {0}")]
    InvalidDesign(String),
}

pub type Result<T> = std::result::Result<T, ArtError>;
