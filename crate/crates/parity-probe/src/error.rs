use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("probability out of range [0, 1]: {0}")]
    InvalidProbability(f64),
    #[error("non-finite input: {0}")]
    NonFinite(f64),
    #[error("quantile requires p strictly inside (0, 1), got {0}")]
    QuantileOutOfRange(f64),
    #[error("binomial coefficient requires k <= n, got n = {n}, k = {k}")]
    BinomialIndex { n: u64, k: u64 },

    #[error("row {row}: {message}")]
    CsvRow { row: u64, message: String },
    #[error("missing column {0:?} in header")]
    MissingColumn(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("input must contain at least two distinct groups")]
    TooFewGroups,
    #[error("group {0:?} not present in table")]
    UnknownGroup(String),
    #[error("reference and protected groups must differ")]
    SameGroups,
    #[error("group {group:?}: invalid counts n = {n}, k = {k}")]
    InvalidCounts { group: String, n: u64, k: u64 },
    #[error("group {group:?}: truth strata inconsistent with totals")]
    InconsistentStrata { group: String },
    #[error("duplicate group label {0:?}")]
    DuplicateGroup(String),

    #[error("reference group rate is zero; ratio is undefined")]
    UndefinedRatio,
    #[error("ground-truth labels required but absent for group {0:?}")]
    MissingTruth(String),
    #[error("empty {stratum} stratum in group {group:?}")]
    EmptyStratum { group: String, stratum: &'static str },

    #[error("significance level must lie in (0, 0.5), got {0}")]
    InvalidAlpha(f64),
    #[error("degenerate variance: all outcomes identical, the test is undefined")]
    DegenerateVariance,

    #[error("rate must lie strictly inside (0, 1), got {0}")]
    RateNotInOpenInterval(f64),
    #[error("replicates must be at least 1000, got {0}")]
    TooFewReplicates(u64),
    #[error("exact enumeration is limited to {limit} per group, got n = {n}")]
    ExactSizeGuard { n: u64, limit: u64 },
    #[error("target type-2 error {target} is not reachable (must lie in (0, 1 - alpha))")]
    UnreachableTarget { target: f64 },
    #[error("no disparity in (0, {base_rate}) reaches the target type-2 error")]
    NoDetectableDisparity { base_rate: f64 },
    #[error("allocation ratio must be positive and finite, got {0}")]
    InvalidAllocationRatio(f64),
    #[error("sweep grid must be non-empty and strictly increasing")]
    InvalidGrid,
    #[error("rate pair ({0}, {1}) does not differ by the stated disparity {2}")]
    DisparityMismatch(f64, f64, f64),
    #[error("group size must be at least 1")]
    EmptyGroup,

    #[error("relevant disparity must lie in (0, 1), got {0}")]
    InvalidEpsilon(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
