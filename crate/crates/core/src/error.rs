use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("market must have at least one state")]
    EmptyMarket,
    #[error("probability at state {index} is not strictly positive ({value})")]
    NonPositiveProbability { index: usize, value: f64 },
    #[error("probabilities sum to {sum}, expected 1")]
    ProbabilitiesDoNotSumToOne { sum: f64 },
    #[error("underlying payoff at state {index} is negative ({value})")]
    NegativeUnderlying { index: usize, value: f64 },
    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("sequence is empty")]
    EmptySequence,
    #[error("invalid norm spec {0:?}")]
    InvalidNormSpec(String),
    #[error("pairing bank needs at least one strictly positive density")]
    NoStrictlyPositiveDensity,
    #[error("negative density weight at state {index}")]
    NegativeDensity { index: usize },
    #[error("ladder index n must be at least 1")]
    InvalidN,
    #[error("claim is not measurable with respect to sigma(f): states {first} and {second} share a cell but differ")]
    NotMeasurable { first: usize, second: usize },
    #[error("target must be nonnegative (state {index} is {value})")]
    NegativeTarget { index: usize, value: f64 },
    #[error("generator set must contain the constant claim 1")]
    MissingOne,
    #[error("strikes must be nonempty and strictly increasing")]
    InvalidStrikes,
    #[error("bond price must be nonnegative, got {0}")]
    NegativeBondPrice(f64),
    #[error("pricing functional vanishes on the whole option space")]
    DegeneratePi,
    #[error("pricing admits a free lunch")]
    FreeLunchPresent,
    #[error("price is not determined by arbitrage: bounds [{p_min}, {p_max}]")]
    NotDeterminedByArbitrage { p_min: f64, p_max: f64 },
    #[error("linear program: {0}")]
    Lp(#[from] crate::lp::LpError),
    #[error("unexpected LP status {0:?} in {1}")]
    LpStatus(crate::lp::LpStatus, &'static str),
}
