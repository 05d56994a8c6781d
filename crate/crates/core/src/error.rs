use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Coarse classification used by front ends to map failures to exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("sample size {n} exceeds population size {population}")]
    SampleTooLarge { n: usize, population: usize },
    #[error("duplicate unit id `{0}`")]
    DuplicateId(String),
    #[error("unit `{id}` has {found} features, expected {expected}")]
    ArityMismatch { id: String, expected: usize, found: usize },
    #[error("unit `{0}` does not carry the same domain schemes as the rest of the population")]
    DomainSchemeMismatch(String),
    #[error("unit `{0}` has no observed target value")]
    MissingTarget(String),
    #[error("unit `{0}` has zero inclusion probability")]
    ZeroInclusion(String),
    #[error("second-order inclusion probabilities are not available: {0}")]
    NoJointInclusion(String),
    #[error("design matrix is rank deficient (rank {rank} of {columns} columns)")]
    RankDeficient { rank: usize, columns: usize },
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("feature vector has {found} entries, expected {expected}")]
    SchemaMismatch { expected: usize, found: usize },
    #[error("model kind `{0}` cannot produce class probabilities")]
    NoProbabilityMode(&'static str),
    #[error("class label {label} outside 0..{classes}")]
    BadClassLabel { label: f64, classes: usize },
    #[error("invalid subsample size n1={n1} for a sample of size {n}")]
    InvalidSplit { n1: usize, n: usize },
    #[error("model fit failed on split {split}: {source}")]
    SplitFit { split: usize, source: Box<Error> },
    #[error("exact Rao-Blackwellisation needs {count} splits, above the cap of {cap}; use Monte-Carlo mode")]
    EnumerationTooLarge { count: u128, cap: u128 },
    #[error("unit `{0}` in the test set has zero conditional inclusion probability")]
    ZeroTestInclusion(String),
    #[error("MSE estimation needs {needed}, got {got}")]
    TooFewSplits { needed: &'static str, got: usize },
    #[error("unsupported design: {0}")]
    UnsupportedDesign(String),
    #[error("historic data contain no erroneous records; an error-probability model cannot be trained")]
    NoHistoricErrors,
    #[error("magnitude model cannot be trained: {0}")]
    MagnitudeModelUntrainable(String),
    #[error("validated total is zero; relative pseudo-bias is undefined")]
    ZeroValidatedTotal,
    #[error("insufficient history: {0}")]
    InsufficientHistory(String),
    #[error("unit `{0}` has no history and no group to borrow from")]
    NoHistory(String),
    #[error("domain `{0}` is empty")]
    EmptyDomain(String),
    #[error("elbow detection needs at least 3 scores, got {0}")]
    TooFewScores(usize),
    #[error("no training overlap between administrative and survey values")]
    NoTrainingOverlap,
    #[error("no units carry both sources in period {0}")]
    EmptyIntersection(usize),
    #[error("raking did not converge within {0} iterations")]
    RakingDiverged(usize),
    #[error("calibration requested without margins")]
    EmptyMargins,
    #[error("margin `{variable}` has no total for category `{category}`")]
    MissingMarginCategory { variable: String, category: String },
    #[error("no weekly estimate for week {0}")]
    MissingWeek(u32),
    #[error("monthly variance needs at least two weeks, got {0}")]
    TooFewWeeks(usize),
    #[error("no respondents: {0}")]
    NoRespondents(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("{0}")]
    Empty(&'static str),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            InvalidConfig(_)
            | SampleTooLarge { .. }
            | InvalidSplit { .. }
            | EnumerationTooLarge { .. }
            | TooFewSplits { .. }
            | UnsupportedDesign(_)
            | NoProbabilityMode(_)
            | EmptyMargins => ErrorClass::Config,
            RankDeficient { .. } | RakingDiverged(_) | SplitFit { .. } => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }
}
