use thiserror::Error;

/// Every failure mode exposed by the library.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("precision exceeded: {0}")]
    PrecisionExceeded(String),
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("invalid sequence spec: {0}")]
    InvalidSpec(String),
    #[error("inconsistent schedule: {0}")]
    ScheduleInconsistent(String),
    #[error("insufficient precision: {0}")]
    InsufficientPrecision(String),
    #[error("depth too large: {0}")]
    DepthTooLarge(String),
    #[error("continued fraction pattern mismatch: {0}")]
    PatternMismatch(String),
    #[error("depth insufficient: {0}")]
    DepthInsufficient(String),
    #[error("prefix does not match chain: {0}")]
    PrefixChainMismatch(String),
    #[error("not a divisibility chain: {0}")]
    NotAChain(String),
    #[error("ratios too small: {0}")]
    RatiosTooSmall(String),
    #[error("seed supply exhausted: {0}")]
    SupplyExhausted(String),
    #[error("separation too small: {0}")]
    SeparationTooSmall(String),
    #[error("oracle scale exceeded: {0}")]
    OracleScaleExceeded(String),
    #[error("measure not symmetrized: {0}")]
    NotSymmetrized(String),
    #[error("index missing: {0}")]
    IndexMissing(String),
}

impl Error {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::PrecisionExceeded(_) => "PrecisionExceeded",
            Error::GridTooCoarse(_) => "GridTooCoarse",
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::ScheduleInconsistent(_) => "ScheduleInconsistent",
            Error::InsufficientPrecision(_) => "InsufficientPrecision",
            Error::DepthTooLarge(_) => "DepthTooLarge",
            Error::PatternMismatch(_) => "PatternMismatch",
            Error::DepthInsufficient(_) => "DepthInsufficient",
            Error::PrefixChainMismatch(_) => "PrefixChainMismatch",
            Error::NotAChain(_) => "NotAChain",
            Error::RatiosTooSmall(_) => "RatiosTooSmall",
            Error::SupplyExhausted(_) => "SupplyExhausted",
            Error::SeparationTooSmall(_) => "SeparationTooSmall",
            Error::OracleScaleExceeded(_) => "OracleScaleExceeded",
            Error::NotSymmetrized(_) => "NotSymmetrized",
            Error::IndexMissing(_) => "IndexMissing",
        }
    }

    /// Process exit code: 2 for bad input, 3 for resource or precision
    /// exhaustion, 1 when a mandatory cross-check disagreed.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::PatternMismatch(_) => 1,
            Error::PrecisionExceeded(_)
            | Error::InsufficientPrecision(_)
            | Error::DepthInsufficient(_)
            | Error::SupplyExhausted(_)
            | Error::SeparationTooSmall(_)
            | Error::OracleScaleExceeded(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
