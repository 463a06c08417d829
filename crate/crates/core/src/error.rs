use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid mass at index {index}: {value}")]
    InvalidMass { index: usize, value: f64 },

    #[error("empty support")]
    EmptySupport,

    #[error("not a probability measure: total mass {total}")]
    NotProbability { total: f64 },

    #[error("measure is not dominated by the reference at index {index}")]
    NotDominated { index: usize },

    #[error("total mass must vanish, found {total}")]
    NonzeroTotalMass { total: f64 },

    #[error("degenerate phi: denominator integral is zero")]
    DegeneratePhi,

    #[error("invalid phi: {0}")]
    InvalidPhi(String),

    #[error("family kind mismatch: {0} vs {1}")]
    KindMismatch(&'static str, &'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("oracle failure: {0}")]
    OracleFailure(String),

    #[error("step {step} exceeds the validity radius {radius}")]
    OutsideValidityRadius { step: f64, radius: f64 },

    #[error("support condition violated: {0}")]
    SupportCondition(String),

    #[error("kernel row {row} is not stochastic (sum {sum})")]
    NotRowStochastic { row: usize, sum: f64 },

    #[error("matrix has infinite entries")]
    InfiniteEntries,
}
