use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("values and probabilities differ in length ({values} vs {probs})")]
    LengthMismatch { values: usize, probs: usize },
    #[error("pmf needs at least one atom")]
    EmptyPmf,
    #[error("negative probability {prob} at value {value}")]
    NegativeProb { value: f64, prob: f64 },
    #[error("duplicate support value {0}")]
    DuplicateValue(f64),
    #[error("probabilities sum to {0}, not 1")]
    NotNormalized(f64),
    #[error("non-finite support value {0}")]
    NonFiniteValue(f64),
    #[error("function is not finite at support point {0}")]
    NonFiniteFunctionValue(f64),
    #[error("credal set needs at least one prior")]
    EmptyCredalSet,
    #[error("event member {0} is not in the union support")]
    EventOutsideSupport(f64),
    #[error("sum lattice exceeded {cap} states at step {step}; reduce n or use the simulate experiment")]
    LatticeOverflow { step: usize, cap: usize },
    #[error("strategy enumeration needs {needed} evaluations (limit {limit})")]
    OracleTooLarge { needed: f64, limit: f64 },
    #[error("policy selected prior {index} but only {priors} priors exist")]
    InvalidPolicyIndex { index: usize, priors: usize },
    #[error("target {target} lies outside [{lower}, {upper}]")]
    TargetOutOfRange { target: f64, lower: f64, upper: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("sample path is empty")]
    EmptyPath,
    #[error("window start {n0} is invalid for a path of length {len}")]
    BadWindow { n0: usize, len: usize },
    #[error("no paths supplied")]
    EmptyInput,
    #[error("could not parse input: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
