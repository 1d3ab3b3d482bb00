use thiserror::Error;

pub type Result<T, E = WrsError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WrsError {
    #[error("item {seq}: weight must be strictly positive, got {weight}")]
    NonPositiveWeight { seq: u64, weight: f64 },
    #[error("item {seq}: weight must be finite")]
    NonFiniteWeight { seq: u64 },
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("out-of-order feed: seq {got} after {last}")]
    OutOfOrderFeed { last: u64, got: u64 },
    #[error("uniform draw {0} is outside the open interval (0, 1)")]
    InvalidUniform(f64),
    #[error("item {0} is not in the reservoir")]
    NotInReservoir(u64),
    #[error("multiplicity {k} must lie in 1..={m}")]
    BadMultiplicity { k: usize, m: usize },
    #[error("sample size must be at least 1")]
    ZeroCapacity,
    #[error("{0}")]
    BackendMismatch(&'static str),
    #[error("bias multiplier for item {seq} must be finite and positive, got {value}")]
    InvalidBias { seq: u64, value: f64 },
    #[error("instance too large for exact enumeration: n={n}, m={m}")]
    TooLarge { n: usize, m: usize },
    #[error("sample size {m} exceeds population size {n}")]
    SampleLargerThanPopulation { n: usize, m: usize },
    #[error("length mismatch: expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}
