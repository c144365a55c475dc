use thiserror::Error;

/// Errors surfaced by the arithmetic modules.
///
/// `ExactDivisionFailure` and `InvariantBreach` signal broken internal
/// invariants (they should be impossible on valid inputs) and map to exit
/// code 3 in the CLI; the others are ordinary input errors.
#[derive(Debug, Clone, Error)]
pub enum EngineError {
    #[error("p = 2 is not supported: the theory assumes p odd")]
    EvenPrime,
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("prime {p} divides the conductor {m} (ramified case not supported)")]
    Ramified { p: u64, m: u32 },
    #[error("precision underflow: operation needs precision >= {needed}, context has {have}")]
    PrecisionUnderflow { needed: u32, have: u32 },
    #[error("not a unit: {0}")]
    NotAUnit(String),
    #[error("context mismatch: {0}")]
    ContextMismatch(String),
    #[error("conductor mismatch: expected m = {expected}, got {got}")]
    ConductorMismatch { expected: u32, got: u32 },
    #[error("invalid gauge: {0}")]
    InvalidGauge(String),
    #[error("invalid metric: {0}")]
    InvalidMetric(String),
    #[error("unsupported ideal shape: {0}")]
    UnsupportedIdeal(String),
    #[error("no square root of -1 in the base ring (need p = 1 mod 4 or a cyclotomic base containing i)")]
    NoSqrtMinusOne,
    #[error("{0}")]
    InvalidInput(String),
    #[error("exact division by p^{0} failed: quantity is not divisible")]
    ExactDivisionFailure(u32),
    #[error("internal invariant breached: {0}")]
    InvariantBreach(String),
}

pub type Result<T> = std::result::Result<T, EngineError>;
