use thiserror::Error;

/// Errors raised by constructions and verifiers in this crate.
///
/// Every variant carries the values of the inequality or precondition that
/// failed, so a caller can print the violation without re-deriving it.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid group: {0}")]
    InvalidGroup(String),

    #[error("group mismatch: {left:?} vs {right:?}")]
    GroupMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("field size {q} exceeds cap {cap}")]
    FieldTooLarge { q: u128, cap: u64 },

    #[error("k = {k} does not divide q - 1 = {q_minus_one}")]
    NotDivisor { k: u64, q_minus_one: u64 },

    #[error("parameter search exceeded cap {cap}; minimal admissible cap is {required}")]
    CapExceeded { cap: u64, required: u128 },

    #[error("empty set: {0}")]
    EmptySet(&'static str),

    #[error("threshold violated: {what} (measured {measured}, required > {required})")]
    Threshold {
        what: String,
        measured: f64,
        required: f64,
    },

    #[error("no verified draw after {draws} attempts (seed {seed})")]
    RetryBudgetExhausted { draws: u32, seed: u64 },

    #[error("invariant ({invariant}) failed at step {step}: {detail}")]
    Invariant {
        invariant: String,
        step: usize,
        detail: String,
    },

    #[error("work budget exceeded at step {step}: needs {required} units, budget {budget}")]
    BudgetExceeded { step: usize, required: u128, budget: u128 },

    #[error("malformed input: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
