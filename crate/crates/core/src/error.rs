use thiserror::Error;

/// Errors raised by the density core, weight families, samplers and verifier.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("all weights are zero (every log-weight is -inf)")]
    DegenerateWeights,

    #[error("weight of arity {arity} is unbounded: proposal density vanishes at the evaluated point")]
    UnboundedWeight { arity: usize },

    #[error("lambda function returned a non-positive or non-finite value at arity {arity}")]
    InvalidLambda { arity: usize },

    #[error("proposal index {needed} requested but the sequence only defines {available}")]
    MissingProposal { needed: usize, available: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("state is outside the target support (log density is -inf)")]
    OutOfSupport,

    #[error("enumeration needs {terms} terms, above the limit of {limit}")]
    Intractable { terms: u128, limit: u128 },

    #[error("kernel is not ergodic: {0}")]
    NotErgodic(String),

    #[error("power iteration did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("invalid model: {0}")]
    Model(String),

    #[error("step {index}: {source}")]
    Step {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

/// Rejects NaN and +inf; -inf is a legal log density.
pub(crate) fn check_log(value: f64, what: &str) -> Result<f64> {
    if value.is_nan() || value == f64::INFINITY {
        Err(Error::Numeric(format!("{what} evaluated to {value}")))
    } else {
        Ok(value)
    }
}
