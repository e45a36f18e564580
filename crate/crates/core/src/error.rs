use thiserror::Error;

use crate::patterns::ColorId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A numeric argument is outside its admissible range.
    #[error("parameter out of range: {0}")]
    Parameter(String),

    /// Malformed forbidden family (bad length, color, duplicate).
    #[error("invalid forbidden family: {0}")]
    Family(String),

    /// Weight vector with a non-positive or non-finite entry.
    #[error("invalid weights: {0}")]
    Weights(String),

    #[error("not sparse: no monochromatic forbidden chain for colors {missing:?}")]
    NotSparse { missing: Vec<ColorId> },

    #[error("state space too large: explored more than {limit} match states (full product {product})")]
    StateSpace { limit: usize, product: String },

    /// A search or enumeration budget was exhausted before completion.
    #[error("budget exceeded: {what} reached {reached} (limit {limit})")]
    Budget { what: String, limit: u64, reached: u64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("set is not independent: {0}")]
    NotIndependent(String),

    /// An inequality that must hold was found violated.
    #[error("counterexample: {0}")]
    Counterexample(String),
}

impl Error {
    pub(crate) fn budget(what: impl Into<String>, limit: u64, reached: u64) -> Self {
        Error::Budget { what: what.into(), limit, reached }
    }

    pub fn is_budget(&self) -> bool {
        matches!(self, Error::Budget { .. } | Error::StateSpace { .. })
    }
}
