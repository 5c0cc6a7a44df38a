use thiserror::Error;

/// Errors raised by the analysis and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("objective is zero over the whole threshold grid (uninformative sensor)")]
    DegenerateObjective,

    #[error("{sensors} sensors exceed the exact-enumeration limit of {limit}")]
    TooManySensors { sensors: usize, limit: usize },

    #[error("finite capacity required for {0}")]
    InfiniteCapacity(&'static str),

    #[error("singular linear system at row {0}")]
    Singular(usize),

    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Checks that `value` is a probability in `[0, 1]`.
pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(invalid(name, format!("{value} is not in [0, 1]")))
    }
}
