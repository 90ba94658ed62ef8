//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by field construction, planning, and mission execution.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration or argument failed validation.
    #[error("validation: {0}")]
    Validation(String),

    /// A text document (field map, plan CSV, scenario) could not be parsed.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// The requested lethality cannot be reached under the given recipe.
    #[error("unreachable lethality target: {0}")]
    UnreachableTarget(String),

    /// Reported weed cells that no array pose can put a source over.
    #[error("cells unreachable by any array pose: {0:?}")]
    UnreachableCells(Vec<(usize, usize)>),

    /// A metric was requested on an empty sample.
    #[error("undefined metric: {0}")]
    UndefinedMetric(&'static str),

    /// The exhaustive planner refused an instance above its size guard.
    #[error("instance too large for exhaustive search: {0}")]
    InstanceTooLarge(String),

    /// A sweep named a parameter that is not sweepable.
    #[error("unknown sweep axis {axis:?}; sweepable axes: {known}")]
    UnknownAxis { axis: String, known: &'static str },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
