use thiserror::Error;

use crate::estimators::EstimatorId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("normal equations are singular: design matrix is rank deficient at lambda = 0")]
    RankDeficient,

    #[error("leverage of row {row} is {leverage:.17}, too close to 1 for a leave-one-out fit")]
    LeverageSingular { row: usize, leverage: f64 },

    #[error("invalid design: {0}")]
    InvalidSpec(String),

    #[error("{estimator} requires a {expected} design")]
    SpecMismatch {
        estimator: EstimatorId,
        expected: &'static str,
    },

    #[error("enumeration of {count} assignments exceeds the limit of {limit}")]
    TooLarge { count: u128, limit: u128 },

    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

impl Error {
    /// Row index attached to the error, when the failure is tied to one unit.
    pub fn row(&self) -> Option<usize> {
        match self {
            Error::LeverageSingular { row, .. } => Some(*row),
            _ => None,
        }
    }

    /// Numeric failures as opposed to malformed input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient | Error::LeverageSingular { .. } | Error::Degenerate(_)
        )
    }
}
