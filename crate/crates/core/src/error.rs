use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("contraction violated: kappa1+kappa2={sum}")]
    Contraction { kappa1: f64, kappa2: f64, sum: f64 },

    /// The filtered intensities are all zero, so the statistic cannot be standardized.
    #[error("undecidable test: variance estimate is zero (all filtered intensities vanish)")]
    Undecidable,

    #[error("input error: {0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by invalid configuration or arguments rather than a failed run.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::Contraction { .. } | Error::Input(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
