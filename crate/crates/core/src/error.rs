use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A distribution parameter lies outside its support.
    #[error("parameter `{name}` out of domain: {value}")]
    Domain { name: &'static str, value: f64 },

    /// Input data or configuration failed validation.
    #[error("validation error: {0}")]
    Validation(String),

    /// A referenced column or design term does not exist or has the wrong type.
    #[error("schema error: {0}")]
    Schema(String),

    /// The design matrix is not of full column rank.
    #[error("design matrix is rank deficient; dependent columns: {}", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    /// Cholesky factorization hit a non-positive pivot.
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    /// A Gibbs step produced a non-finite quantity or a failed factorization.
    #[error("numeric failure in {context} at iteration {iteration}: {detail}")]
    Numeric {
        context: String,
        iteration: usize,
        detail: String,
    },
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn schema(msg: impl Into<String>) -> Self {
        Error::Schema(msg.into())
    }

    /// True for failures caused by floating point breakdown rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric { .. } | Error::NotPositiveDefinite { .. })
    }
}
