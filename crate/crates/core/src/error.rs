use thiserror::Error;

pub type Result<T> = std::result::Result<T, RabiError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RabiError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The Fock cutoff cannot represent the requested state or spectrum.
    #[error("truncation too small: n_max = {n_max}, need at least {required} ({reason})")]
    TruncationTooSmall {
        n_max: usize,
        required: usize,
        reason: String,
    },

    #[error("resource limit: {what} ({requested} > {limit})")]
    ResourceLimit {
        what: &'static str,
        requested: u128,
        limit: u128,
    },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("quadrature is only implemented for m <= 3, got m = {0}")]
    UnsupportedOrder(usize),

    #[error("outside validated domain: {0}")]
    Domain(String),
}

impl RabiError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        RabiError::InvalidArgument(msg.into())
    }
}
