use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite value for {0}")]
    NonFinite(&'static str),

    #[error("{name} = {value} is out of range: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("zero-length vector cannot be normalized")]
    ZeroVector,

    #[error("no revival detuning exists: rabi frequency x pulse length = {0} > 1")]
    NoRevival(f64),

    #[error("invalid spin quantum number {0}: twice the spin must be a non-negative integer")]
    InvalidSpin(f64),

    #[error("Hilbert space dimension {0} exceeds the supported maximum of 16")]
    DimensionOverflow(usize),

    #[error("matrix is not Hermitian (relative asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("grid must be non-empty, finite and sorted: {0}")]
    InvalidGrid(&'static str),

    #[error("{0}")]
    InvalidInput(String),
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            reason,
        }
    }
}

/// Rejects NaN and infinities.
pub(crate) fn finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(name))
    }
}
