use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes shared by every module of the crate.
///
/// Domain errors mean the caller asked for something outside the
/// mathematical domain of an operation; everything else is a numerical
/// failure of a well-posed request.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("quadrature did not converge after {levels} levels (estimated relative error {estimate:e})")]
    QuadratureNonConvergence { levels: u32, estimate: f64 },

    #[error("target is not bracketed: g(lo) - target = {at_lo:e}, g(hi) - target = {at_hi:e}")]
    NotBracketed { at_lo: f64, at_hi: f64 },

    #[error("root finder did not converge after {iterations} iterations (bracket width {width:e})")]
    RootNonConvergence { iterations: u32, width: f64 },

    #[error("series: {0}")]
    Series(String),

    #[error("series Newton iteration stagnated at iteration {iteration}: residual valuation stuck at {valuation}")]
    Stagnation { iteration: u32, valuation: u32 },

    #[error("precision exhausted: indeterminate cells remain; rerun with at least {required_bits} working bits")]
    PrecisionExhausted { required_bits: u32 },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn series(msg: impl Into<String>) -> Self {
        Error::Series(msg.into())
    }

    /// True for errors caused by the request rather than by the numerics.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Domain(_) | Error::InvalidConfig(_))
    }
}
