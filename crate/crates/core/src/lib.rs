//! Extended-precision toolkit around Black-Scholes implied volatility:
//! pricing by two independent formulas, inversion, the unit-moneyness
//! time-value function and its inverse, truncated power series (univariate
//! and trivariate), asymptotic validators, and a linear-ODE guesser.

// Coefficient recurrences read most clearly with explicit indices.
#![allow(clippy::needless_range_loop)]

pub mod asymptotic;
pub mod black_scholes;
pub mod error;
pub mod guess;
pub mod implied;
pub mod precision;
pub mod series;

pub use error::{Error, Result};
pub use precision::{PrecisionConfig, XReal};
