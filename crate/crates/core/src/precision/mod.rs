//! Numeric kernel shared by every other module: the extended-precision
//! scalar, the precision configuration, the standard normal functions, a
//! double-exponential quadrature and a safeguarded monotone root finder.

mod normal;
mod quad;
mod root;

pub use normal::{norm_cdf, norm_pdf};
pub use quad::{integrate, integrate_domain, Domain, Quadrature};
pub use root::{solve_monotone, solve_monotone_from, Probe, Root};

use rug::float::Constant;
use rug::Float;

use crate::error::{Error, Result};

/// Extended-precision real. The precision travels with the value.
pub type XReal = Float;

/// Smallest working precision accepted anywhere in the crate.
pub const MIN_BITS: u32 = 64;

/// Default working precision.
pub const DEFAULT_BITS: u32 = 256;

/// Working precision and error targets for one computation.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecisionConfig {
    pub working_bits: u32,
    /// Relative error target of [`integrate`].
    pub quad_rel_tol: XReal,
    /// Relative step threshold of [`solve_monotone`].
    pub root_rel_tol: XReal,
}

impl PrecisionConfig {
    /// Configuration at `bits` with both tolerances at `2^(-3 bits / 4)`.
    pub fn new(bits: u32) -> Result<Self> {
        let tol = pow2(-(tol_exponent(bits) as i32));
        Self::with_tolerances(bits, tol.clone(), tol)
    }

    pub fn with_tolerances(bits: u32, quad_rel_tol: XReal, root_rel_tol: XReal) -> Result<Self> {
        if bits < MIN_BITS {
            return Err(Error::InvalidConfig(format!(
                "working_bits must be at least {MIN_BITS}, got {bits}"
            )));
        }
        let ceiling = pow2(-32);
        for (name, tol) in [("quad_rel_tol", &quad_rel_tol), ("root_rel_tol", &root_rel_tol)] {
            if !tol.is_finite() || *tol <= 0 || *tol > ceiling {
                return Err(Error::InvalidConfig(format!(
                    "{name} must lie in (0, 2^-32], got {}",
                    tol.to_string_radix(10, Some(6))
                )));
            }
        }
        Ok(PrecisionConfig {
            working_bits: bits,
            quad_rel_tol,
            root_rel_tol,
        })
    }

    /// Same tolerances policy, different precision.
    pub fn at_bits(&self, bits: u32) -> Result<Self> {
        let default_exp = tol_exponent(self.working_bits) as i64;
        let quad = rescale_tol(&self.quad_rel_tol, default_exp, bits);
        let root = rescale_tol(&self.root_rel_tol, default_exp, bits);
        Self::with_tolerances(bits, quad, root)
    }

    pub fn with_quad_tol(mut self, tol: XReal) -> Result<Self> {
        self.quad_rel_tol = tol;
        Self::with_tolerances(self.working_bits, self.quad_rel_tol, self.root_rel_tol)
    }

    pub fn with_root_tol(mut self, tol: XReal) -> Result<Self> {
        self.root_rel_tol = tol;
        Self::with_tolerances(self.working_bits, self.quad_rel_tol, self.root_rel_tol)
    }

    pub fn prec(&self) -> u32 {
        self.working_bits
    }

    /// Converts any rug-assignable value at the working precision.
    pub fn real<T>(&self, v: T) -> XReal
    where
        Float: rug::Assign<T>,
    {
        Float::with_val(self.working_bits, v)
    }

    /// `2^(-working_bits/2)`, the near-boundary rejection distance.
    pub fn half_precision_eps(&self) -> XReal {
        Float::with_val(self.working_bits, 1) >> (self.working_bits / 2)
    }
}

impl Default for PrecisionConfig {
    fn default() -> Self {
        PrecisionConfig::new(DEFAULT_BITS).expect("default precision is valid")
    }
}

fn tol_exponent(bits: u32) -> u32 {
    (bits * 3 / 4).max(32)
}

// A tolerance set at the default exponent follows the precision; a
// custom one is kept as long as it stays valid.
fn rescale_tol(tol: &XReal, default_exp: i64, bits: u32) -> XReal {
    if *tol == pow2(-(default_exp as i32)) {
        pow2(-(tol_exponent(bits) as i32))
    } else {
        tol.clone()
    }
}

/// `2^e` as a 64-bit float (exact).
pub fn pow2(e: i32) -> XReal {
    let one = Float::with_val(64, 1);
    if e >= 0 {
        one << e as u32
    } else {
        one >> (-e) as u32
    }
}

/// π at `prec` bits.
pub fn pi(prec: u32) -> XReal {
    Float::with_val(prec, Constant::Pi)
}

/// Euler's number at `prec` bits.
pub fn euler(prec: u32) -> XReal {
    Float::with_val(prec, 1).exp()
}

/// √(2π) at `prec` bits.
pub fn sqrt_two_pi(prec: u32) -> XReal {
    let two_pi = pi(prec + 8) * 2u32;
    Float::with_val(prec, two_pi.sqrt())
}

/// Rejects NaN and infinities.
pub fn finite(x: XReal, what: &'static str) -> Result<XReal> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Requires `x > 0` (and finite).
pub fn positive(x: &XReal, what: &str) -> Result<()> {
    if !x.is_finite() || *x <= 0 {
        return Err(Error::domain(format!(
            "{what} must be positive, got {}",
            x.to_string_radix(10, Some(12))
        )));
    }
    Ok(())
}

/// Decimal digits that round-trip a value of `prec` bits.
pub fn decimal_digits(prec: u32) -> usize {
    (f64::from(prec) * std::f64::consts::LOG10_2).ceil() as usize + 1
}

/// Decimal string of `x` carrying all of its bits.
pub fn to_decimal(x: &XReal) -> String {
    x.to_string_radix(10, Some(decimal_digits(x.prec())))
}

/// Decimal string with a fixed number of significant digits.
pub fn to_decimal_digits(x: &XReal, digits: usize) -> String {
    x.to_string_radix(10, Some(digits.max(1)))
}
