use rug::Float;

use super::{finite, sqrt_two_pi, XReal};
use crate::error::{Error, Result};

const GUARD: u32 = 16;

/// Standard normal density at the precision of `x`.
pub fn norm_pdf(x: &XReal) -> Result<XReal> {
    let prec = x.prec();
    let wp = prec + GUARD;
    let half_sq = Float::with_val(wp, x.square_ref()) / 2u32;
    let e = Float::with_val(wp, (-half_sq.clone()).exp_ref());
    if e.is_zero() {
        // Underflow is only acceptable when the true value is negligible
        // at four times the working precision.
        let log2_value = -half_sq.to_f64() / std::f64::consts::LN_2;
        if log2_value < -4.0 * f64::from(prec) {
            return Ok(Float::with_val(prec, 0));
        }
        return Err(Error::NonFinite("norm_pdf underflow"));
    }
    finite(Float::with_val(prec, e / sqrt_two_pi(wp)), "norm_pdf")
}

/// Standard normal distribution function at the precision of `x`,
/// evaluated through the complementary error function so both tails keep
/// full relative accuracy.
pub fn norm_cdf(x: &XReal) -> Result<XReal> {
    let prec = x.prec();
    let wp = prec + GUARD;
    let sqrt2 = Float::with_val(wp, 2u32).sqrt();
    let arg = Float::with_val(wp, -x) / sqrt2;
    let v = arg.erfc() / 2u32;
    finite(Float::with_val(prec, v), "norm_cdf")
}
