//! Zero-rate, no-dividend European call pricing.
//!
//! Two independent routes are provided: the closed form through the normal
//! distribution function, and the integral representation
//! `C = (S-K)^+ + S ∫_0^{σ√T} N'(log(S/K)/v + v/2) dv`.

use rug::Float;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::precision::{integrate, norm_cdf, norm_pdf, positive, PrecisionConfig, XReal};

const GUARD: u32 = 64;

/// Arguments of the pricing formula.
#[derive(Clone, Debug, PartialEq)]
pub struct VolPoint {
    pub spot: XReal,
    pub strike: XReal,
    pub maturity: XReal,
    pub sigma: XReal,
}

impl VolPoint {
    pub fn new(spot: XReal, strike: XReal, maturity: XReal, sigma: XReal) -> Result<Self> {
        positive(&spot, "spot S")?;
        positive(&strike, "strike K")?;
        positive(&maturity, "maturity T")?;
        positive(&sigma, "volatility sigma")?;
        Ok(VolPoint {
            spot,
            strike,
            maturity,
            sigma,
        })
    }

    /// Working precision of the point (its coarsest field).
    pub fn prec(&self) -> u32 {
        self.spot
            .prec()
            .min(self.strike.prec())
            .min(self.maturity.prec())
            .min(self.sigma.prec())
    }

    pub fn with_sigma(&self, sigma: XReal) -> Result<Self> {
        VolPoint::new(self.spot.clone(), self.strike.clone(), self.maturity.clone(), sigma)
    }

    /// Total volatility `σ√T`.
    pub fn total_vol(&self) -> XReal {
        let wp = self.prec() + GUARD;
        let sqrt_t = Float::with_val(wp, self.maturity.sqrt_ref());
        Float::with_val(wp, &self.sigma * &sqrt_t)
    }

    /// `log(S/K)`.
    pub fn log_moneyness(&self) -> XReal {
        let wp = self.prec() + GUARD;
        let ratio = Float::with_val(wp, &self.spot / &self.strike);
        ratio.ln()
    }
}

/// Position of a call price relative to the no-arbitrage interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Inside,
    Boundary,
    Outside,
}

/// A call quote `(S, K, T, c)` strictly inside `(S-K)^+ < c < S`.
#[derive(Clone, Debug, PartialEq)]
pub struct Quote {
    pub spot: XReal,
    pub strike: XReal,
    pub maturity: XReal,
    pub call_price: XReal,
}

impl Quote {
    /// Validates the quote. Besides the open no-arbitrage interval, prices
    /// within `2^(-bits/2)·c` of either bound are rejected: there the
    /// time value (or the distance to `S`) has lost half of its digits.
    /// The margin is relative, so far out-of-the-money quotes with tiny but
    /// fully resolved prices are accepted.
    pub fn new(spot: XReal, strike: XReal, maturity: XReal, call_price: XReal) -> Result<Self> {
        positive(&spot, "spot S")?;
        positive(&strike, "strike K")?;
        positive(&maturity, "maturity T")?;
        let prec = spot.prec().min(strike.prec()).min(call_price.prec());
        let wp = prec + GUARD;
        let intrinsic = intrinsic_value(&spot, &strike, wp);
        if call_price <= intrinsic || call_price >= spot {
            let side = if call_price <= intrinsic { "lower" } else { "upper" };
            return Err(Error::domain(format!(
                "call price violates the {side} no-arbitrage bound (S-K)^+ < c < S: \
                 S = {}, K = {}, c = {}",
                spot.to_string_radix(10, Some(20)),
                strike.to_string_radix(10, Some(20)),
                call_price.to_string_radix(10, Some(20)),
            )));
        }
        let eps = Float::with_val(wp, 1) >> (prec / 2);
        let margin = Float::with_val(wp, &call_price * &eps);
        let to_lower = Float::with_val(wp, &call_price - &intrinsic);
        let to_upper = Float::with_val(wp, &spot - &call_price);
        if to_lower <= margin || to_upper <= margin {
            let side = if to_lower <= margin { "lower" } else { "upper" };
            return Err(Error::domain(format!(
                "call price within 2^-{} (relative) of the {side} bound of (S-K)^+ < c < S; \
                 implied volatility is not resolvable at {prec} bits",
                prec / 2
            )));
        }
        Ok(Quote {
            spot,
            strike,
            maturity,
            call_price,
        })
    }

    pub fn prec(&self) -> u32 {
        self.spot
            .prec()
            .min(self.strike.prec())
            .min(self.maturity.prec())
            .min(self.call_price.prec())
    }

    pub fn at_sigma(&self, sigma: XReal) -> Result<VolPoint> {
        VolPoint::new(self.spot.clone(), self.strike.clone(), self.maturity.clone(), sigma)
    }

    /// `c - (S-K)^+`.
    pub fn time_value(&self) -> XReal {
        let wp = self.prec() + GUARD;
        let intrinsic = intrinsic_value(&self.spot, &self.strike, wp);
        Float::with_val(wp, &self.call_price - intrinsic)
    }
}

/// `(S-K)^+` at `prec` bits.
pub fn intrinsic_value(spot: &XReal, strike: &XReal, prec: u32) -> XReal {
    let d = Float::with_val(prec, spot - strike);
    if d.is_sign_negative() {
        Float::with_val(prec, 0)
    } else {
        d
    }
}

/// `(d1, d2)`; `d2` is formed as `d1 - σ√T`.
pub fn d1_d2(p: &VolPoint) -> (XReal, XReal) {
    let prec = p.prec();
    let (d1, d2) = d1_d2_wide(p);
    (Float::with_val(prec, d1), Float::with_val(prec, d2))
}

fn d1_d2_wide(p: &VolPoint) -> (XReal, XReal) {
    let w = p.total_vol();
    let wp = w.prec();
    let l = p.log_moneyness();
    let d1 = Float::with_val(wp, &l / &w) + Float::with_val(wp, &w / 2u32);
    let d2 = Float::with_val(wp, &d1 - &w);
    (d1, d2)
}

/// Closed-form call price `S N(d1) - K N(d2)`.
pub fn bs_price(p: &VolPoint) -> Result<XReal> {
    let prec = p.prec();
    let wp = prec + GUARD;
    let tv = time_value_wide(p)?;
    let intrinsic = intrinsic_value(&p.spot, &p.strike, wp);
    Ok(Float::with_val(prec, intrinsic + tv))
}

/// Time value `C - (S-K)^+`, computed without cancellation against the
/// intrinsic value: for in-the-money calls it is the out-of-the-money put
/// `K N(-d2) - S N(-d1)`.
pub fn time_value(p: &VolPoint) -> Result<XReal> {
    Ok(Float::with_val(p.prec(), time_value_wide(p)?))
}

fn time_value_wide(p: &VolPoint) -> Result<XReal> {
    let (d1, d2) = d1_d2_wide(p);
    let wp = d1.prec();
    let spot = Float::with_val(wp, &p.spot);
    let strike = Float::with_val(wp, &p.strike);
    if p.spot > p.strike {
        let n1 = norm_cdf(&Float::with_val(wp, -&d1))?;
        let n2 = norm_cdf(&Float::with_val(wp, -&d2))?;
        Ok(Float::with_val(wp, &strike * &n2) - Float::with_val(wp, &spot * &n1))
    } else {
        let n1 = norm_cdf(&d1)?;
        let n2 = norm_cdf(&d2)?;
        Ok(Float::with_val(wp, &spot * &n1) - Float::with_val(wp, &strike * &n2))
    }
}

/// Call price through the integral representation, integrated numerically.
pub fn bs_price_roper(p: &VolPoint, cfg: &PrecisionConfig) -> Result<XReal> {
    let prec = cfg.working_bits;
    let wp = prec + GUARD;
    let l = p.log_moneyness();
    let l = Float::with_val(wp, &l);
    let upper = Float::with_val(prec, p.total_vol());
    let zero = Float::with_val(prec, 0);
    let integrand = |v: &XReal| -> Result<XReal> {
        if v.is_zero() {
            // N'(L/v + v/2) -> 0 as v -> 0+ for L != 0; for L = 0 it is N'(0).
            return if l.is_zero() {
                norm_pdf(&Float::with_val(v.prec(), 0))
            } else {
                Ok(Float::with_val(v.prec(), 0))
            };
        }
        let arg = Float::with_val(v.prec(), &l / v) + Float::with_val(v.prec(), v / 2u32);
        norm_pdf(&arg)
    };
    let integral = integrate(integrand, &zero, &upper, cfg)?;
    let intrinsic = intrinsic_value(&p.spot, &p.strike, wp);
    let spot = Float::with_val(wp, &p.spot);
    Ok(Float::with_val(prec, intrinsic + spot * integral))
}

/// Vega `S √T N'(d1)`.
pub fn vega(p: &VolPoint) -> Result<XReal> {
    let prec = p.prec();
    let (d1, _) = d1_d2_wide(p);
    let wp = d1.prec();
    let pdf = norm_pdf(&d1)?;
    let sqrt_t = Float::with_val(wp, p.maturity.sqrt_ref());
    Ok(Float::with_val(prec, Float::with_val(wp, &p.spot * sqrt_t) * pdf))
}

/// Classifies `c` against `(S-K)^+ < c < S`. Equality is judged within
/// `2^(-bits+8)·max(S, K)` at the precision of `c`.
pub fn check_arbitrage(spot: &XReal, strike: &XReal, call_price: &XReal) -> Verdict {
    let prec = call_price.prec().min(spot.prec()).min(strike.prec());
    let wp = prec + GUARD;
    let scale = Float::with_val(wp, spot.max_ref(strike));
    let tol = scale >> (prec - 8);
    let lower = intrinsic_value(spot, strike, wp);
    let to_lower = Float::with_val(wp, call_price - &lower);
    let to_upper = Float::with_val(wp, spot - call_price);
    let near = |d: &XReal| Float::with_val(wp, d.abs_ref()) <= tol;
    if near(&to_lower) || near(&to_upper) {
        Verdict::Boundary
    } else if to_lower.is_sign_positive() && to_upper.is_sign_positive() {
        Verdict::Inside
    } else {
        Verdict::Outside
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precision::{euler, pow2};

    fn cfg() -> PrecisionConfig {
        PrecisionConfig::new(256).unwrap()
    }

    fn point(s: f64, k: f64, t: f64, sigma: f64) -> VolPoint {
        let c = cfg();
        VolPoint::new(c.real(s), c.real(k), c.real(t), c.real(sigma)).unwrap()
    }

    fn abs_diff(a: &XReal, b: &XReal) -> XReal {
        Float::with_val(a.prec(), a - b).abs()
    }

    #[test]
    fn d1_d2_at_the_money() {
        let p = point(1.0, 1.0, 1.0, 0.3);
        let (d1, d2) = d1_d2(&p);
        assert_eq!(d1, cfg().real(0.15));
        assert_eq!(d2, cfg().real(-0.15));
    }

    #[test]
    fn d1_d2_at_unit_log_moneyness() {
        let c = cfg();
        let k = c.real(0.37);
        let s = Float::with_val(256, &k * euler(256));
        let p = VolPoint::new(s, k, c.real(1), c.real(1)).unwrap();
        let (d1, d2) = d1_d2(&p);
        assert!(abs_diff(&d1, &c.real(1.5)) <= pow2(-250));
        assert!(abs_diff(&d2, &c.real(0.5)) <= pow2(-250));
    }

    #[test]
    fn at_the_money_price_reduces_to_cdf() {
        let p = point(1.0, 1.0, 1.0, 0.2);
        let price = bs_price(&p).unwrap();
        let want = norm_cdf(&cfg().real(0.1)).unwrap() * 2u32 - 1u32;
        assert!(abs_diff(&price, &want) <= pow2(-250));
    }

    #[test]
    fn at_the_money_vega() {
        let p = point(1.0, 1.0, 1.0, 0.4);
        let v = vega(&p).unwrap();
        let want = norm_pdf(&cfg().real(0.2)).unwrap();
        assert!(abs_diff(&v, &want) <= pow2(-250));
    }

    #[test]
    fn roper_matches_closed_form() {
        let c = cfg();
        let p = point(1.0, 0.9, 1.0, 0.25);
        let a = bs_price(&p).unwrap();
        let b = bs_price_roper(&p, &c).unwrap();
        assert!(abs_diff(&a, &b) <= Float::with_val(64, &c.quad_rel_tol * 4u32));
    }

    #[test]
    fn roper_at_unit_log_moneyness_small_vol_is_tiny() {
        // Time value <= S·σ√T·max N' ~ e^{-1/(2·1e-6)}: far below 2^-64.
        let c = cfg();
        let s = euler(256);
        let p = VolPoint::new(s.clone(), c.real(1), c.real(1), c.real(1e-3)).unwrap();
        let price = bs_price_roper(&p, &c).unwrap();
        let tv = Float::with_val(256, &price - (s - 1u32));
        assert!(tv >= 0);
        assert!(tv < pow2(-64));
    }

    #[test]
    fn out_of_the_money_deep_tail_keeps_digits() {
        let p = point(1.0, 2.0, 1.0, 0.01);
        let price = bs_price(&p).unwrap();
        assert!(price > 0);
        // Closed form and integral agree in relative terms even at ~1e-10000.
        let c = cfg();
        let r = bs_price_roper(&p, &c).unwrap();
        let rel = Float::with_val(64, abs_diff(&price, &r) / &price);
        assert!(rel <= pow2(-150), "relative gap {rel}");
    }

    #[test]
    fn vega_matches_central_difference_at_second_order() {
        let p = point(1.1, 1.0, 0.5, 0.3);
        let v = vega(&p).unwrap();
        let mut errors = Vec::new();
        for k in 0..4 {
            let h = Float::with_val(256, 1e-3) >> k;
            let up = p.with_sigma(Float::with_val(256, &p.sigma + &h)).unwrap();
            let dn = p.with_sigma(Float::with_val(256, &p.sigma - &h)).unwrap();
            let fd = (bs_price(&up).unwrap() - bs_price(&dn).unwrap()) / (h * 2u32);
            errors.push(abs_diff(&fd, &v).to_f64());
        }
        for w in errors.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 2.0).abs() < 0.1, "observed order {order}");
        }
    }

    #[test]
    fn arbitrage_verdicts() {
        let c = cfg();
        assert_eq!(check_arbitrage(&c.real(1), &c.real(2), &c.real(0.5)), Verdict::Inside);
        assert_eq!(check_arbitrage(&c.real(1), &c.real(0.5), &c.real(0.5)), Verdict::Boundary);
        assert_eq!(check_arbitrage(&c.real(1), &c.real(1), &c.real(1)), Verdict::Boundary);
        assert_eq!(check_arbitrage(&c.real(1), &c.real(0.5), &c.real(0.4)), Verdict::Outside);
        assert_eq!(check_arbitrage(&c.real(1), &c.real(0.5), &c.real(1.2)), Verdict::Outside);
    }

    #[test]
    fn quote_rejects_bounds_with_message() {
        let c = cfg();
        let err = Quote::new(c.real(1), c.real(0.5), c.real(1), c.real(0.5)).unwrap_err();
        assert!(err.to_string().contains("(S-K)^+ < c < S"), "{err}");
        let err = Quote::new(c.real(1), c.real(2), c.real(1), c.real(1)).unwrap_err();
        assert!(err.to_string().contains("upper"), "{err}");
    }

    #[test]
    fn quote_rejects_unresolvable_time_value() {
        let c = cfg();
        // Time value 2^-200 on an intrinsic of 0.5: below 2^-128 relative.
        let price = c.real(0.5) + pow2(-200);
        let err = Quote::new(c.real(1), c.real(0.5), c.real(1), price).unwrap_err();
        assert!(err.to_string().contains("not resolvable"), "{err}");
        // Tiny out-of-the-money prices are fine: the bound is zero.
        assert!(Quote::new(c.real(1), c.real(2), c.real(1), Float::with_val(256, pow2(-200))).is_ok());
    }

    #[test]
    fn volpoint_requires_positive_inputs() {
        let c = cfg();
        assert!(VolPoint::new(c.real(1), c.real(1), c.real(1), c.real(0)).is_err());
        assert!(VolPoint::new(c.real(-1), c.real(1), c.real(1), c.real(0.2)).is_err());
    }
}
