//! Implied volatility, its restriction to the curve `S = eK`, `c = ĉ(K)`,
//! and the auxiliary function `F(x) = ∫_0^x N'(1/v + v/2) dv` with its
//! inverse. Along that curve `√T · f(K) = F⁻¹(K)`.

use rug::Float;

use crate::black_scholes::{time_value, vega, Quote, VolPoint};
use crate::error::{Error, Result};
use crate::precision::{
    euler, integrate, norm_cdf, norm_pdf, positive, solve_monotone_from, PrecisionConfig, Probe,
    XReal,
};

const GUARD: u32 = 32;

/// Above this abscissa `F` is evaluated from its exact tail instead of by
/// quadrature.
pub const F_TAIL_CROSSOVER: f64 = 40.0;

/// Initial volatility bracket `[2^-40, 2^12]`.
const SIGMA_LO_EXP: i32 = -40;
const SIGMA_HI_EXP: i32 = 12;
const MAX_EXPANSIONS: u32 = 64;

/// Strike and maturity of a point on the curve `S = eK`, `c = ĉ(K)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpecializationPoint {
    pub strike: XReal,
    pub maturity: XReal,
}

impl SpecializationPoint {
    /// Requires `0 < K < 1/e` and `T > 0`.
    pub fn new(strike: XReal, maturity: XReal) -> Result<Self> {
        positive(&maturity, "maturity T")?;
        check_unit_interval(&strike, "strike K")?;
        Ok(SpecializationPoint { strike, maturity })
    }

    /// The call quote `(eK, K, T, ĉ(K))`.
    pub fn quote(&self) -> Result<Quote> {
        let prec = self.strike.prec();
        let spot = Float::with_val(prec, &self.strike * euler(prec + GUARD));
        Quote::new(spot, self.strike.clone(), self.maturity.clone(), c_hat(&self.strike)?)
    }
}

fn check_unit_interval(y: &XReal, what: &str) -> Result<()> {
    let inv_e = Float::with_val(y.prec() + GUARD, euler(y.prec() + GUARD).recip_ref());
    if !y.is_finite() || *y <= 0 || *y >= inv_e {
        return Err(Error::domain(format!(
            "{what} must lie in (0, 1/e), got {}",
            y.to_string_radix(10, Some(20))
        )));
    }
    Ok(())
}

/// Implied volatility: the `σ > 0` with `C_BS(S, K, T, σ) = c`.
///
/// The equation is solved on `log(C - (S-K)^+)`, whose slope in `σ` is
/// `vega / time value`; this keeps Newton well scaled from the far wings
/// to the at-the-money region.
pub fn implied_vol(q: &Quote, cfg: &PrecisionConfig) -> Result<XReal> {
    let wp = cfg.working_bits;
    let target_tv = Float::with_val(wp + GUARD, q.time_value());
    let target = Float::with_val(wp, target_tv.ln_ref());
    let base = q.at_sigma(Float::with_val(wp, 1))?;
    let base = VolPoint {
        spot: Float::with_val(wp, &base.spot),
        strike: Float::with_val(wp, &base.strike),
        maturity: Float::with_val(wp, &base.maturity),
        sigma: base.sigma,
    };
    let probe = |sigma: &XReal| -> Result<Probe> {
        let p = VolPoint { sigma: sigma.clone(), ..base.clone() };
        let tv = time_value(&p)?;
        if tv.is_zero() || tv.is_sign_negative() {
            return Ok(Probe::value(Float::with_val(wp, f64::NEG_INFINITY)));
        }
        let slope = Float::with_val(wp, vega(&p)? / &tv);
        Ok(Probe::with_slope(tv.ln(), slope))
    };

    let (lo, hi) = bracket_sigma(probe, &target, wp)?;
    let seed = sigma_seed(&base, &target_tv, wp);
    let root = solve_monotone_from(probe, &target, &lo, &hi, Some(&seed), cfg)?;
    Ok(root.x)
}

fn bracket_sigma<G>(mut g: G, target: &XReal, wp: u32) -> Result<(XReal, XReal)>
where
    G: FnMut(&XReal) -> Result<Probe>,
{
    let mut lo = Float::with_val(wp, 1) >> (-SIGMA_LO_EXP) as u32;
    let mut hi = Float::with_val(wp, 1) << SIGMA_HI_EXP as u32;
    for _ in 0..MAX_EXPANSIONS {
        if g(&lo)?.value < *target {
            break;
        }
        lo >>= 16;
    }
    for _ in 0..MAX_EXPANSIONS {
        if g(&hi)?.value > *target {
            break;
        }
        hi <<= 4;
    }
    let (at_lo, at_hi) = (g(&lo)?.value, g(&hi)?.value);
    if at_lo >= *target || at_hi <= *target {
        return Err(Error::NotBracketed {
            at_lo: Float::with_val(64, &at_lo - target).to_f64(),
            at_hi: Float::with_val(64, &at_hi - target).to_f64(),
        });
    }
    Ok((lo, hi))
}

/// Near the money `σ ≈ c√(2π)/(S√T)`; elsewhere the small-time-value
/// asymptotics `σ√T ≈ |log(S/K)| / √(2 log(S/tv))`.
fn sigma_seed(p: &VolPoint, tv: &XReal, wp: u32) -> XReal {
    let l = p.log_moneyness();
    let sqrt_t = Float::with_val(wp, p.maturity.sqrt_ref());
    if Float::with_val(wp, l.abs_ref()) < 0.1 {
        let price = Float::with_val(wp, tv + crate::black_scholes::intrinsic_value(&p.spot, &p.strike, wp));
        let root_two_pi = crate::precision::sqrt_two_pi(wp);
        return price * root_two_pi / Float::with_val(wp, &p.spot * &sqrt_t);
    }
    let ratio = Float::with_val(wp, &p.spot / tv);
    let log_ratio = ratio.ln();
    if log_ratio <= 0 {
        return Float::with_val(wp, 1);
    }
    let denom = Float::with_val(wp, log_ratio * 2u32).sqrt();
    Float::with_val(wp, l.abs()) / denom / sqrt_t
}

/// `ĉ(K) = (e-1)K + eK²`.
pub fn c_hat(strike: &XReal) -> Result<XReal> {
    positive(strike, "strike K")?;
    let prec = strike.prec();
    let wp = prec + GUARD;
    let e = euler(wp);
    let k = Float::with_val(wp, strike);
    let linear = Float::with_val(wp, &e - 1u32) * &k;
    let quadratic = e * Float::with_val(wp, k.square_ref());
    Ok(Float::with_val(prec, linear + quadratic))
}

/// `f(K) = I(eK, K, ĉ(K))`.
pub fn f_eval(p: &SpecializationPoint, cfg: &PrecisionConfig) -> Result<XReal> {
    implied_vol(&p.quote()?, cfg)
}

/// `F(x) = ∫_0^x N'(1/v + v/2) dv`, a bijection `(0, ∞) → (0, 1/e)`.
///
/// Computed by quadrature up to [`F_TAIL_CROSSOVER`]; beyond it as
/// `1/e - (N(1/x - x/2)/e + N(-1/x - x/2))`, the exact integral of the
/// remaining tail.
pub fn aux_f(x: &XReal, cfg: &PrecisionConfig) -> Result<XReal> {
    positive(x, "x")?;
    let prec = cfg.working_bits;
    if *x > F_TAIL_CROSSOVER {
        let wp = prec + GUARD;
        let tail = aux_f_tail(&Float::with_val(wp, x))?;
        let inv_e = Float::with_val(wp, euler(wp).recip_ref());
        return Ok(Float::with_val(prec, inv_e - tail));
    }
    let zero = Float::with_val(prec, 0);
    let upper = Float::with_val(prec, x);
    integrate(aux_f_integrand, &zero, &upper, cfg)
}

/// `N'(1/v + v/2)`, extended by its limit 0 at `v = 0`.
pub fn aux_f_integrand(v: &XReal) -> Result<XReal> {
    if v.is_zero() {
        return Ok(Float::with_val(v.prec(), 0));
    }
    let arg = Float::with_val(v.prec(), v.recip_ref()) + Float::with_val(v.prec(), v / 2u32);
    norm_pdf(&arg)
}

/// `1/e - F(x) = ∫_x^∞ N'(1/v + v/2) dv = N(1/x - x/2)/e + N(-1/x - x/2)`.
fn aux_f_tail(x: &XReal) -> Result<XReal> {
    let wp = x.prec();
    let inv = Float::with_val(wp, x.recip_ref());
    let half = Float::with_val(wp, x / 2u32);
    let a = norm_cdf(&Float::with_val(wp, &inv - &half))?;
    let b = norm_cdf(&Float::with_val(wp, -(inv + half)))?;
    Ok(a / euler(wp) + b)
}

/// `F⁻¹ : (0, 1/e) → (0, ∞)`.
///
/// Solved on `log F`, whose slope `N'(1/x + x/2)/F(x)` stays moderate as
/// `x → 0⁺` where `F` itself vanishes faster than any power. Since
/// `F(x) ≤ e^(-1/(2x²))` for small `x`, `1/√(2 log(1/y))` bounds the root
/// from below.
pub fn aux_f_inv(y: &XReal, cfg: &PrecisionConfig) -> Result<XReal> {
    check_unit_interval(y, "y")?;
    let wp = cfg.working_bits;
    let y = Float::with_val(wp, y);
    let target = Float::with_val(wp, y.ln_ref());
    let probe = |x: &XReal| -> Result<Probe> {
        let fx = aux_f(x, cfg)?;
        if fx.is_zero() {
            return Ok(Probe::value(Float::with_val(wp, f64::NEG_INFINITY)));
        }
        let slope = Float::with_val(wp, aux_f_integrand(x)? / &fx);
        Ok(Probe::with_slope(fx.ln(), slope))
    };

    let log_inv = Float::with_val(wp, -&target);
    let lower_bound = Float::with_val(wp, log_inv * 2u32).sqrt().recip();
    let mut lo = Float::with_val(wp, &lower_bound / 2u32);
    let mut hi = Float::with_val(wp, 1).max(&Float::with_val(wp, &lower_bound * 4u32));
    for _ in 0..MAX_EXPANSIONS {
        if probe(&lo)?.value < target {
            break;
        }
        lo >>= 1;
    }
    for _ in 0..MAX_EXPANSIONS {
        if probe(&hi)?.value > target {
            break;
        }
        hi <<= 1;
    }
    let seed = lower_bound;
    Ok(solve_monotone_from(probe, &target, &lo, &hi, Some(&seed), cfg)?.x)
}

/// Error budget for comparing `√T·f(K)` with `F⁻¹(K)` at `x = F⁻¹(K)`:
/// the root tolerance plus the quadrature tolerance amplified by the
/// condition number `F(x) / (x F'(x))` of the inversion.
pub fn combined_tolerance(x: &XReal, cfg: &PrecisionConfig) -> Result<XReal> {
    let wp = cfg.working_bits;
    let fx = aux_f(x, cfg)?;
    let dfx = aux_f_integrand(x)?;
    let kappa = Float::with_val(wp, &fx / Float::with_val(wp, x * &dfx));
    let scale = Float::with_val(wp, x.abs_ref()).max(&Float::with_val(wp, 1));
    let budget = Float::with_val(wp, &cfg.quad_rel_tol * kappa) + &cfg.root_rel_tol;
    Ok(budget * scale * 8u32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::black_scholes::bs_price;
    use crate::precision::pow2;

    fn cfg() -> PrecisionConfig {
        PrecisionConfig::new(256).unwrap()
    }

    fn abs_diff(a: &XReal, b: &XReal) -> XReal {
        Float::with_val(a.prec(), a - b).abs()
    }

    /// `F` from its closed form `N(x/2 - 1/x)/e - N(-1/x - x/2)`, an
    /// antiderivative of the integrand checked by differentiation.
    fn closed_form_f(x: &XReal) -> XReal {
        let wp = x.prec() + 64;
        let x = Float::with_val(wp, x);
        let inv = Float::with_val(wp, x.recip_ref());
        let half = Float::with_val(wp, &x / 2u32);
        let a = norm_cdf(&Float::with_val(wp, &half - &inv)).unwrap();
        let b = norm_cdf(&Float::with_val(wp, -(inv + half))).unwrap();
        a / euler(wp) - b
    }

    #[test]
    fn c_hat_values() {
        let c = cfg();
        let e = euler(256);
        let k = Float::with_val(256, e.recip_ref()) / 2u32;
        let want = Float::with_val(256, 0.5) - Float::with_val(256, e.recip_ref()) / 4u32;
        assert!(abs_diff(&c_hat(&k).unwrap(), &want) <= pow2(-250));
        let k = Float::with_val(256, e.recip_ref());
        assert!(abs_diff(&c_hat(&k).unwrap(), &c.real(1)) <= pow2(-250));
    }

    #[test]
    fn c_hat_strictly_between_bounds() {
        let e = euler(256);
        for i in 1..50 {
            let k = Float::with_val(256, e.recip_ref()) * f64::from(i) / 50.0;
            let v = c_hat(&k).unwrap();
            let lower = Float::with_val(256, &e - 1u32) * &k;
            let upper = Float::with_val(256, &e * &k);
            assert!(lower < v && v < upper, "K = {i}/50e");
        }
    }

    #[test]
    fn aux_f_matches_closed_form() {
        let c = cfg();
        for x in [0.05, 0.1, 0.3, 1.0, 2.5, 7.0, 30.0, 45.0] {
            let x = c.real(x);
            let got = aux_f(&x, &c).unwrap();
            let want = closed_form_f(&x);
            let rel = Float::with_val(64, abs_diff(&got, &Float::with_val(256, &want)) / &want);
            assert!(rel <= Float::with_val(64, &c.quad_rel_tol * 4u32), "x = {x}: rel {rel}");
        }
    }

    #[test]
    fn aux_f_reference_values() {
        let c = cfg();
        let got = aux_f(&c.real(1), &c).unwrap().to_f64();
        assert!((got - 0.046_697_416_058_070_24).abs() < 1e-16);
        let got = aux_f(&c.real(0.2), &c).unwrap().to_f64();
        assert!((got / 6.454_935_295_987_73e-9 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn aux_f_small_argument_bound() {
        let c = cfg();
        let got = aux_f(&c.real(0.05), &c).unwrap();
        assert!(got < Float::with_val(256, -200i32).exp());
        assert!(got > 0);
    }

    #[test]
    fn aux_f_large_argument_near_limit() {
        let c = cfg();
        let inv_e = Float::with_val(256, euler(256).recip_ref());
        // The gap at 50 is ~1e-138, below one ulp of 1/e at 256 bits.
        let got = aux_f(&c.real(50), &c).unwrap();
        assert!(got <= inv_e);
        assert!(abs_diff(&got, &inv_e) < 1e-6);
    }

    #[test]
    fn aux_f_continuous_across_tail_crossover() {
        let c = cfg();
        let below = aux_f(&c.real(F_TAIL_CROSSOVER), &c).unwrap();
        let above = aux_f(&(Float::with_val(256, F_TAIL_CROSSOVER) + pow2(-100)), &c).unwrap();
        assert!(above >= below);
        assert!(abs_diff(&above, &below) <= pow2(-190));
    }

    #[test]
    fn aux_f_inv_round_trip() {
        let c = cfg();
        let y = aux_f(&c.real(1), &c).unwrap();
        let x = aux_f_inv(&y, &c).unwrap();
        assert!(abs_diff(&x, &c.real(1)) <= Float::with_val(64, &c.root_rel_tol * 4u32));
    }

    #[test]
    fn aux_f_inv_lies_above_log_bound() {
        // F(x) <= e^{-1/(2x^2)} forces F⁻¹(y) >= 1/√(2 log(1/y)).
        let c = cfg();
        let y = c.real(1e-8);
        let x = aux_f_inv(&y, &c).unwrap();
        let bound = 1.0 / (2.0 * (1e8f64).ln()).sqrt();
        assert!(x.to_f64() >= bound);
        assert!((x.to_f64() - 0.203_220_549_116_429_4).abs() < 1e-12);
    }

    #[test]
    fn aux_f_inv_rejects_outside_range() {
        let c = cfg();
        assert!(aux_f_inv(&c.real(0), &c).unwrap_err().is_usage());
        assert!(aux_f_inv(&c.real(0.5), &c).unwrap_err().is_usage());
    }

    #[test]
    fn implied_vol_round_trip_at_the_money() {
        let c = cfg();
        let p = VolPoint::new(c.real(1), c.real(1), c.real(1), c.real(0.2)).unwrap();
        let price = bs_price(&p).unwrap();
        let q = Quote::new(c.real(1), c.real(1), c.real(1), price).unwrap();
        let sigma = implied_vol(&q, &c).unwrap();
        assert!(abs_diff(&sigma, &c.real(0.2)) <= c.root_rel_tol);
    }

    #[test]
    fn implied_vol_near_upper_bound() {
        let c = cfg();
        let price = c.real(1) - c.real(1e-6);
        let q = Quote::new(c.real(1), c.real(2), c.real(1), price.clone()).unwrap();
        let sigma = implied_vol(&q, &c).unwrap();
        assert!(sigma > 5);
        let back = bs_price(&q.at_sigma(sigma).unwrap()).unwrap();
        let rel = Float::with_val(64, abs_diff(&back, &price) / &price);
        assert!(rel <= pow2(-150), "{rel}");
    }

    #[test]
    fn implied_vol_deep_wings() {
        let c = cfg();
        for (s, k, sigma) in [(1.0, 10.0, 0.05), (10.0, 1.0, 0.6), (1.0, 1000.0, 0.3), (1000.0, 1.0, 2.0)] {
            let p = VolPoint::new(c.real(s), c.real(k), c.real(1), c.real(sigma)).unwrap();
            let q = Quote::new(c.real(s), c.real(k), c.real(1), bs_price(&p).unwrap()).unwrap();
            let got = implied_vol(&q, &c).unwrap();
            assert!(abs_diff(&got, &c.real(sigma)) <= c.root_rel_tol, "{s} {k} {sigma}");
        }
    }

    #[test]
    fn two_paths_agree_at_half_inverse_e() {
        let c = cfg();
        let k = Float::with_val(256, euler(256).recip_ref()) / 2u32;
        let x = aux_f_inv(&k, &c).unwrap();
        let tol = combined_tolerance(&x, &c).unwrap();
        for t in [1u32, 2] {
            let p = SpecializationPoint::new(k.clone(), c.real(t)).unwrap();
            let f = f_eval(&p, &c).unwrap();
            let scaled = Float::with_val(256, c.real(t).sqrt() * f);
            assert!(abs_diff(&scaled, &x) <= tol, "T = {t}");
        }
    }

    #[test]
    fn f_scales_with_inverse_root_maturity() {
        let c = cfg();
        let f1 = f_eval(&SpecializationPoint::new(c.real(0.1), c.real(1)).unwrap(), &c).unwrap();
        let f4 = f_eval(&SpecializationPoint::new(c.real(0.1), c.real(4)).unwrap(), &c).unwrap();
        let ratio = Float::with_val(256, &f1 / &f4);
        assert!(abs_diff(&ratio, &c.real(2)) <= Float::with_val(64, &c.root_rel_tol * 8u32));
    }

    #[test]
    fn specialization_point_domain() {
        let c = cfg();
        assert!(SpecializationPoint::new(c.real(0.4), c.real(1)).is_err());
        assert!(SpecializationPoint::new(c.real(0), c.real(1)).is_err());
        assert!(SpecializationPoint::new(c.real(0.2), c.real(0)).is_err());
    }
}
