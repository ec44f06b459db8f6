//! Truncated power series with extended-precision coefficients, and the
//! local expansions of `F`, `F⁻¹` and `f` built from them.

mod tri;

pub use tri::{substitute_specialize, tri_series_i, tri_series_i_at, TriSeries};

use rug::Float;
use serde::ser::{Serialize, SerializeStruct, Serializer};

use crate::error::{Error, Result};
use crate::implied::{aux_f, aux_f_inv};
use crate::precision::{euler, norm_pdf, positive, to_decimal, PrecisionConfig, XReal};

const GUARD: u32 = 32;

/// `Σ c_n (x - center)^n`, truncated after `order`.
///
/// Every coefficient carries the precision of the series.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerSeries {
    center: XReal,
    coeffs: Vec<XReal>,
}

impl PowerSeries {
    /// Rounds every coefficient (and the center) to the coarsest precision
    /// present.
    pub fn new(center: XReal, coeffs: Vec<XReal>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::series("a series needs at least one coefficient"));
        }
        if coeffs.iter().any(|c| !c.is_finite()) || !center.is_finite() {
            return Err(Error::NonFinite("series coefficient"));
        }
        let prec = coeffs.iter().map(Float::prec).min().expect("non-empty").min(center.prec());
        Ok(Self::from_parts(prec, center, coeffs))
    }

    fn from_parts(prec: u32, center: XReal, coeffs: Vec<XReal>) -> Self {
        let round = |x: XReal| if x.prec() == prec { x } else { Float::with_val(prec, &x) };
        PowerSeries {
            center: round(center),
            coeffs: coeffs.into_iter().map(round).collect(),
        }
    }

    /// The identity `x` expanded at `center`.
    pub fn variable(center: XReal, order: usize) -> Self {
        let prec = center.prec();
        let mut coeffs = vec![Float::with_val(prec, 0); order + 1];
        coeffs[0] = center.clone();
        if order >= 1 {
            coeffs[1] = Float::with_val(prec, 1);
        }
        PowerSeries { center, coeffs }
    }

    pub fn constant(center: XReal, value: XReal, order: usize) -> Self {
        let prec = center.prec();
        let mut coeffs = vec![Float::with_val(prec, 0); order + 1];
        coeffs[0] = Float::with_val(prec, value);
        PowerSeries { center, coeffs }
    }

    pub fn center(&self) -> &XReal {
        &self.center
    }

    pub fn coeffs(&self) -> &[XReal] {
        &self.coeffs
    }

    pub fn coeff(&self, n: usize) -> &XReal {
        &self.coeffs[n]
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn prec(&self) -> u32 {
        self.center.prec()
    }

    pub fn into_coeffs(self) -> Vec<XReal> {
        self.coeffs
    }

    pub fn with_precision(&self, prec: u32) -> Self {
        Self::from_parts(prec, self.center.clone(), self.coeffs.clone())
    }

    pub fn with_center(mut self, center: XReal) -> Self {
        self.center = Float::with_val(self.prec(), center);
        self
    }

    pub fn truncate(&self, order: usize) -> Self {
        let n = order.min(self.order());
        PowerSeries {
            center: self.center.clone(),
            coeffs: self.coeffs[..=n].to_vec(),
        }
    }

    fn zeros(&self, order: usize) -> Vec<XReal> {
        vec![Float::with_val(self.prec(), 0); order + 1]
    }

    fn compatible(&self, other: &Self) -> Result<(usize, u32)> {
        if self.center != other.center {
            return Err(Error::series("series have different centers"));
        }
        Ok((self.order().min(other.order()), self.prec().min(other.prec())))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let (n, prec) = self.compatible(other)?;
        let coeffs = (0..=n).map(|i| Float::with_val(prec, &self.coeffs[i] + &other.coeffs[i])).collect();
        Ok(Self::from_parts(prec, self.center.clone(), coeffs))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let (n, prec) = self.compatible(other)?;
        let coeffs = (0..=n).map(|i| Float::with_val(prec, &self.coeffs[i] - &other.coeffs[i])).collect();
        Ok(Self::from_parts(prec, self.center.clone(), coeffs))
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        let (n, prec) = self.compatible(other)?;
        let coeffs = (0..=n)
            .map(|k| {
                let mut acc = Float::with_val(prec, 0);
                for i in 0..=k {
                    acc += Float::with_val(prec, &self.coeffs[i] * &other.coeffs[k - i]);
                }
                acc
            })
            .collect();
        Ok(Self::from_parts(prec, self.center.clone(), coeffs))
    }

    pub fn scale(&self, factor: &XReal) -> Self {
        let prec = self.prec();
        let coeffs = self.coeffs.iter().map(|c| Float::with_val(prec, c * factor)).collect();
        PowerSeries { center: self.center.clone(), coeffs }
    }

    pub fn add_constant(&self, value: &XReal) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += value;
        out
    }

    fn nonzero_constant(&self, what: &str) -> Result<()> {
        if self.coeffs[0].is_zero() {
            return Err(Error::series(format!("{what} needs a nonzero constant term")));
        }
        Ok(())
    }

    /// `1 / a`; requires `a_0 != 0`.
    pub fn reciprocal(&self) -> Result<Self> {
        self.nonzero_constant("reciprocal")?;
        let prec = self.prec();
        let n = self.order();
        let mut b = self.zeros(n);
        let inv = Float::with_val(prec, self.coeffs[0].recip_ref());
        b[0] = inv.clone();
        for k in 1..=n {
            let mut acc = Float::with_val(prec, 0);
            for i in 1..=k {
                acc += Float::with_val(prec, &self.coeffs[i] * &b[k - i]);
            }
            b[k] = -(acc * &inv);
        }
        Ok(PowerSeries { center: self.center.clone(), coeffs: b })
    }

    /// `a / b`; requires `b_0 != 0`.
    pub fn div(&self, other: &Self) -> Result<Self> {
        other.nonzero_constant("division")?;
        let (n, prec) = self.compatible(other)?;
        let inv = Float::with_val(prec, other.coeffs[0].recip_ref());
        let mut q: Vec<XReal> = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let mut acc = Float::with_val(prec, &self.coeffs[k]);
            for i in 1..=k {
                acc -= Float::with_val(prec, &other.coeffs[i] * &q[k - i]);
            }
            q.push(acc * &inv);
        }
        Ok(Self::from_parts(prec, self.center.clone(), q))
    }

    /// `exp(a)` by the recurrence `n b_n = Σ k a_k b_{n-k}`.
    pub fn exp(&self) -> Result<Self> {
        let b0 = Float::with_val(self.prec(), self.coeffs[0].exp_ref());
        if !b0.is_finite() {
            return Err(Error::NonFinite("series exp"));
        }
        Ok(self.exp_with_constant(b0))
    }

    /// `b0 · exp(a - a_0)`; lets callers supply `exp(a_0)` (or any
    /// multiple of it) evaluated by a dedicated routine.
    pub fn exp_with_constant(&self, b0: XReal) -> Self {
        let prec = self.prec();
        let n = self.order();
        let mut b = self.zeros(n);
        b[0] = Float::with_val(prec, b0);
        for k in 1..=n {
            let mut acc = Float::with_val(prec, 0);
            for i in 1..=k {
                acc += Float::with_val(prec, &self.coeffs[i] * &b[k - i]) * i as u32;
            }
            b[k] = acc / k as u32;
        }
        PowerSeries { center: self.center.clone(), coeffs: b }
    }

    /// `log(a)`; requires `a_0 > 0`.
    pub fn ln(&self) -> Result<Self> {
        if self.coeffs[0] <= 0 {
            return Err(Error::series("logarithm needs a positive constant term"));
        }
        let prec = self.prec();
        let n = self.order();
        let mut b = self.zeros(n);
        b[0] = Float::with_val(prec, self.coeffs[0].ln_ref());
        let inv = Float::with_val(prec, self.coeffs[0].recip_ref());
        for k in 1..=n {
            let mut acc = Float::with_val(prec, 0);
            for i in 1..k {
                acc += Float::with_val(prec, &b[i] * &self.coeffs[k - i]) * i as u32;
            }
            let t = Float::with_val(prec, &self.coeffs[k]) - acc / k as u32;
            b[k] = t * &inv;
        }
        Ok(PowerSeries { center: self.center.clone(), coeffs: b })
    }

    /// `√a`; requires `a_0 > 0`.
    pub fn sqrt(&self) -> Result<Self> {
        if self.coeffs[0] <= 0 {
            return Err(Error::series("square root needs a positive constant term"));
        }
        let prec = self.prec();
        let n = self.order();
        let mut b = self.zeros(n);
        b[0] = Float::with_val(prec, self.coeffs[0].sqrt_ref());
        let inv2 = Float::with_val(prec, b[0].recip_ref()) / 2u32;
        for k in 1..=n {
            let mut acc = Float::with_val(prec, &self.coeffs[k]);
            for i in 1..k {
                acc -= Float::with_val(prec, &b[i] * &b[k - i]);
            }
            b[k] = acc * &inv2;
        }
        Ok(PowerSeries { center: self.center.clone(), coeffs: b })
    }

    /// `a ∘ g`, where `a` is read as a series in its offset variable and
    /// `g` has zero constant term. The result is centered where `g` is.
    pub fn compose(&self, inner: &PowerSeries) -> Result<Self> {
        if !inner.coeffs[0].is_zero() {
            return Err(Error::series("composition needs an inner series with zero constant term"));
        }
        let n = self.order().min(inner.order());
        let prec = self.prec().min(inner.prec());
        let inner = inner.truncate(n).with_precision(prec);
        // Horner: a_0 + g (a_1 + g (a_2 + ...)).
        let mut acc = PowerSeries::constant(inner.center.clone(), Float::with_val(prec, &self.coeffs[n]), n);
        for k in (0..n).rev() {
            acc = acc.mul(&inner)?;
            acc.coeffs[0] += &self.coeffs[k];
        }
        Ok(acc)
    }

    /// `a'`; the order drops by one (an order-0 series stays order 0).
    pub fn derivative(&self) -> Self {
        let prec = self.prec();
        let n = self.order();
        if n == 0 {
            return PowerSeries::constant(self.center.clone(), Float::with_val(prec, 0), 0);
        }
        let coeffs = (1..=n).map(|k| Float::with_val(prec, &self.coeffs[k] * k as u32)).collect();
        PowerSeries { center: self.center.clone(), coeffs }
    }

    /// `c + ∫ a`; the order grows by one.
    pub fn antiderivative(&self, constant: &XReal) -> Self {
        let prec = self.prec();
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(Float::with_val(prec, constant));
        for (k, c) in self.coeffs.iter().enumerate() {
            coeffs.push(Float::with_val(prec, c / (k as u32 + 1)));
        }
        PowerSeries { center: self.center.clone(), coeffs }
    }

    /// Value of the truncated sum at `center + offset`.
    pub fn eval_offset(&self, offset: &XReal) -> XReal {
        let prec = self.prec();
        let mut acc = Float::with_val(prec, 0);
        for c in self.coeffs.iter().rev() {
            acc *= offset;
            acc += c;
        }
        acc
    }

    /// Value of the truncated sum at `x`.
    pub fn eval(&self, x: &XReal) -> XReal {
        let offset = Float::with_val(self.prec(), x - &self.center);
        self.eval_offset(&offset)
    }

    /// Compositional inverse around the center.
    ///
    /// For `s(x0 + h) = y0 + s_1 h + …` with `s_1 != 0`, returns `r`
    /// centered at `y0` with `r(y0) = x0` and `s(r(y)) = y` through the
    /// truncation order. Coefficients come from Lagrange inversion,
    /// `b_k = [h^(k-1)] φ^k / k` with `φ = h / (s - y0)`.
    pub fn reverse(&self) -> Result<Self> {
        let n = self.order();
        if n == 0 {
            return Err(Error::series("reversion needs a series of order at least 1"));
        }
        if self.coeffs[1].is_zero() {
            return Err(Error::series("series is not invertible: zero linear coefficient"));
        }
        let prec = self.prec();
        let shifted = PowerSeries {
            center: self.center.clone(),
            coeffs: self.coeffs[1..].to_vec(),
        };
        let phi = shifted.reciprocal()?;
        let mut out = Vec::with_capacity(n + 1);
        out.push(self.center.clone());
        let mut power = phi.clone();
        for k in 1..=n {
            out.push(Float::with_val(prec, &power.coeffs[k - 1] / k as u32));
            if k < n {
                power = power.mul(&phi)?;
            }
        }
        Ok(PowerSeries { center: self.coeffs[0].clone(), coeffs: out })
    }
}

impl Serialize for PowerSeries {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("PowerSeries", 4)?;
        st.serialize_field("center", &to_decimal(&self.center))?;
        st.serialize_field("precision_bits", &self.prec())?;
        st.serialize_field("order", &self.order())?;
        let coeffs: Vec<String> = self.coeffs.iter().map(to_decimal).collect();
        st.serialize_field("coefficients", &coeffs)?;
        st.end()
    }
}

/// Taylor series of `N'(u)` given the series `u`, with the constant
/// `N'(u_0)` evaluated directly.
pub fn density_series(u: &PowerSeries) -> Result<PowerSeries> {
    let w = u.mul(u)?.scale(&Float::with_val(u.prec(), -0.5));
    Ok(w.exp_with_constant(norm_pdf(&u.coeffs[0])?))
}

/// Taylor series of `N(d0 + t)` in `t` through `order`: the antiderivative
/// of `N'(d0) · exp(-d0 t - t²/2)`.
pub fn norm_cdf_series(d0: &XReal, order: usize) -> Result<PowerSeries> {
    let prec = d0.prec();
    let zero = Float::with_val(prec, 0);
    let d = PowerSeries::variable(zero, order.saturating_sub(1)).add_constant(d0);
    let density = density_series(&d)?;
    Ok(density.antiderivative(&crate::precision::norm_cdf(d0)?).with_center(d0.clone()))
}

/// Taylor series of `F` at `x0 > 0` through `order`.
///
/// `F'(x) = N'(1/x + x/2)` is expanded with series arithmetic and
/// integrated; the constant term is `F(x0)` by quadrature.
pub fn series_f_aux(x0: &XReal, order: usize, cfg: &PrecisionConfig) -> Result<PowerSeries> {
    positive(x0, "expansion point x0")?;
    if order == 0 {
        return Err(Error::series("order must be at least 1"));
    }
    let prec = cfg.working_bits;
    let wp = prec + GUARD;
    let x = PowerSeries::variable(Float::with_val(wp, x0), order - 1);
    let u = x.reciprocal()?.add(&x.scale(&Float::with_val(wp, 0.5)))?;
    let derivative = density_series(&u)?;
    let f0 = aux_f(&Float::with_val(prec, x0), cfg)?;
    Ok(derivative.antiderivative(&f0).with_precision(prec))
}

/// `F⁻¹` expanded at `y0 = F(x0)`.
pub fn series_reverse(s: &PowerSeries) -> Result<PowerSeries> {
    s.reverse()
}

/// `1/(2e)`, the center of the univariate expansion of `f`.
pub fn specialization_center(prec: u32) -> XReal {
    let e = euler(prec + GUARD);
    Float::with_val(prec, e.recip() / 2u32)
}

/// Series of `f(K) = F⁻¹(K)/√T` at `K = 1/(2e)` through `order`, obtained
/// by reverting the Taylor series of `F` at `x0 = F⁻¹(1/(2e))`.
pub fn series_f_direct(order: usize, maturity: &XReal, cfg: &PrecisionConfig) -> Result<PowerSeries> {
    positive(maturity, "maturity T")?;
    let prec = cfg.working_bits;
    let wcfg = guarded(cfg)?;
    let k0 = specialization_center(wcfg.working_bits);
    let x0 = aux_f_inv(&k0, &wcfg)?;
    let s = series_f_aux(&x0, order, &wcfg)?;
    let r = s.reverse()?.with_center(k0);
    let sqrt_t = Float::with_val(wcfg.working_bits, maturity.sqrt_ref());
    let scaled = r.scale(&sqrt_t.recip());
    Ok(scaled.with_precision(prec).with_center(specialization_center(prec)))
}

/// `F⁻¹` expanded at `1/(2e)` through `order` (the `T = 1` case of
/// [`series_f_direct`]).
pub fn series_f_inv_center(order: usize, cfg: &PrecisionConfig) -> Result<PowerSeries> {
    series_f_direct(order, &Float::with_val(cfg.working_bits, 1), cfg)
}

fn guarded(cfg: &PrecisionConfig) -> Result<PrecisionConfig> {
    PrecisionConfig::with_tolerances(
        cfg.working_bits + GUARD,
        Float::with_val(64, &cfg.quad_rel_tol) >> GUARD,
        Float::with_val(64, &cfg.root_rel_tol) >> GUARD,
    )
}
