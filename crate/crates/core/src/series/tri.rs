//! Trivariate truncated series of the implied volatility `I(S, K, c)` and
//! its restriction to the curve `S = eK`, `c = ĉ(K)`.

use std::sync::Arc;

use rug::Float;
use serde::ser::{Serialize, SerializeStruct, Serializer};

use super::{norm_cdf_series, PowerSeries};
use crate::black_scholes::Quote;
use crate::error::{Error, Result};
use crate::implied::{c_hat, implied_vol};
use crate::precision::{euler, positive, to_decimal, PrecisionConfig, XReal};

const GUARD: u32 = 32;

/// Monomials `X^i Y^j Z^k` with `i + j + k <= degree`, graded by total
/// degree, and the table of index pairs whose product stays in range.
#[derive(Debug)]
struct Layout {
    degree: u32,
    monomials: Vec<[u32; 3]>,
    /// `(a, b, a·b)` for every product of total degree `<= degree`.
    products: Vec<(usize, usize, usize)>,
}

impl Layout {
    fn new(degree: u32) -> Self {
        let mut monomials = Vec::new();
        for d in 0..=degree {
            for i in (0..=d).rev() {
                for j in (0..=d - i).rev() {
                    monomials.push([i, j, d - i - j]);
                }
            }
        }
        let index = |m: [u32; 3]| monomials.iter().position(|x| *x == m);
        let mut products = Vec::new();
        for (a, ma) in monomials.iter().enumerate() {
            for (b, mb) in monomials.iter().enumerate() {
                let m = [ma[0] + mb[0], ma[1] + mb[1], ma[2] + mb[2]];
                if m[0] + m[1] + m[2] <= degree {
                    products.push((a, b, index(m).expect("monomial in range")));
                }
            }
        }
        Layout { degree, monomials, products }
    }

    fn index_of(&self, m: [u32; 3]) -> Option<usize> {
        self.monomials.iter().position(|x| *x == m)
    }
}

/// `Σ γ_ijk X^i Y^j Z^k` over `i + j + k <= D`, with `X, Y, Z` the offsets
/// from `center` of the three arguments.
#[derive(Clone, Debug)]
pub struct TriSeries {
    center: [XReal; 3],
    layout: Arc<Layout>,
    coeffs: Vec<XReal>,
}

impl PartialEq for TriSeries {
    fn eq(&self, other: &Self) -> bool {
        self.center == other.center && self.layout.degree == other.layout.degree && self.coeffs == other.coeffs
    }
}

impl TriSeries {
    fn zero_like(center: &[XReal; 3], layout: &Arc<Layout>) -> Self {
        let prec = center[0].prec();
        TriSeries {
            center: center.clone(),
            layout: Arc::clone(layout),
            coeffs: vec![Float::with_val(prec, 0); layout.monomials.len()],
        }
    }

    fn constant(center: &[XReal; 3], layout: &Arc<Layout>, value: &XReal) -> Self {
        let mut s = Self::zero_like(center, layout);
        s.coeffs[0] = Float::with_val(s.prec(), value);
        s
    }

    /// The coordinate function `center[axis] + offset`.
    fn coordinate(center: &[XReal; 3], layout: &Arc<Layout>, axis: usize) -> Self {
        let mut s = Self::constant(center, layout, &center[axis]);
        if layout.degree >= 1 {
            let mut m = [0; 3];
            m[axis] = 1;
            let idx = layout.index_of(m).expect("degree >= 1");
            s.coeffs[idx] = Float::with_val(s.prec(), 1);
        }
        s
    }

    pub fn center(&self) -> &[XReal; 3] {
        &self.center
    }

    pub fn total_degree(&self) -> u32 {
        self.layout.degree
    }

    pub fn prec(&self) -> u32 {
        self.center[0].prec()
    }

    /// `γ_ijk`, or `None` when `i + j + k` exceeds the total degree.
    pub fn coeff(&self, i: u32, j: u32, k: u32) -> Option<&XReal> {
        self.layout.index_of([i, j, k]).map(|n| &self.coeffs[n])
    }

    /// All `((i, j, k), γ_ijk)` in graded order.
    pub fn terms(&self) -> impl Iterator<Item = ([u32; 3], &XReal)> {
        self.layout.monomials.iter().copied().zip(self.coeffs.iter())
    }

    /// Series whose only nonzero coefficient is `γ_ijk = value`.
    pub fn monomial(center: [XReal; 3], degree: u32, m: [u32; 3], value: XReal) -> Result<Self> {
        let layout = Arc::new(Layout::new(degree));
        let idx = layout
            .index_of(m)
            .ok_or_else(|| Error::series("monomial exceeds the total degree"))?;
        let mut s = Self::zero_like(&center, &layout);
        s.coeffs[idx] = Float::with_val(s.prec(), value);
        Ok(s)
    }

    fn add(&self, other: &Self) -> Self {
        let prec = self.prec();
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| Float::with_val(prec, a + b)).collect();
        TriSeries { coeffs, ..self.clone() }
    }

    fn sub(&self, other: &Self) -> Self {
        let prec = self.prec();
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| Float::with_val(prec, a - b)).collect();
        TriSeries { coeffs, ..self.clone() }
    }

    fn mul(&self, other: &Self) -> Self {
        let prec = self.prec();
        let mut out = Self::zero_like(&self.center, &self.layout);
        for &(a, b, c) in &self.layout.products {
            if self.coeffs[a].is_zero() || other.coeffs[b].is_zero() {
                continue;
            }
            out.coeffs[c] += Float::with_val(prec, &self.coeffs[a] * &other.coeffs[b]);
        }
        out
    }

    fn scale(&self, factor: &XReal) -> Self {
        let prec = self.prec();
        let coeffs = self.coeffs.iter().map(|c| Float::with_val(prec, c * factor)).collect();
        TriSeries { coeffs, ..self.clone() }
    }

    /// `g(self)` for a univariate `g` expanded at the constant term of
    /// `self`, evaluated by Horner in the zero-constant part.
    fn apply(&self, g: &PowerSeries) -> Self {
        let mut t = self.clone();
        t.coeffs[0] = Float::with_val(self.prec(), 0);
        let n = g.order().min(self.layout.degree as usize);
        let mut acc = Self::constant(&self.center, &self.layout, g.coeff(n));
        for k in (0..n).rev() {
            acc = acc.mul(&t);
            acc.coeffs[0] += g.coeff(k);
        }
        acc
    }

    fn constant_term(&self) -> &XReal {
        &self.coeffs[0]
    }

    fn univariate_at_constant(&self) -> PowerSeries {
        PowerSeries::variable(self.constant_term().clone(), self.layout.degree as usize)
    }

    fn reciprocal(&self) -> Result<Self> {
        Ok(self.apply(&self.univariate_at_constant().reciprocal()?))
    }

    fn ln(&self) -> Result<Self> {
        Ok(self.apply(&self.univariate_at_constant().ln()?))
    }

    fn norm_cdf(&self) -> Result<Self> {
        Ok(self.apply(&norm_cdf_series(self.constant_term(), self.layout.degree as usize)?))
    }

    fn norm_pdf(&self) -> Result<Self> {
        let order = self.layout.degree as usize;
        let density = norm_cdf_series(self.constant_term(), order + 1)?.derivative();
        Ok(self.apply(&density))
    }

    /// Lowest total degree carrying a coefficient above `threshold`
    /// (`degree + 1` when there is none).
    fn valuation(&self, threshold: &XReal) -> u32 {
        self.terms()
            .find(|(_, c)| Float::with_val(64, c.abs_ref()) > *threshold)
            .map_or(self.layout.degree + 1, |(m, _)| m[0] + m[1] + m[2])
    }

    fn with_precision(&self, prec: u32) -> Self {
        TriSeries {
            center: self.center.clone().map(|c| Float::with_val(prec, c)),
            layout: Arc::clone(&self.layout),
            coeffs: self.coeffs.iter().map(|c| Float::with_val(prec, c)).collect(),
        }
    }
}

/// `(S, K, σ) ↦ (C_BS, vega)` on trivariate series, assembled from series
/// logarithm, reciprocal and the normal distribution series.
fn price_and_vega(s: &TriSeries, k: &TriSeries, sigma: &TriSeries, sqrt_t: &XReal) -> Result<(TriSeries, TriSeries)> {
    let log_moneyness = s.ln()?.sub(&k.ln()?);
    let w = sigma.scale(sqrt_t);
    let half = Float::with_val(s.prec(), 0.5);
    let d1 = log_moneyness.mul(&w.reciprocal()?).add(&w.scale(&half));
    let d2 = d1.sub(&w);
    let price = s.mul(&d1.norm_cdf()?).sub(&k.mul(&d2.norm_cdf()?));
    let vega = s.mul(&d1.norm_pdf()?).scale(sqrt_t);
    Ok((price, vega))
}

/// Expansion of `I(S, K, c)` through total degree `total_degree` at
/// `(1/2, 1/(2e), 1/2 - 1/(4e))` for maturity `T = 1`.
pub fn tri_series_i(total_degree: u32, cfg: &PrecisionConfig) -> Result<TriSeries> {
    tri_series_i_at(total_degree, &Float::with_val(cfg.working_bits, 1), cfg)
}

/// As [`tri_series_i`] for a given maturity.
///
/// Newton's method on series, `σ ← σ - (C_BS(S, K, σ) - c) / vega`,
/// started from the scalar implied volatility at the center. Each step
/// doubles the lowest degree left in the residual, so
/// `⌈log2(D + 1)⌉ + 1` steps resolve every coefficient.
pub fn tri_series_i_at(total_degree: u32, maturity: &XReal, cfg: &PrecisionConfig) -> Result<TriSeries> {
    if total_degree == 0 {
        return Err(Error::series("total degree must be at least 1"));
    }
    positive(maturity, "maturity T")?;
    let prec = cfg.working_bits;
    let wp = prec + GUARD;
    let e = euler(wp);
    let k0 = Float::with_val(wp, e.recip_ref()) / 2u32;
    let s0 = Float::with_val(wp, 0.5);
    let c0 = c_hat(&k0)?;
    let center = [s0.clone(), k0.clone(), c0.clone()];
    let layout = Arc::new(Layout::new(total_degree));

    let quote = Quote::new(s0, k0, Float::with_val(wp, maturity), c0)?;
    let wcfg = PrecisionConfig::with_tolerances(wp, cfg.quad_rel_tol.clone(), Float::with_val(64, &cfg.root_rel_tol) >> GUARD)?;
    let sigma0 = implied_vol(&quote, &wcfg)?;

    let s = TriSeries::coordinate(&center, &layout, 0);
    let k = TriSeries::coordinate(&center, &layout, 1);
    let c = TriSeries::coordinate(&center, &layout, 2);
    let sqrt_t = Float::with_val(wp, maturity.sqrt_ref());
    let mut sigma = TriSeries::constant(&center, &layout, &sigma0);

    let threshold = Float::with_val(64, 1) >> (prec - prec / 8);
    let steps = (u32::BITS - total_degree.leading_zeros()) + 1;
    let mut valuation = 1;
    for iteration in 1..=steps {
        let (price, vega) = price_and_vega(&s, &k, &sigma, &sqrt_t)?;
        let residual = price.sub(&c);
        let v = residual.valuation(&threshold);
        if v > total_degree {
            return Ok(sigma.with_precision(prec));
        }
        if iteration > 1 && v <= valuation {
            return Err(Error::Stagnation { iteration, valuation: v });
        }
        valuation = v;
        sigma = sigma.sub(&residual.mul(&vega.reciprocal()?));
    }
    let (price, _) = price_and_vega(&s, &k, &sigma, &sqrt_t)?;
    let v = price.sub(&c).valuation(&threshold);
    if v <= total_degree {
        return Err(Error::Stagnation { iteration: steps + 1, valuation: v });
    }
    Ok(sigma.with_precision(prec))
}

#[derive(serde::Serialize)]
struct TermOut {
    i: u32,
    j: u32,
    k: u32,
    value: String,
}

impl Serialize for TriSeries {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("TriSeries", 4)?;
        let center: Vec<String> = self.center.iter().map(to_decimal).collect();
        st.serialize_field("center", &center)?;
        st.serialize_field("precision_bits", &self.prec())?;
        st.serialize_field("total_degree", &self.total_degree())?;
        let terms: Vec<TermOut> = self
            .terms()
            .map(|([i, j, k], v)| TermOut {
                i,
                j,
                k,
                value: to_decimal(v),
            })
            .collect();
        st.serialize_field("terms", &terms)?;
        st.end()
    }
}

/// Restricts a trivariate expansion to `S = eK`, `c = ĉ(K)`.
///
/// With `K = K0 + X` the offsets are `eX`, `X` and
/// `ĉ(K0 + X) - ĉ(K0) = eX + eX²` (the last because `ĉ'(1/(2e)) = e`),
/// so the result is `Σ γ_ijk (eX)^i X^j (eX + eX²)^k` through `order`.
pub fn substitute_specialize(t: &TriSeries, order: usize) -> Result<PowerSeries> {
    if order > t.total_degree() as usize {
        return Err(Error::series(format!(
            "order {order} exceeds the total degree {} of the expansion",
            t.total_degree()
        )));
    }
    let prec = t.prec();
    let wp = prec + GUARD;
    let e = euler(wp);
    let center = Float::with_val(wp, &t.center[1]);
    let var = |coeffs: Vec<XReal>| PowerSeries::new(center.clone(), coeffs);
    let zero = Float::with_val(wp, 0);
    let mut px = vec![zero.clone(); order + 1];
    let mut py = px.clone();
    let mut pz = px.clone();
    if order >= 1 {
        px[1] = e.clone();
        py[1] = Float::with_val(wp, 1);
        pz[1] = e.clone();
    }
    if order >= 2 {
        pz[2] = e.clone();
    }
    let powers = |base: PowerSeries| -> Result<Vec<PowerSeries>> {
        let mut out = vec![PowerSeries::constant(center.clone(), Float::with_val(wp, 1), order)];
        for _ in 0..order {
            let next = out.last().expect("non-empty").mul(&base)?;
            out.push(next);
        }
        Ok(out)
    };
    let (xs, ys, zs) = (powers(var(px)?)?, powers(var(py)?)?, powers(var(pz)?)?);

    let mut acc = vec![zero; order + 1];
    for ([i, j, k], g) in t.terms() {
        let (i, j, k) = (i as usize, j as usize, k as usize);
        if i + j + k > order || g.is_zero() {
            continue;
        }
        let term = xs[i].mul(&ys[j])?.mul(&zs[k])?;
        for (n, c) in term.coeffs().iter().enumerate() {
            acc[n] += Float::with_val(wp, c * g);
        }
    }
    Ok(PowerSeries::new(center, acc)?.with_precision(prec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::black_scholes::vega as scalar_vega;
    use crate::precision::pow2;

    fn cfg() -> PrecisionConfig {
        PrecisionConfig::new(256).unwrap()
    }

    fn close(a: &XReal, b: &XReal, tol: &XReal) -> bool {
        Float::with_val(a.prec(), a - b).abs() <= *tol
    }

    #[test]
    fn layout_counts() {
        let l = Layout::new(8);
        assert_eq!(l.monomials.len(), 165);
        assert_eq!(l.products.len(), 3003);
        assert_eq!(l.monomials[0], [0, 0, 0]);
    }

    #[test]
    fn constant_term_is_implied_vol_at_center() {
        let c = cfg();
        let t = tri_series_i(3, &c).unwrap();
        let k0 = Float::with_val(256, euler(256).recip()) / 2u32;
        let q = Quote::new(c.real(0.5), k0.clone(), c.real(1), c_hat(&k0).unwrap()).unwrap();
        let want = implied_vol(&q, &c).unwrap();
        assert!(close(t.coeff(0, 0, 0).unwrap(), &want, &pow2(-180)));
    }

    #[test]
    fn price_sensitivity_is_inverse_vega() {
        let c = cfg();
        let t = tri_series_i(2, &c).unwrap();
        let sigma = t.coeff(0, 0, 0).unwrap().clone();
        let k0 = Float::with_val(256, euler(256).recip()) / 2u32;
        let p = crate::black_scholes::VolPoint::new(c.real(0.5), k0, c.real(1), sigma).unwrap();
        let want = scalar_vega(&p).unwrap().recip();
        assert!(close(t.coeff(0, 0, 1).unwrap(), &want, &pow2(-180)));
    }

    #[test]
    fn price_sensitivity_matches_central_difference() {
        let c = cfg();
        let t = tri_series_i(2, &c).unwrap();
        let k0 = Float::with_val(256, euler(256).recip()) / 2u32;
        let c0 = c_hat(&k0).unwrap();
        let h = Float::with_val(256, 1e-20);
        let iv = |price: XReal| {
            let q = Quote::new(c.real(0.5), k0.clone(), c.real(1), price).unwrap();
            implied_vol(&q, &c).unwrap()
        };
        let up = iv(Float::with_val(256, &c0 + &h));
        let dn = iv(Float::with_val(256, &c0 - &h));
        let fd = (up - dn) / (h * 2u32);
        assert!(close(t.coeff(0, 0, 1).unwrap(), &fd, &Float::with_val(256, 1e-30)));
    }

    #[test]
    fn single_monomial_substitution() {
        let c = cfg();
        let center = [c.real(0.5), Float::with_val(256, euler(256).recip()) / 2u32, c.real(0.3)];
        let t = TriSeries::monomial(center, 3, [1, 0, 0], c.real(1)).unwrap();
        let s = substitute_specialize(&t, 3).unwrap();
        assert!(close(s.coeff(1), &euler(256), &pow2(-250)));
        assert!(s.coeff(0).is_zero() && s.coeff(2).is_zero() && s.coeff(3).is_zero());
    }

    #[test]
    fn substitution_keeps_constant_and_rejects_excess_order() {
        let c = cfg();
        let t = tri_series_i(2, &c).unwrap();
        let s = substitute_specialize(&t, 2).unwrap();
        assert_eq!(s.coeff(0), t.coeff(0, 0, 0).unwrap());
        assert!(substitute_specialize(&t, 3).is_err());
    }

    #[test]
    fn stable_under_higher_precision() {
        let lo = tri_series_i(3, &cfg()).unwrap();
        let hi = tri_series_i(3, &PrecisionConfig::new(384).unwrap()).unwrap();
        for ((m, a), (_, b)) in lo.terms().zip(hi.terms()) {
            let b = Float::with_val(256, b);
            let scale = Float::with_val(256, b.abs_ref()).max(&Float::with_val(256, 1));
            assert!(close(a, &b, &(scale * pow2(-180))), "{m:?}");
        }
    }
}
