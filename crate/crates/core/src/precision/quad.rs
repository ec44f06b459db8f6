//! Double-exponential quadrature.
//!
//! Finite intervals use the tanh-sinh map, half-lines the map
//! `x = lo + exp(t - exp(-t))` (which keeps a wide analyticity strip for
//! Gaussian tails) and the real line the sinh-sinh map. Each level halves the step and reuses
//! every node of the previous levels. Nodes next to a finite endpoint are
//! placed by their distance to that endpoint, so integrands with an
//! essential zero there (all derivatives vanishing) cost nothing extra.

use rug::Float;

use super::{pi, PrecisionConfig, XReal};
use crate::error::{Error, Result};

const GUARD: u32 = 32;
const MIN_LEVEL: u32 = 3;
const MAX_LEVEL: u32 = 12;
/// Largest |t| visited on a side whose nodes run off to infinity.
const T_CAP: f64 = 8.0;
/// Consecutive negligible terms that end an adaptive side.
const TAIL_RUN: u32 = 3;

/// Integration domain.
#[derive(Clone, Debug)]
pub enum Domain {
    Finite(XReal, XReal),
    /// `[lo, +inf)`
    From(XReal),
    /// `(-inf, hi]`
    To(XReal),
    Whole,
}

/// Result of [`integrate_domain`].
#[derive(Clone, Debug)]
pub struct Quadrature {
    pub value: XReal,
    /// Difference between the last two levels, relative to the result.
    pub error_estimate: XReal,
    pub evaluations: usize,
    pub levels: u32,
}

/// `∫_lo^hi f` to relative error `cfg.quad_rel_tol`.
///
/// `f` may be asked for its value at the endpoints themselves when a node
/// lies closer to the endpoint than the working precision resolves; it must
/// return the continuous extension there.
pub fn integrate<F>(f: F, lo: &XReal, hi: &XReal, cfg: &PrecisionConfig) -> Result<XReal>
where
    F: FnMut(&XReal) -> Result<XReal>,
{
    integrate_domain(f, Domain::Finite(lo.clone(), hi.clone()), cfg).map(|q| q.value)
}

pub fn integrate_domain<F>(mut f: F, domain: Domain, cfg: &PrecisionConfig) -> Result<Quadrature>
where
    F: FnMut(&XReal) -> Result<XReal>,
{
    match domain {
        Domain::Finite(lo, hi) => {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::domain("integration bounds must satisfy lo < hi"));
            }
            run(&mut f, Map::Finite { lo, hi }, cfg)
        }
        Domain::From(lo) => run(&mut f, Map::From { lo }, cfg),
        Domain::To(hi) => {
            let lo = Float::with_val(hi.prec(), -&hi);
            let mut g = |x: &XReal| f(&Float::with_val(x.prec(), -x));
            run(&mut g, Map::From { lo }, cfg)
        }
        Domain::Whole => run(&mut f, Map::Whole, cfg),
    }
}

enum Map {
    Finite { lo: XReal, hi: XReal },
    From { lo: XReal },
    Whole,
}

/// How far one side of the t axis is walked.
#[derive(Clone, Copy)]
enum Side {
    Fixed(f64),
    Adaptive,
}

struct Nodes {
    wp: u32,
    half_pi: XReal,
}

impl Nodes {
    // (sinh t, cosh t) from a single exponential
    fn hyperbolic(&self, t: &XReal) -> (XReal, XReal) {
        let et = Float::with_val(self.wp, t.exp_ref());
        let emt = Float::with_val(self.wp, et.recip_ref());
        let sinh = Float::with_val(self.wp, &et - &emt) / 2u32;
        let cosh = Float::with_val(self.wp, &et + &emt) / 2u32;
        (sinh, cosh)
    }

    /// Abscissae and shared weight at parameter t (t >= 0 for the
    /// symmetric maps, any sign for the half-line map).
    fn at(&self, map: &Map, t: &XReal) -> (Vec<XReal>, XReal) {
        let wp = self.wp;
        if let Map::From { lo } = map {
            let emt = Float::with_val(wp, (-t.clone()).exp_ref());
            let e = Float::with_val(wp, t - &emt).exp();
            let x = Float::with_val(wp, lo + &e);
            let w = e * (emt + 1u32);
            return (vec![x], w);
        }
        let (sinh, cosh) = self.hyperbolic(t);
        match map {
            Map::Finite { lo, hi } => {
                let half = Float::with_val(wp, hi - lo) / 2u32;
                if t.is_zero() {
                    let mid = Float::with_val(wp, lo + hi) / 2u32;
                    return (vec![mid], half * &self.half_pi);
                }
                // q = exp(-pi sinh t); distance to the endpoint 2q/(1+q)
                let q = Float::with_val(wp, -(Float::with_val(wp, &sinh * &self.half_pi) * 2u32)).exp();
                let den = Float::with_val(wp, &q + 1u32);
                let delta = Float::with_val(wp, &half * &q) * 2u32 / &den;
                let w = half * &self.half_pi * 4u32 * cosh * q / den.square();
                let left = Float::with_val(wp, lo + &delta);
                let right = Float::with_val(wp, hi - &delta);
                (vec![left, right], w)
            }
            Map::From { .. } => unreachable!("handled above"),
            Map::Whole => {
                let u = Float::with_val(wp, &sinh * &self.half_pi);
                let (su, cu) = self.hyperbolic(&u);
                let w = cosh * cu * &self.half_pi;
                if t.is_zero() {
                    return (vec![su], w);
                }
                let neg = Float::with_val(wp, -&su);
                (vec![su, neg], w)
            }
        }
    }
}

fn fixed_t_max(wp: u32) -> f64 {
    // weight ~ cosh(t) exp(-pi sinh t) drops below 2^-wp
    let target = f64::from(wp) * std::f64::consts::LN_2 + 12.0;
    (target / std::f64::consts::PI).asinh() + 0.1
}

fn half_line_t_min(wp: u32) -> f64 {
    // exp(-exp(-t)) drops below 2^-wp
    let target = f64::from(wp) * std::f64::consts::LN_2 + 12.0;
    target.ln() + 0.5
}

struct Accumulator {
    sum: XReal,
    abs_sum: XReal,
    max_term: XReal,
    evaluations: usize,
}

fn run<F>(f: &mut F, map: Map, cfg: &PrecisionConfig) -> Result<Quadrature>
where
    F: FnMut(&XReal) -> Result<XReal>,
{
    let bits = cfg.working_bits;
    let wp = bits + GUARD;
    let nodes = Nodes {
        wp,
        half_pi: pi(wp) / 2u32,
    };
    let t_fixed = fixed_t_max(wp);
    // (direction, stopping rule) pairs; direction -1 walks t < 0.
    let sides: Vec<(i32, Side)> = match map {
        Map::Finite { .. } => vec![(1, Side::Fixed(t_fixed))],
        Map::From { .. } => vec![(1, Side::Adaptive), (-1, Side::Fixed(half_line_t_min(wp)))],
        Map::Whole => vec![(1, Side::Adaptive)],
    };
    let negligible = Float::with_val(wp, 1) >> (wp + 8);
    let mut acc = Accumulator {
        sum: Float::with_val(wp, 0),
        abs_sum: Float::with_val(wp, 0),
        max_term: Float::with_val(wp, 0),
        evaluations: 0,
    };

    let mut eval_t = |t: &XReal, acc: &mut Accumulator| -> Result<XReal> {
        let (xs, w) = nodes.at(&map, t);
        let mut term = Float::with_val(wp, 0);
        for x in &xs {
            let fx = f(x)?;
            if !fx.is_finite() {
                return Err(Error::NonFinite("integrand"));
            }
            acc.evaluations += 1;
            term += Float::with_val(wp, &fx * &w);
        }
        let mag = Float::with_val(wp, term.abs_ref());
        acc.sum += &term;
        acc.abs_sum += &mag;
        if mag > acc.max_term {
            acc.max_term.clone_from(&mag);
        }
        Ok(mag)
    };

    let mut previous: Option<XReal> = None;
    let mut estimate = Float::with_val(64, 1);
    for level in 0..=MAX_LEVEL {
        let h = Float::with_val(wp, 1) >> level;
        // Level 0 visits every integer k, later levels only odd k.
        let (start, stride) = if level == 0 { (0u64, 1u64) } else { (1, 2) };
        for &(dir, side) in &sides {
            let mut k = start;
            if dir < 0 && k == 0 {
                k = stride;
            }
            let mut quiet = 0;
            loop {
                let t = Float::with_val(wp, &h * k) * dir;
                let tf = t.to_f64().abs();
                match side {
                    Side::Fixed(t_max) if tf > t_max => break,
                    Side::Adaptive if tf > T_CAP => break,
                    _ => {}
                }
                let mag = eval_t(&t, &mut acc)?;
                if let Side::Adaptive = side {
                    if k > 0 && mag <= Float::with_val(wp, &acc.max_term * &negligible) {
                        quiet += 1;
                        if quiet >= TAIL_RUN {
                            break;
                        }
                    } else {
                        quiet = 0;
                    }
                }
                k += stride;
            }
        }
        let value = Float::with_val(wp, &acc.sum * &h);
        let l1 = Float::with_val(wp, &acc.abs_sum * &h);
        if let Some(prev) = previous.as_ref() {
            let diff = Float::with_val(wp, &value - prev).abs();
            let scale = Float::with_val(wp, value.abs_ref());
            estimate = if scale.is_zero() {
                Float::with_val(64, &diff)
            } else {
                Float::with_val(64, &diff / &scale)
            };
            if level >= MIN_LEVEL && converged(&diff, &value, &l1, cfg) {
                return Ok(Quadrature {
                    value: Float::with_val(bits, &value),
                    error_estimate: estimate,
                    evaluations: acc.evaluations,
                    levels: level,
                });
            }
        }
        previous = Some(value);
    }
    Err(Error::QuadratureNonConvergence {
        levels: MAX_LEVEL,
        estimate: estimate.to_f64(),
    })
}

fn converged(diff: &XReal, value: &XReal, l1: &XReal, cfg: &PrecisionConfig) -> bool {
    let bits = cfg.working_bits;
    let wp = diff.prec();
    let tol = &cfg.quad_rel_tol;
    if l1.is_zero() {
        return true;
    }
    // Rounding floor of the weighted sum.
    let floor = Float::with_val(wp, l1 >> (bits - 4));
    if *diff <= floor {
        return true;
    }
    let magnitude = Float::with_val(wp, value.abs_ref());
    // The absolute fallback applies only when the integral is small
    // against the integrand's own scale (cancellation).
    let cancelled = magnitude < Float::with_val(wp, l1 >> (bits / 2));
    let reference = if cancelled { l1 } else { &magnitude };
    *diff <= Float::with_val(wp, reference * tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precision::{norm_cdf, norm_pdf, pow2};

    fn cfg() -> PrecisionConfig {
        PrecisionConfig::new(256).unwrap()
    }

    fn rel_err(a: &XReal, b: &XReal) -> XReal {
        Float::with_val(64, Float::with_val(a.prec(), a - b).abs() / b.clone().abs())
    }

    #[test]
    fn constant_integrand() {
        let c = cfg();
        let one = c.real(1);
        let v = integrate(|_| Ok(c.real(1)), &c.real(0), &one, &c).unwrap();
        assert!(rel_err(&v, &one) <= c.quad_rel_tol);
    }

    #[test]
    fn polynomial_and_exponential() {
        let c = cfg();
        let v = integrate(|x| Ok(Float::with_val(256, x.exp_ref())), &c.real(0), &c.real(1), &c)
            .unwrap();
        let want = c.real(1).exp() - 1u32;
        assert!(rel_err(&v, &want) <= c.quad_rel_tol);
    }

    #[test]
    fn density_normalisation_on_real_line() {
        let c = cfg();
        let q = integrate_domain(norm_pdf, Domain::Whole, &c).unwrap();
        assert!(rel_err(&q.value, &c.real(1)) <= c.quad_rel_tol);
    }

    #[test]
    fn half_line_matches_cdf() {
        let c = cfg();
        let q = integrate_domain(norm_pdf, Domain::To(c.real(2)), &c).unwrap();
        let want = norm_cdf(&c.real(2)).unwrap();
        assert!(rel_err(&q.value, &want) <= c.quad_rel_tol);
        let q = integrate_domain(norm_pdf, Domain::From(c.real(2)), &c).unwrap();
        let want = norm_cdf(&c.real(-2)).unwrap();
        assert!(rel_err(&q.value, &want) <= c.quad_rel_tol);
    }

    #[test]
    fn endpoint_flat_integrand() {
        // exp(-1/v^2) on [0, 1] equals exp(-1) - sqrt(pi) erfc(1).
        let c = cfg();
        let v = integrate(
            |v| {
                if v.is_zero() {
                    return Ok(c.real(0));
                }
                let s = Float::with_val(256, v.square_ref());
                Ok(Float::with_val(256, -s.recip()).exp())
            },
            &c.real(0),
            &c.real(1),
            &c,
        )
        .unwrap();
        let want = c.real(-1).exp() - pi(256).sqrt() * c.real(1).erfc();
        assert!(rel_err(&v, &want) <= c.quad_rel_tol);
    }

    #[test]
    fn additivity_over_adjacent_intervals() {
        let c = cfg().with_quad_tol(pow2(-150)).unwrap();
        let g = |x: &XReal| Ok(Float::with_val(256, x.cos_ref()) * Float::with_val(256, x.exp_ref()));
        let ab = integrate(g, &c.real(0), &c.real(0.7), &c).unwrap();
        let bc = integrate(g, &c.real(0.7), &c.real(2.5), &c).unwrap();
        let ac = integrate(g, &c.real(0), &c.real(2.5), &c).unwrap();
        let err = rel_err(&(ab + bc), &ac);
        assert!(err <= Float::with_val(64, &c.quad_rel_tol * 4u32));
    }

    #[test]
    fn rejects_empty_interval() {
        let c = cfg();
        let r = integrate(|_| Ok(c.real(1)), &c.real(1), &c.real(1), &c);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn reports_non_convergence() {
        // A jump inside the interval defeats the exponential convergence at
        // this tolerance within the level budget.
        let c = PrecisionConfig::with_tolerances(256, pow2(-200), pow2(-100)).unwrap();
        let r = integrate(
            |x| Ok(if *x < 0.3 { c.real(0) } else { c.real(1) }),
            &c.real(0),
            &c.real(1),
            &c,
        );
        assert!(matches!(r, Err(Error::QuadratureNonConvergence { .. })));
    }
}
