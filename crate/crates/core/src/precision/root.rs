//! Safeguarded Newton iteration for strictly monotone functions.

use rug::Float;

use super::{PrecisionConfig, XReal};
use crate::error::{Error, Result};

const MAX_ITERATIONS: u32 = 4000;

/// One evaluation of the function being inverted.
#[derive(Clone, Debug)]
pub struct Probe {
    pub value: XReal,
    /// Derivative at the same point, when the caller has it.
    pub slope: Option<XReal>,
}

impl Probe {
    pub fn value(value: XReal) -> Self {
        Probe { value, slope: None }
    }

    pub fn with_slope(value: XReal, slope: XReal) -> Self {
        Probe {
            value,
            slope: Some(slope),
        }
    }
}

/// Converged root with its final residual `g(x) - target`.
#[derive(Clone, Debug)]
pub struct Root {
    pub x: XReal,
    pub residual: XReal,
    pub iterations: u32,
}

/// Solves `g(x) = target` on `[lo, hi]` for a strictly monotone `g`
/// (increasing or decreasing).
pub fn solve_monotone<G>(g: G, target: &XReal, lo: &XReal, hi: &XReal, cfg: &PrecisionConfig) -> Result<Root>
where
    G: FnMut(&XReal) -> Result<Probe>,
{
    solve_monotone_from(g, target, lo, hi, None, cfg)
}

/// As [`solve_monotone`], starting from `seed` when it lies inside the
/// bracket.
///
/// Newton steps are taken when they stay inside the current bracket and
/// at least halve the step before last; otherwise the bracket is bisected
/// (geometrically when it spans more than a factor of four on the positive
/// axis). Iteration stops once `|dx| <= root_rel_tol * max(1, |x|)`.
pub fn solve_monotone_from<G>(
    mut g: G,
    target: &XReal,
    lo: &XReal,
    hi: &XReal,
    seed: Option<&XReal>,
    cfg: &PrecisionConfig,
) -> Result<Root>
where
    G: FnMut(&XReal) -> Result<Probe>,
{
    let wp = cfg.working_bits;
    if lo.partial_cmp(hi) != Some(std::cmp::Ordering::Less) {
        return Err(Error::domain("root bracket must satisfy lo < hi"));
    }
    let mut a = Float::with_val(wp, lo);
    let mut b = Float::with_val(wp, hi);
    let fa = residual(&mut g, &a, target)?;
    let fb = residual(&mut g, &b, target)?;
    if fa.is_zero() {
        return Ok(Root { x: a, residual: fa, iterations: 0 });
    }
    if fb.is_zero() {
        return Ok(Root { x: b, residual: fb, iterations: 0 });
    }
    if fa.is_sign_negative() == fb.is_sign_negative() {
        return Err(Error::NotBracketed {
            at_lo: fa.to_f64(),
            at_hi: fb.to_f64(),
        });
    }
    let lo_negative = fa.is_sign_negative();

    let mut x = match seed {
        Some(s) if *s > a && *s < b => Float::with_val(wp, s),
        _ => bisect(&a, &b),
    };
    let mut step = Float::with_val(wp, &b - &a);
    let mut step_old = step.clone();

    for iteration in 1..=MAX_ITERATIONS {
        let probe = g(&x)?;
        let r = Float::with_val(wp, &probe.value - target);
        if r.is_zero() {
            return Ok(Root { x, residual: r, iterations: iteration });
        }
        if r.is_nan() {
            return Err(Error::NonFinite("root finder residual"));
        }
        if r.is_sign_negative() == lo_negative {
            a.clone_from(&x);
        } else {
            b.clone_from(&x);
        }
        let scale = Float::with_val(wp, x.abs_ref()).max(&Float::with_val(wp, 1));
        let tol_x = Float::with_val(wp, &scale * &cfg.root_rel_tol);
        if Float::with_val(wp, &b - &a) <= tol_x {
            return finish(&mut g, x, target, iteration);
        }

        let mut newton_dx = None;
        let newton = probe.slope.as_ref().and_then(|s| {
            if s.is_zero() || !s.is_finite() || !r.is_finite() {
                return None;
            }
            let dx = Float::with_val(wp, &r / s);
            let xn = Float::with_val(wp, &x - &dx);
            newton_dx = Some(Float::with_val(wp, dx.abs_ref()));
            let half_old = Float::with_val(wp, &step_old / 2u32);
            (xn > a && xn < b && Float::with_val(wp, dx.abs_ref()) <= half_old).then_some(xn)
        });
        // A Newton correction below the tolerance (possibly below one ulp
        // of x) means x is already converged.
        if newton.is_none() && newton_dx.as_ref().is_some_and(|d| *d <= tol_x) {
            return finish(&mut g, x, target, iteration);
        }
        let next = newton.unwrap_or_else(|| bisect(&a, &b));
        step_old = step;
        step = Float::with_val(wp, &next - &x).abs();
        x = next;
        if step <= tol_x {
            return finish(&mut g, x, target, iteration);
        }
    }
    Err(Error::RootNonConvergence {
        iterations: MAX_ITERATIONS,
        width: Float::with_val(64, &b - &a).to_f64(),
    })
}

fn residual<G>(g: &mut G, x: &XReal, target: &XReal) -> Result<XReal>
where
    G: FnMut(&XReal) -> Result<Probe>,
{
    let p = g(x)?;
    let r = Float::with_val(x.prec(), &p.value - target);
    if r.is_nan() {
        return Err(Error::NonFinite("root finder residual"));
    }
    Ok(r)
}

fn finish<G>(g: &mut G, x: XReal, target: &XReal, iterations: u32) -> Result<Root>
where
    G: FnMut(&XReal) -> Result<Probe>,
{
    let residual = residual(g, &x, target)?;
    Ok(Root { x, residual, iterations })
}

fn bisect(a: &XReal, b: &XReal) -> XReal {
    let wp = a.prec();
    if a.is_sign_positive() && !a.is_zero() && *b > Float::with_val(wp, a * 4u32) {
        Float::with_val(wp, a * b).sqrt()
    } else {
        Float::with_val(wp, a + b) / 2u32
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precision::{norm_cdf, norm_pdf};
    use rug::ops::Pow;

    fn cfg() -> PrecisionConfig {
        PrecisionConfig::new(256).unwrap()
    }

    fn within(x: &XReal, want: &XReal, tol: &XReal) -> bool {
        let scale = Float::with_val(256, want.abs_ref()).max(&Float::with_val(256, 1));
        Float::with_val(256, x - want).abs() <= Float::with_val(256, scale * tol) * 2u32
    }

    #[test]
    fn identity_root() {
        let c = cfg();
        let t = c.real(0.3);
        let r = solve_monotone(|x| Ok(Probe::with_slope(x.clone(), c.real(1))), &t, &c.real(0), &c.real(1), &c)
            .unwrap();
        assert!(within(&r.x, &t, &c.root_rel_tol));
    }

    #[test]
    fn cdf_median_is_zero() {
        let c = cfg();
        let r = solve_monotone(
            |x| Ok(Probe::with_slope(norm_cdf(x)?, norm_pdf(x)?)),
            &c.real(0.5),
            &c.real(-3),
            &c.real(4),
            &c,
        )
        .unwrap();
        assert!(Float::with_val(256, r.x.abs_ref()) <= c.root_rel_tol);
    }

    /// Plain Newton on x^3 - 5 from x = 2, run independently of the solver.
    fn cube_root_oracle(prec: u32) -> XReal {
        let mut x = Float::with_val(prec, 2);
        for _ in 0..20 {
            let fx = Float::with_val(prec, (&x).pow(3u32)) - 5u32;
            let dfx = Float::with_val(prec, x.square_ref()) * 3u32;
            x -= fx / dfx;
        }
        x
    }

    #[test]
    fn cube_root_with_and_without_derivative() {
        let c = cfg();
        let want = cube_root_oracle(300);
        let want = Float::with_val(256, &want);
        let with = solve_monotone(
            |x| {
                let v = Float::with_val(256, x.pow(3u32));
                Ok(Probe::with_slope(v, Float::with_val(256, x.square_ref()) * 3u32))
            },
            &c.real(5),
            &c.real(0),
            &c.real(2),
            &c,
        )
        .unwrap();
        assert!(within(&with.x, &want, &c.root_rel_tol));
        let without = solve_monotone(
            |x| Ok(Probe::value(Float::with_val(256, x.pow(3u32)))),
            &c.real(5),
            &c.real(0),
            &c.real(2),
            &c,
        )
        .unwrap();
        assert!(within(&without.x, &want, &c.root_rel_tol));
        assert!(without.iterations > with.iterations);
    }

    #[test]
    fn decreasing_function() {
        let c = cfg();
        let r = solve_monotone(
            |x| Ok(Probe::with_slope(Float::with_val(256, -x), c.real(-1))),
            &c.real(-0.25),
            &c.real(0),
            &c.real(1),
            &c,
        )
        .unwrap();
        assert!(within(&r.x, &c.real(0.25), &c.root_rel_tol));
    }

    #[test]
    fn target_outside_range_is_rejected() {
        let c = cfg();
        let r = solve_monotone(|x| Ok(Probe::value(x.clone())), &c.real(3), &c.real(0), &c.real(1), &c);
        assert!(matches!(r, Err(Error::NotBracketed { .. })));
    }

    #[test]
    fn bad_slope_does_not_lose_bracket() {
        // A wildly wrong derivative must not push iterates out of [lo, hi].
        let c = cfg();
        let r = solve_monotone(
            |x| Ok(Probe::with_slope(Float::with_val(256, x.pow(3u32)), c.real(1e-9))),
            &c.real(5),
            &c.real(0),
            &c.real(2),
            &c,
        )
        .unwrap();
        let want = Float::with_val(256, &cube_root_oracle(300));
        assert!(within(&r.x, &want, &c.root_rel_tol));
    }
}
