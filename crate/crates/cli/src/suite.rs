//! The acceptance criteria as executable checks, at two sizes.
//!
//! `Full` runs each criterion at its stated grid, precision and tolerance.
//! `Fast` shrinks grids, lattices and precision so the whole suite finishes
//! in about a minute; its thresholds are scaled with the precision.

use std::time::Instant;

use ivdf_core::asymptotic::{check_int_identity, run_check, CheckKind};
use ivdf_core::black_scholes::{bs_price, bs_price_roper, Quote, VolPoint};
use ivdf_core::guess::controls::Control;
use ivdf_core::guess::{guess_ode_with, run_control, verify_relation, GuessConfig, GuessReport, GuessStatus, OdeCandidate};
use ivdf_core::implied::{aux_f_inv, f_eval, implied_vol, SpecializationPoint};
use ivdf_core::precision::{euler, pow2};
use ivdf_core::series::{series_f_direct, substitute_specialize, tri_series_i, PowerSeries};
use ivdf_core::{PrecisionConfig, XReal};
use rug::Float;
use serde::Serialize;

use crate::report::{Check, Report};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Fast,
    Full,
}

impl std::str::FromStr for Level {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "fast" => Ok(Level::Fast),
            "full" => Ok(Level::Full),
            _ => Err(CliError::Usage(format!("unknown level `{s}`; expected fast or full"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub title: String,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub duration_seconds: f64,
}

impl CriterionOutcome {
    /// One-line summary: `criterion N PASS|FAIL title: first failing check`.
    pub fn line(&self) -> String {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        let detail = self
            .checks
            .iter()
            .find(|c| !c.pass)
            .or_else(|| self.checks.first())
            .map(|c| format!("{} = {} (threshold {})", c.name, c.value, c.threshold))
            .unwrap_or_default();
        format!("criterion {} {verdict} {}: {detail}", self.id, self.title)
    }
}

type Checks = Result<Vec<Check>, CliError>;

fn timed(id: u32, title: &str, f: impl FnOnce() -> Checks) -> CriterionOutcome {
    let start = Instant::now();
    let checks = f().unwrap_or_else(|e| vec![Check::new("criterion ran to completion", e.to_string(), "no error", false)]);
    CriterionOutcome {
        id,
        title: title.to_string(),
        pass: !checks.is_empty() && checks.iter().all(|c| c.pass),
        checks,
        duration_seconds: start.elapsed().as_secs_f64(),
    }
}

fn lin(a: f64, b: f64, n: usize, k: usize) -> f64 {
    if n == 1 {
        a
    } else {
        a + (b - a) * k as f64 / (n - 1) as f64
    }
}

fn geo(a: f64, b: f64, n: usize, k: usize) -> f64 {
    lin(a.ln(), b.ln(), n, k).exp()
}

fn num(prec: u32, s: &str) -> XReal {
    Float::with_val(prec, Float::parse(s).expect("literal"))
}

/// Closed-form and integral-form prices agree over an `(S/K, σ, T)` grid.
pub fn criterion_1(level: Level) -> Checks {
    let (ns, nv, ts): (usize, usize, &[&str]) = match level {
        Level::Full => (10, 10, &["0.25", "0.5", "1", "2", "4"]),
        Level::Fast => (3, 3, &["0.25", "4"]),
    };
    let bits = 256;
    let cfg = PrecisionConfig::new(bits)?.with_quad_tol(pow2(-120))?;
    let mut worst = Float::new(bits);
    for i in 0..ns {
        // S/K = e^u with u evenly spaced in [-2, 2]; K = 1.
        let u = Float::with_val(bits, -2) + Float::with_val(bits, 4 * i as u32) / (ns.max(2) - 1) as u32;
        let spot = u.exp();
        for j in 0..nv {
            let sigma = Float::with_val(bits, geo(0.05, 2.0, nv, j));
            for t in ts {
                let p = VolPoint::new(spot.clone(), Float::with_val(bits, 1), num(bits, t), sigma.clone())?;
                let d = Float::with_val(bits, bs_price(&p)? - bs_price_roper(&p, &cfg)?).abs() / &spot;
                if d > worst {
                    worst = d;
                }
            }
        }
    }
    Ok(vec![Check::at_most(
        format!("max |closed - integral| / S over {} points", ns * nv * ts.len()),
        &worst,
        &num(bits, "1e-30"),
    )])
}

/// `implied_vol(bs_price(σ))` recovers σ over a `(σ, log(S/K))` grid.
pub fn criterion_2(level: Level) -> Checks {
    let (nv, nl) = match level {
        Level::Full => (10, 9),
        Level::Fast => (4, 3),
    };
    let bits = 256;
    let cfg = PrecisionConfig::new(bits)?;
    let mut worst = Float::new(bits);
    let mut unrepresentable = Vec::new();
    for i in 0..nl {
        let l = Float::with_val(bits, -2) + Float::with_val(bits, 4 * i as u32) / (nl - 1) as u32;
        let spot = Float::with_val(bits, l.exp_ref());
        for j in 0..nv {
            let sigma = Float::with_val(bits, geo(0.01, 5.0, nv, j));
            let p = VolPoint::new(spot.clone(), Float::with_val(bits, 1), Float::with_val(bits, 1), sigma.clone())?;
            let c = bs_price(&p)?;
            match Quote::new(spot.clone(), Float::with_val(bits, 1), Float::with_val(bits, 1), c) {
                Ok(q) => {
                    let got = implied_vol(&q, &cfg)?;
                    let rel = Float::with_val(bits, &got - &sigma).abs() / &sigma;
                    if rel > worst {
                        worst = rel;
                    }
                }
                Err(_) => unrepresentable.push(format!("(log(S/K)={:.3}, sigma={:.4})", l.to_f64(), sigma.to_f64())),
            }
        }
    }
    let total = nv * nl;
    let recovered = total - unrepresentable.len();
    Ok(vec![
        Check::at_most(
            format!("max relative error in sigma over the {recovered} representable grid points"),
            &worst,
            &num(bits, "1e-25"),
        ),
        Check::new(
            "grid points whose price keeps its time value at 256 bits",
            format!("{recovered} of {total}; lost: {}", unrepresentable.join(" ")),
            format!("{total} of {total}"),
            unrepresentable.is_empty(),
        ),
    ])
}

/// `√T f(K) = F⁻¹(K)` on a strike grid for two maturities.
pub fn criterion_3(level: Level) -> Checks {
    let n = match level {
        Level::Full => 20,
        Level::Fast => 5,
    };
    let bits = 256;
    let cfg = PrecisionConfig::new(bits)?;
    let inv_e = Float::with_val(bits, euler(bits).recip_ref());
    let hi = Float::with_val(bits, &inv_e - num(bits, "1e-3"));
    let lo = num(bits, "1e-3");
    let ratio = Float::with_val(bits, &hi / &lo).ln();
    let mut worst = Float::new(bits);
    for k in 0..n {
        let strike = Float::with_val(bits, Float::with_val(bits, &ratio * k as u32) / (n - 1) as u32).exp() * &lo;
        let x = aux_f_inv(&strike, &cfg)?;
        for t in [1u32, 4] {
            let p = SpecializationPoint::new(strike.clone(), Float::with_val(bits, t))?;
            let f = f_eval(&p, &cfg)?;
            let gap = Float::with_val(bits, Float::with_val(bits, t).sqrt() * f - &x).abs();
            if gap > worst {
                worst = gap;
            }
        }
    }
    Ok(vec![Check::at_most(
        format!("max |sqrt(T) f(K) - F^-1(K)| over {} strikes, T in {{1, 4}}", n),
        &worst,
        &num(bits, "1e-20"),
    )])
}

/// Integration-by-parts identity at three abscissae.
pub fn criterion_4(_level: Level) -> Checks {
    let bits = 256;
    let cfg = PrecisionConfig::new(bits)?;
    let mut out = Vec::new();
    for x in ["0.1", "0.3", "1"] {
        let rep = check_int_identity(&num(bits, x), &cfg)?;
        let disc = Float::with_val(bits, rep.observed[0]);
        let mut c = Check::at_most(format!("relative discrepancy at x = {x}"), &disc, &num(bits, "1e-30"));
        c.pass &= rep.pass;
        out.push(c);
    }
    Ok(out)
}

/// Asymptotic orders near 0 of `N'`, `F` and `F⁻¹`.
pub fn criterion_5(level: Level) -> Checks {
    let bits = 256;
    let cfg = PrecisionConfig::new(bits)?;
    let y_grid = |kind: CheckKind| -> Vec<XReal> {
        let g = kind.default_grid(bits);
        match level {
            Level::Full => g,
            // Every other decade down to 1e-10, all at the base precision.
            Level::Fast => g.into_iter().take(7).step_by(2).collect(),
        }
    };
    let mut out = Vec::new();
    for kind in [CheckKind::FLeadingOrder, CheckKind::NPrimeRemainder] {
        let rep = run_check(kind, &kind.default_grid(bits), &cfg)?;
        let order = rep.fitted_order.unwrap_or(f64::NAN);
        out.push(Check::new(
            format!("{} fitted order", kind.name()),
            format!("{order:.4}"),
            "2 +/- 0.2",
            rep.condition_pass("fitted order within 2 ± 0.2").unwrap_or(false),
        ));
    }
    let bound = run_check(CheckKind::FinvBound, &y_grid(CheckKind::FinvBound), &cfg)?;
    out.push(Check::new(
        "FINV_BOUND: F^-1(y) < (2 log(1/y))^(-1/2) at every grid point",
        format!("ratio F^-1(y) sqrt(2 log(1/y)) in [{:.4}, {:.4}]", min(&bound.observed), max(&bound.observed)),
        "below 1 everywhere",
        bound.condition_pass("bound holds at every point").unwrap_or(false) && bound.dropped.is_empty(),
    ));
    let sharp = run_check(CheckKind::FinvSharp, &y_grid(CheckKind::FinvSharp), &cfg)?;
    out.push(Check::new(
        "FINV_SHARP: ratio monotone toward y = 0",
        format!("{:?}", sharp.observed.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>()),
        "nondecreasing as y decreases",
        sharp.condition_pass("ratio nondecreasing toward 0").unwrap_or(false),
    ));
    out.push(Check::new(
        "FINV_SHARP: ratio at the smallest y",
        format!("{:.6}", sharp.observed.last().copied().unwrap_or(f64::NAN)),
        ">= 0.9",
        sharp.condition_pass("ratio at smallest y at least 0.9").unwrap_or(false),
    ));
    Ok(out)
}

fn min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Trivariate expansion restricted to the curve equals the direct
/// univariate expansion.
pub fn criterion_6(level: Level) -> Checks {
    let (bits, degree, order, tol) = match level {
        Level::Full => (512, 8, 5, "1e-30"),
        Level::Fast => (256, 4, 3, "1e-30"),
    };
    let cfg = PrecisionConfig::new(bits)?;
    let tri = tri_series_i(degree, &cfg)?;
    let via_tri = substitute_specialize(&tri, order)?;
    let direct = series_f_direct(order, &Float::with_val(bits, 1), &cfg)?;
    let mut worst = Float::new(bits);
    for n in 0..=order {
        let d = Float::with_val(bits, via_tri.coeff(n) - direct.coeff(n)).abs();
        if d > worst {
            worst = d;
        }
    }
    Ok(vec![Check::at_most(
        format!("max coefficient difference, orders 0..={order}, total degree {degree}, {bits} bits"),
        &worst,
        &num(bits, tol),
    )])
}

fn guess_bounds(level: Level) -> (usize, u32) {
    match level {
        Level::Full => (6, 512),
        Level::Fast => (3, 256),
    }
}

/// Positive controls: found, exact relation recovered, float residual
/// small, and the relation survives re-verification at doubled precision
/// on 1.5 times as many coefficients.
pub fn criterion_7(level: Level) -> Checks {
    let (rd, bits) = guess_bounds(level);
    // 2^-240 at 512 bits.
    let residual_log2 = -(bits as i32) * 15 / 32;
    let n = match level {
        Level::Full => 64,
        Level::Fast => 40,
    };
    let cfg = GuessConfig::new(rd, rd, n, bits)?;
    let mut out = Vec::new();
    for control in Control::ALL.into_iter().filter(|c| c.is_d_finite()) {
        let o = run_control(control, &cfg);
        let Some(rep) = &o.report else {
            out.push(Check::new(control.name(), o.detail, "FOUND", false));
            continue;
        };
        out.push(Check::new(
            format!("{}: FOUND with the known minimal relation on the exact path", control.name()),
            o.detail.clone(),
            "ok",
            o.pass,
        ));
        match &rep.candidate {
            Some(c) => {
                out.push(Check::at_most(
                    format!("{}: held-out residual on the float path", control.name()),
                    &c.residual,
                    &pow2(residual_log2),
                ));
                let reverify = reverify(control, c, rep, bits)?;
                out.push(Check::at_most(
                    format!("{}: residual at {} bits on 1.5x coefficients", control.name(), 2 * bits),
                    &reverify,
                    &pow2(rep.final_thresholds.holdout_log2),
                ));
            }
            None => out.push(Check::new(format!("{}: float candidate", control.name()), "absent", "present", false)),
        }
    }
    Ok(out)
}

fn reverify(control: Control, c: &OdeCandidate, rep: &GuessReport, bits: u32) -> Result<XReal, CliError> {
    let n = rep.config.n_coeffs * 3 / 2;
    let (q, scale) = control.coefficients(n);
    let coeffs = ivdf_core::guess::rational_to_float(&q, scale, 2 * bits);
    let s = PowerSeries::new(Float::new(2 * bits), coeffs)?;
    Ok(verify_relation(&s, c))
}

/// Negative evidence: no relation in the lattice for non-D-finite inputs.
pub fn criterion_8(level: Level) -> Checks {
    let (rd, bits) = guess_bounds(level);
    let (n_ctrl, n_f) = match level {
        Level::Full => (120, 64),
        Level::Fast => (60, 40),
    };
    let floor_log2 = -(bits as i32) / 8;
    let mut reports: Vec<(String, Result<GuessReport, CliError>)> = Vec::new();
    let cfg = GuessConfig::new(rd, rd, n_ctrl, bits)?;
    for control in [Control::Tan, Control::ExpExp] {
        let (q, scale) = control.coefficients(n_ctrl);
        let rep = ivdf_core::guess::guess_ode_rational(&q, scale, &cfg).map_err(CliError::from);
        reports.push((format!("{} ({n_ctrl} coefficients)", control.name()), rep));
    }
    let fcfg = GuessConfig::new(rd, rd, n_f, bits)?;
    let f_series = |bits: u32| -> ivdf_core::Result<Vec<XReal>> {
        let c = PrecisionConfig::new(bits)?;
        Ok(series_f_direct(n_f - 1, &c.real(1), &c)?.into_coeffs())
    };
    let f_rep = guess_ode_with(f_series, None, &fcfg).map_err(CliError::from);
    reports.push((format!("f at 1/(2e), T = 1 ({n_f} coefficients)"), f_rep));
    let inv_series = |bits: u32| -> ivdf_core::Result<Vec<XReal>> {
        let c = PrecisionConfig::new(bits)?;
        Ok(ivdf_core::series::series_f_inv_center(n_f - 1, &c)?.into_coeffs())
    };
    let inv_rep = guess_ode_with(inv_series, None, &fcfg).map_err(CliError::from);
    reports.push((format!("F^-1 at 1/(2e) ({n_f} coefficients)"), inv_rep));

    let mut out = Vec::new();
    for (name, rep) in reports {
        match rep {
            Err(e) => out.push(Check::new(format!("{name}: NONE_UP_TO_BOUNDS"), e.to_string(), "NONE_UP_TO_BOUNDS", false)),
            Ok(rep) => {
                out.push(Check::new(
                    format!("{name}: status"),
                    format!("{:?} at {} bits", rep.status, rep.working_bits_used),
                    "NoneUpToBounds",
                    rep.status == GuessStatus::NoneUpToBounds,
                ));
                let min_log2 = rep.min_ratio_log2().unwrap_or(f64::NEG_INFINITY);
                out.push(Check::new(
                    format!("{name}: smallest min_singular_ratio over the lattice (log2)"),
                    format!("{min_log2:.2}"),
                    format!(">= {floor_log2}"),
                    min_log2 >= f64::from(floor_log2),
                ));
                let indeterminate: usize = rep.passes.iter().map(|p| p.indeterminate_cells).sum();
                out.push(Check::new(
                    format!("{name}: indeterminate cells across all passes"),
                    format!("{indeterminate} (passes at {:?} bits)", rep.passes.iter().map(|p| p.working_bits).collect::<Vec<_>>()),
                    "0",
                    indeterminate == 0,
                ));
            }
        }
    }
    Ok(out)
}

pub const TITLES: [&str; 8] = [
    "two-pricer equivalence",
    "inversion round trip",
    "two-path identity",
    "integration-by-parts identity",
    "asymptotic orders",
    "series pipeline equivalence",
    "guesser positive controls",
    "guesser negative evidence",
];

/// Runs criterion `id` (1 to 8).
pub fn run_criterion(id: u32, level: Level) -> CriterionOutcome {
    let title = TITLES[(id - 1) as usize];
    match id {
        1 => timed(id, title, || criterion_1(level)),
        2 => timed(id, title, || criterion_2(level)),
        3 => timed(id, title, || criterion_3(level)),
        4 => timed(id, title, || criterion_4(level)),
        5 => timed(id, title, || criterion_5(level)),
        6 => timed(id, title, || criterion_6(level)),
        7 => timed(id, title, || criterion_7(level)),
        8 => timed(id, title, || criterion_8(level)),
        _ => panic!("criteria are numbered 1 to 8"),
    }
}

/// Criteria 1 to 8 in order.
pub fn run_all(level: Level) -> Vec<CriterionOutcome> {
    (1..=8).map(|id| run_criterion(id, level)).collect()
}

/// Aggregate report over `outcomes`, one check per criterion.
pub fn report(level: Level, outcomes: &[CriterionOutcome]) -> Result<Report, CliError> {
    let cfg = PrecisionConfig::new(256)?;
    let mut r = Report::new("suite", "ACCEPTANCE_SUITE", &cfg);
    r.option("level", format!("{level:?}").to_lowercase());
    for o in outcomes {
        r.check(Check::new(
            format!("criterion {}: {}", o.id, o.title),
            if o.pass { "pass" } else { "fail" },
            "pass",
            o.pass,
        ));
    }
    r.output("criteria", serde_json::to_value(outcomes).expect("serializable"));
    Ok(r)
}

/// Every criterion at `level`, as one report.
pub fn suite(level: Level) -> Result<Report, CliError> {
    report(level, &run_all(level))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_hit_their_endpoints() {
        assert_eq!(lin(-2.0, 2.0, 9, 0), -2.0);
        assert_eq!(lin(-2.0, 2.0, 9, 8), 2.0);
        assert!((geo(0.05, 2.0, 10, 9) - 2.0).abs() < 1e-12);
        assert!((geo(0.05, 2.0, 10, 0) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn line_names_first_failure() {
        let o = CriterionOutcome {
            id: 3,
            title: "t".into(),
            pass: false,
            checks: vec![Check::new("a", "1", "2", true), Check::new("b", "5", "2", false)],
            duration_seconds: 0.0,
        };
        assert_eq!(o.line(), "criterion 3 FAIL t: b = 5 (threshold 2)");
    }

    #[test]
    fn fast_criteria_that_are_cheap_pass() {
        for id in [1, 3, 4] {
            let o = run_criterion(id, Level::Fast);
            assert!(o.pass, "{}", o.line());
        }
    }

    #[test]
    fn level_parsing() {
        assert_eq!("fast".parse::<Level>().unwrap(), Level::Fast);
        assert!(matches!("slow".parse::<Level>(), Err(CliError::Usage(_))));
    }
}
