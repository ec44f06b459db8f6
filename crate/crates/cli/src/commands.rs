//! One function per subcommand. Each parses its real-valued flags with
//! [`parse_real`], runs the library operation and fills a [`Report`].

use std::str::FromStr;

use ivdf_core::asymptotic::{log_spaced, run_check, CheckKind};
use ivdf_core::black_scholes::{bs_price, bs_price_roper, Quote, VolPoint};
use ivdf_core::guess::{guess_ode_rational, guess_ode_with, GuessConfig, GuessReport, GuessStatus};
use ivdf_core::guess::controls::Scale;
use ivdf_core::implied::{aux_f, aux_f_integrand, aux_f_inv, combined_tolerance, f_eval, implied_vol, SpecializationPoint};
use ivdf_core::precision::pow2;
use ivdf_core::series::{series_f_aux, series_f_direct, specialization_center, tri_series_i_at, PowerSeries};
use ivdf_core::{PrecisionConfig, XReal};
use rug::{Float, Rational};

use crate::expr::parse_real;
use crate::report::{Check, Report, Table};
use crate::CliError;

/// Options shared by every command.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Global {
    pub bits: u32,
    /// Significant digits in CSV tables.
    pub digits: usize,
}

impl Default for Global {
    fn default() -> Self {
        Global { bits: 256, digits: 30 }
    }
}

impl Global {
    pub fn config(&self) -> Result<PrecisionConfig, CliError> {
        Ok(PrecisionConfig::new(self.bits)?)
    }
}

fn real(report: &mut Report, name: &str, raw: &str, bits: u32) -> Result<XReal, CliError> {
    let v = parse_real(raw, bits)?;
    report.param(name, raw, Some(&v));
    Ok(v)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PriceMethod {
    Closed,
    Roper,
    Both,
}

impl FromStr for PriceMethod {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "closed" => Ok(PriceMethod::Closed),
            "roper" => Ok(PriceMethod::Roper),
            "both" => Ok(PriceMethod::Both),
            _ => Err(CliError::Usage(format!("unknown method `{s}`; expected closed, roper or both"))),
        }
    }
}

pub fn price(spot: &str, strike: &str, maturity: &str, sigma: &str, method: PriceMethod, g: Global) -> Result<Report, CliError> {
    let cfg = g.config()?;
    let mut r = Report::new("price", "BLACK_SCHOLES_PRICE", &cfg);
    let s = real(&mut r, "spot", spot, g.bits)?;
    let k = real(&mut r, "strike", strike, g.bits)?;
    let t = real(&mut r, "maturity", maturity, g.bits)?;
    let v = real(&mut r, "sigma", sigma, g.bits)?;
    r.option("method", format!("{method:?}").to_lowercase());
    let p = VolPoint::new(s.clone(), k, t, v)?;
    let closed = matches!(method, PriceMethod::Closed | PriceMethod::Both).then(|| bs_price(&p)).transpose()?;
    let roper = matches!(method, PriceMethod::Roper | PriceMethod::Both)
        .then(|| bs_price_roper(&p, &cfg))
        .transpose()?;
    if let Some(c) = &closed {
        r.real("price_closed_form", c);
    }
    if let Some(c) = &roper {
        r.real("price_integral_form", c);
    }
    if let (Some(a), Some(b)) = (&closed, &roper) {
        let diff = Float::with_val(g.bits, a - b).abs();
        r.real("abs_difference", &diff);
        let threshold = Float::with_val(g.bits, &cfg.quad_rel_tol * 4u32) * &s;
        r.check(Check::at_most("closed and integral forms agree", &diff, &threshold));
    }
    Ok(r)
}

pub fn implied(spot: &str, strike: &str, maturity: &str, call: &str, g: Global) -> Result<Report, CliError> {
    let cfg = g.config()?;
    let mut r = Report::new("implied-vol", "IMPLIED_VOLATILITY", &cfg);
    let s = real(&mut r, "spot", spot, g.bits)?;
    let k = real(&mut r, "strike", strike, g.bits)?;
    let t = real(&mut r, "maturity", maturity, g.bits)?;
    let c = real(&mut r, "price", call, g.bits)?;
    let q = Quote::new(s, k, t, c.clone())?;
    let sigma = implied_vol(&q, &cfg)?;
    let repriced = bs_price(&q.at_sigma(sigma.clone())?)?;
    let residual = Float::with_val(g.bits, &repriced - &c).abs() / &c;
    r.real("sigma", &sigma);
    r.real("repricing_relative_residual", &residual);
    let threshold = pow2(-(g.bits as i32) / 2);
    r.check(Check::at_most("repricing residual relative to price", &residual, &threshold));
    Ok(r)
}

pub fn f(strike: &str, maturity: &str, g: Global) -> Result<Report, CliError> {
    let cfg = g.config()?;
    let mut r = Report::new("f", "F_ON_SPECIALIZATION_CURVE", &cfg);
    let k = real(&mut r, "strike", strike, g.bits)?;
    let t = real(&mut r, "maturity", maturity, g.bits)?;
    let p = SpecializationPoint::new(k.clone(), t.clone())?;
    let fv = f_eval(&p, &cfg)?;
    let x = aux_f_inv(&k, &cfg)?;
    let scaled = Float::with_val(g.bits, t.sqrt_ref()) * &fv;
    let gap = Float::with_val(g.bits, &scaled - &x).abs();
    let tol = combined_tolerance(&x, &cfg)?;
    r.real("f", &fv);
    r.real("inverse_aux_at_strike", &x);
    r.real("consistency_gap", &gap);
    r.check(Check::at_most("|sqrt(T) f(K) - F^-1(K)|", &gap, &tol));
    Ok(r)
}

pub fn big_f(x: &str, g: Global) -> Result<Report, CliError> {
    let cfg = g.config()?;
    let mut r = Report::new("F", "AUX_F", &cfg);
    let xv = real(&mut r, "x", x, g.bits)?;
    let v = aux_f(&xv, &cfg)?;
    r.real("value", &v);
    Ok(r)
}

pub fn f_inv(y: &str, g: Global) -> Result<Report, CliError> {
    let cfg = g.config()?;
    let mut r = Report::new("F-inv", "AUX_F_INVERSE", &cfg);
    let yv = real(&mut r, "y", y, g.bits)?;
    let x = aux_f_inv(&yv, &cfg)?;
    let back = aux_f(&x, &cfg)?;
    let rel = Float::with_val(g.bits, &back - &yv).abs() / &yv;
    // A relative step of root_rel_tol in x moves F by x F'/F times as much.
    let elasticity = Float::with_val(g.bits, &x * aux_f_integrand(&x)?) / &back;
    let one = Float::with_val(g.bits, 1);
    let threshold = (Float::with_val(g.bits, &cfg.root_rel_tol * elasticity) * x.clone().max(&one) + &cfg.quad_rel_tol) * 8u32;
    r.real("value", &x);
    r.real("round_trip_relative_error", &rel);
    r.check(Check::at_most("F(F^-1(y)) reproduces y", &rel, &threshold));
    Ok(r)
}

pub fn asympt(kind: &str, grid_min: Option<&str>, grid_max: Option<&str>, points: Option<usize>, g: Global) -> Result<Report, CliError> {
    let cfg = g.config()?;
    let kind = CheckKind::from_str(kind)?;
    let mut r = Report::new("asympt", kind.name(), &cfg);
    r.option("kind", kind.name());
    let grid = match (grid_min, grid_max) {
        (None, None) => {
            if points.is_some() {
                return Err(CliError::Usage("--points needs --grid-min and --grid-max".into()));
            }
            kind.default_grid(g.bits)
        }
        (Some(a), Some(b)) => {
            let n = points.unwrap_or(8);
            r.option("points", n);
            let a = real(&mut r, "grid_min", a, g.bits)?;
            let b = real(&mut r, "grid_max", b, g.bits)?;
            if !(a > 0 && a < b) || n < 2 {
                return Err(CliError::Usage("grid needs 0 < grid-min < grid-max and at least 2 points".into()));
            }
            log_spaced(g.bits, a.to_f64(), b.to_f64(), n)
        }
        _ => return Err(CliError::Usage("--grid-min and --grid-max go together".into())),
    };
    let rep = run_check(kind, &grid, &cfg)?;
    let fmt = |v: f64| format!("{v:e}");
    r.output("grid", rep.grid.iter().map(|v| fmt(*v)).collect::<Vec<_>>());
    r.output("observed", rep.observed.iter().map(|v| fmt(*v)).collect::<Vec<_>>());
    r.output("fitted_order", rep.fitted_order.map(fmt));
    r.output("tolerance_used", fmt(rep.tolerance_used));
    r.output("dropped", serde_json::to_value(&rep.dropped).expect("serializable"));
    let (lo, hi) = rep
        .observed
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    for c in &rep.conditions {
        let value = match (c.name.starts_with("fitted order"), rep.fitted_order) {
            (true, Some(o)) => fmt(o),
            _ => format!("observed in [{}, {}]", fmt(lo), fmt(hi)),
        };
        r.check(Check::new(c.name.clone(), value, c.name.clone(), c.pass));
    }
    r.table = Some(Table {
        columns: vec![if kind.on_x_axis() { "x" } else { "y" }.to_string(), "observed".to_string()],
        rows: rep
            .grid
            .iter()
            .zip(&rep.observed)
            .map(|(a, b)| vec![Float::with_val(53, *a), Float::with_val(53, *b)])
            .collect(),
    });
    Ok(r)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeriesTarget {
    F,
    Finv,
    SmallF,
    I3,
}

impl FromStr for SeriesTarget {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "F" => Ok(SeriesTarget::F),
            "Finv" => Ok(SeriesTarget::Finv),
            "f" => Ok(SeriesTarget::SmallF),
            "I3" => Ok(SeriesTarget::I3),
            _ => Err(CliError::Usage(format!("unknown series target `{s}`; expected F, Finv, f or I3"))),
        }
    }
}

/// `--center` is the expansion point of `F` (default 1) or of `F^-1`
/// (default `1/(2e)`); `f` and `I3` have fixed centers.
pub fn series(target: SeriesTarget, order: usize, center: Option<&str>, maturity: &str, g: Global) -> Result<Report, CliError> {
    let cfg = g.config()?;
    let mut r = Report::new("series", "SERIES", &cfg);
    r.option("target", format!("{target:?}"));
    r.option("order", order);
    if order == 0 {
        return Err(CliError::Usage("--order must be at least 1".into()));
    }
    if center.is_some() && matches!(target, SeriesTarget::SmallF | SeriesTarget::I3) {
        return Err(CliError::Usage("targets f and I3 are expanded at fixed centers; drop --center".into()));
    }
    match target {
        SeriesTarget::F => {
            let x0 = real(&mut r, "center", center.unwrap_or("1"), g.bits)?;
            let s = series_f_aux(&x0, order, &cfg)?;
            r.output("series", serde_json::to_value(&s).expect("serializable"));
        }
        SeriesTarget::Finv => {
            let y0 = match center {
                Some(c) => real(&mut r, "center", c, g.bits)?,
                None => specialization_center(g.bits),
            };
            let x0 = aux_f_inv(&y0, &cfg)?;
            let s = series_f_aux(&x0, order, &cfg)?.reverse()?.with_center(y0);
            r.output("series", serde_json::to_value(&s).expect("serializable"));
        }
        SeriesTarget::SmallF => {
            let t = real(&mut r, "maturity", maturity, g.bits)?;
            let s = series_f_direct(order, &t, &cfg)?;
            r.output("series", serde_json::to_value(&s).expect("serializable"));
        }
        SeriesTarget::I3 => {
            let t = real(&mut r, "maturity", maturity, g.bits)?;
            let degree = u32::try_from(order).map_err(|_| CliError::Usage("--order too large".into()))?;
            let tri = tri_series_i_at(degree, &t, &cfg)?;
            let [s0, k0, c0] = tri.center().clone();
            let q = Quote::new(s0, k0, t, c0)?;
            let sigma = implied_vol(&q, &cfg)?;
            let g0 = tri.coeff(0, 0, 0).expect("constant term").clone();
            let gap = Float::with_val(g.bits, &g0 - &sigma).abs();
            let threshold = Float::with_val(g.bits, &cfg.root_rel_tol * 8u32);
            r.output("series", serde_json::to_value(&tri).expect("serializable"));
            r.real("implied_vol_at_center", &sigma);
            r.check(Check::at_most("constant term equals implied volatility at center", &gap, &threshold));
        }
    }
    Ok(r)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GuessTarget {
    SmallF,
    Finv,
    File(String),
}

pub struct GuessArgs<'a> {
    pub target: &'a str,
    pub file: Option<&'a str>,
    pub r_max: usize,
    pub d_max: usize,
    pub n_coeffs: usize,
}

pub fn parse_guess_target(target: &str, file: Option<&str>) -> Result<GuessTarget, CliError> {
    match (target, file) {
        ("f", None) => Ok(GuessTarget::SmallF),
        ("Finv", None) => Ok(GuessTarget::Finv),
        ("file", Some(p)) => Ok(GuessTarget::File(p.to_string())),
        ("file", None) => Err(CliError::Usage("--target file needs --file PATH".into())),
        ("f" | "Finv", Some(_)) => Err(CliError::Usage("--file is only used with --target file".into())),
        (other, _) => Err(CliError::Usage(format!("unknown guess target `{other}`; expected f, Finv or file"))),
    }
}

/// Coefficients, one per line: either all exact rationals (`p/q` or
/// integers) or decimal expressions. Blank lines and `#` comments are
/// ignored.
pub fn read_coefficients(text: &str, bits: u32) -> Result<Coefficients, CliError> {
    let lines: Vec<&str> = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .collect();
    if lines.is_empty() {
        return Err(CliError::Usage("coefficient file is empty".into()));
    }
    let exact: Option<Vec<Rational>> = lines.iter().map(|l| Rational::from_str(l).ok()).collect();
    match exact {
        Some(q) => Ok(Coefficients::Exact(q)),
        None => lines
            .iter()
            .map(|l| parse_real(l, bits))
            .collect::<Result<Vec<_>, _>>()
            .map(Coefficients::Float),
    }
}

pub enum Coefficients {
    Exact(Vec<Rational>),
    Float(Vec<XReal>),
}

pub fn guess(args: &GuessArgs<'_>, g: Global) -> Result<Report, CliError> {
    let target = parse_guess_target(args.target, args.file)?;
    let pcfg = g.config()?;
    let gcfg = GuessConfig::new(args.r_max, args.d_max, args.n_coeffs, g.bits)?;
    let mut r = Report::new("guess", "ODE_GUESS", &pcfg);
    r.option("target", args.target);
    r.option("rmax", args.r_max);
    r.option("dmax", args.d_max);
    r.option("ncoeffs", args.n_coeffs);
    let order = args.n_coeffs - 1;
    let report = match &target {
        GuessTarget::SmallF | GuessTarget::Finv => {
            // f at T = 1 and F^-1 share one expansion at 1/(2e).
            guess_ode_with(
                |bits| {
                    let c = PrecisionConfig::new(bits)?;
                    Ok(series_f_direct(order, &c.real(1), &c)?.into_coeffs())
                },
                None,
                &gcfg,
            )?
        }
        GuessTarget::File(path) => {
            r.option("file", path);
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read coefficient file {path}: {e}")))?;
            match read_coefficients(&text, g.bits)? {
                Coefficients::Exact(q) => {
                    if q.len() < args.n_coeffs {
                        return Err(CliError::Usage(format!(
                            "file has {} coefficients, --ncoeffs asks for {}",
                            q.len(),
                            args.n_coeffs
                        )));
                    }
                    guess_ode_rational(&q, Scale::One, &gcfg)?
                }
                Coefficients::Float(v) => {
                    let s = PowerSeries::new(Float::new(g.bits), v)?;
                    ivdf_core::guess::guess_ode(&s, &gcfg)?
                }
            }
        }
    };
    fill_guess(&mut r, &report);
    Ok(r)
}

fn fill_guess(r: &mut Report, g: &GuessReport) {
    r.output("status", serde_json::to_value(g.status).expect("serializable"));
    r.output("report", serde_json::to_value(g).expect("serializable"));
    let indeterminate = g.indeterminate_cells();
    r.check(Check::new(
        "decision reached with no indeterminate cells",
        indeterminate.to_string(),
        "0",
        indeterminate == 0,
    ));
    if g.status == GuessStatus::Found {
        if let Some(c) = &g.candidate {
            let threshold = pow2(g.final_thresholds.holdout_log2);
            r.check(Check::at_most("held-out residual of the relation", &c.residual, &threshold));
        }
    }
}
