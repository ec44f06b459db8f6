//! Search for a linear ODE with polynomial coefficients,
//! `sum_{i<=r} P_i(x) y^(i)(x) = 0` with `deg P_i <= d`, annihilating a
//! truncated power series.
//!
//! A negative outcome is evidence bounded by the search parameters, never a
//! proof: every report carries the lattice, coefficient count and precision
//! it covers.
//!
//! Decision rule per `(r, d)` cell, on the row- and column-equilibrated
//! system with a held-out block of rows:
//! - ratio `sigma_min / sigma_max < 2^(-bits/2)` and held-out residual
//!   `< 2^(-bits/4)`: accept,
//! - ratio `> 2^(-bits/8)`: reject,
//! - anything else: indeterminate, which triggers a rerun at doubled
//!   precision.

pub mod controls;
pub mod linalg;

use rayon::prelude::*;
use rug::{Float, Integer, Rational};
use serde::ser::Serializer;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::precision::{euler, to_decimal, to_decimal_digits, XReal};
use crate::series::PowerSeries;
use controls::{Control, Scale};
use linalg::{exact_null_space, smallest_singular, Matrix};

/// Minimum number of rows beyond the unknown count.
pub const GUARD_ROWS: usize = 10;

/// Search bounds and decision thresholds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GuessConfig {
    pub r_max: usize,
    pub d_max: usize,
    pub n_coeffs: usize,
    pub working_bits: u32,
    /// Accept when `sigma_min / sigma_max < 2^accept_log2`.
    pub accept_log2: i32,
    /// Held-out residual bound for acceptance, `2^holdout_log2`.
    pub holdout_log2: i32,
    /// Reject when `sigma_min / sigma_max > 2^reject_log2`.
    pub reject_log2: i32,
    pub holdout_fraction: f64,
    /// Ceiling for automatic escalation.
    pub max_bits: u32,
    /// Fixed argument scaling exponent; estimated from the data when absent.
    pub lambda_log2: Option<i32>,
}

impl GuessConfig {
    /// Default thresholds at `bits`; escalation allowed up to `4 * bits`.
    pub fn new(r_max: usize, d_max: usize, n_coeffs: usize, bits: u32) -> Result<Self> {
        let cfg = GuessConfig {
            r_max,
            d_max,
            n_coeffs,
            working_bits: bits,
            accept_log2: -(bits as i32) / 2,
            holdout_log2: -(bits as i32) / 4,
            reject_log2: -(bits as i32) / 8,
            holdout_fraction: 0.1,
            max_bits: 4 * bits,
            lambda_log2: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_holdout_fraction(mut self, f: f64) -> Result<Self> {
        self.holdout_fraction = f;
        self.validate()?;
        Ok(self)
    }

    pub fn with_max_bits(mut self, bits: u32) -> Result<Self> {
        self.max_bits = bits;
        self.validate()?;
        Ok(self)
    }

    pub fn with_n_coeffs(mut self, n: usize) -> Result<Self> {
        self.n_coeffs = n;
        self.validate()?;
        Ok(self)
    }

    /// Same bounds with thresholds recomputed for `bits`.
    pub fn at_bits(&self, bits: u32) -> Result<Self> {
        let mut c = GuessConfig::new(self.r_max, self.d_max, self.n_coeffs, bits)?;
        c.holdout_fraction = self.holdout_fraction;
        c.max_bits = self.max_bits.max(bits);
        c.lambda_log2 = self.lambda_log2;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.r_max < 1 {
            return bad("r_max must be at least 1".into());
        }
        if self.working_bits < 64 {
            return bad(format!("working_bits must be at least 64, got {}", self.working_bits));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction <= 0.3) {
            return bad(format!("holdout_fraction must lie in (0, 0.3], got {}", self.holdout_fraction));
        }
        let unknowns = (self.r_max + 1) * (self.d_max + 1);
        if self.n_coeffs < unknowns + GUARD_ROWS {
            return bad(format!(
                "n_coeffs must be at least (r_max+1)(d_max+1) + {GUARD_ROWS} = {}, got {}",
                unknowns + GUARD_ROWS,
                self.n_coeffs
            ));
        }
        // The largest cell needs more fitting rows than unknowns.
        let (fit, _) = self.row_split(self.r_max);
        if fit <= unknowns {
            return bad(format!(
                "n_coeffs = {} leaves {fit} fitting rows for {unknowns} unknowns at r = {}",
                self.n_coeffs, self.r_max
            ));
        }
        Ok(())
    }

    /// Fitting and held-out row counts for order `r`: the left side has
    /// `n_coeffs - r` coefficients determined by the data.
    pub fn row_split(&self, r: usize) -> (usize, usize) {
        let rows = self.n_coeffs.saturating_sub(r);
        let hold = ((rows as f64) * self.holdout_fraction).ceil() as usize;
        let hold = hold.clamp(1, rows);
        (rows - hold, hold)
    }

    fn zone(&self, ratio: &XReal, holdout: Option<&XReal>) -> Zone {
        if *ratio > pow2(self.reject_log2) {
            Zone::Reject
        } else if *ratio < pow2(self.accept_log2) && holdout.is_some_and(|h| *h < pow2(self.holdout_log2)) {
            Zone::Accept
        } else {
            Zone::Indeterminate
        }
    }
}

fn pow2(e: i32) -> XReal {
    crate::precision::pow2(e)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GuessStatus {
    Found,
    NoneUpToBounds,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Zone {
    Accept,
    Reject,
    Indeterminate,
}

/// A relation `sum_i sum_j P[i][j] x^j y^(i) = 0`, normalized so that its
/// largest-magnitude entry is exactly 1.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OdeCandidate {
    pub order: usize,
    pub degree: usize,
    #[serde(serialize_with = "ser_matrix")]
    pub poly_coeffs: Vec<Vec<XReal>>,
    /// Relative residual on the held-out rows.
    #[serde(serialize_with = "ser_short")]
    pub residual: XReal,
}

/// Exact relation from the rational path.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactCandidate {
    pub order: usize,
    pub degree: usize,
    #[serde(serialize_with = "ser_rational_matrix")]
    pub poly_coeffs: Vec<Vec<Rational>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellReport {
    pub r: usize,
    pub d: usize,
    pub unknowns: usize,
    pub fit_rows: usize,
    pub holdout_rows: usize,
    #[serde(serialize_with = "ser_short")]
    pub min_singular_ratio: XReal,
    /// `log2` of the ratio; absent when the ratio is exactly zero.
    pub ratio_log2: Option<f64>,
    #[serde(serialize_with = "ser_short_opt")]
    pub holdout_residual: Option<XReal>,
    pub zone: Zone,
}

/// One pass of the search at a fixed precision.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PassRecord {
    pub working_bits: u32,
    pub cells_evaluated: usize,
    pub indeterminate_cells: usize,
}

/// Outcome of the exact rational null-space solve.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "state", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExactPath {
    NotApplicable {
        reason: String,
    },
    Completed {
        status: GuessStatus,
        /// Ranks of the cells solved, in the order solved.
        ranks: Vec<ExactRank>,
        candidate: Option<ExactCandidate>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactRank {
    pub r: usize,
    pub d: usize,
    pub rank: usize,
    pub unknowns: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GuessReport {
    pub status: GuessStatus,
    /// Plain statement of what the status covers.
    pub scope: String,
    pub config: GuessConfig,
    /// Precision of the final pass; thresholds in `final_thresholds`.
    pub working_bits_used: u32,
    pub final_thresholds: Thresholds,
    /// Argument scaling `x -> 2^lambda_log2 x` applied before solving.
    pub lambda_log2: i32,
    pub cells: Vec<CellReport>,
    pub passes: Vec<PassRecord>,
    pub candidate: Option<OdeCandidate>,
    pub exact: ExactPath,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Thresholds {
    pub accept_log2: i32,
    pub holdout_log2: i32,
    pub reject_log2: i32,
}

impl GuessReport {
    pub fn min_ratio_log2(&self) -> Option<f64> {
        self.cells
            .iter()
            .map(|c| c.ratio_log2.unwrap_or(f64::NEG_INFINITY))
            .min_by(|a, b| a.total_cmp(b))
    }

    pub fn indeterminate_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.zone == Zone::Indeterminate).count()
    }
}

/// Searches for a relation annihilating the first `cfg.n_coeffs`
/// coefficients of `s`. Escalation is possible up to the precision `s`
/// carries.
pub fn guess_ode(s: &PowerSeries, cfg: &GuessConfig) -> Result<GuessReport> {
    if s.prec() < cfg.working_bits {
        return Err(Error::domain(format!(
            "series precision {} is below working_bits {}",
            s.prec(),
            cfg.working_bits
        )));
    }
    let available = s.prec();
    guess_ode_with(
        |bits| {
            if bits > available {
                Err(Error::PrecisionExhausted { required_bits: bits })
            } else {
                Ok(s.coeffs().to_vec())
            }
        },
        None,
        cfg,
    )
}

/// Guess for a series with exact rational coefficients times `scale`.
/// Runs the float path (escalating freely up to `cfg.max_bits`) and the
/// exact path.
pub fn guess_ode_rational(coeffs: &[Rational], scale: Scale, cfg: &GuessConfig) -> Result<GuessReport> {
    guess_ode_with(|bits| Ok(rational_to_float(coeffs, scale, bits)), Some(coeffs), cfg)
}

/// General entry point: `source(bits)` supplies the coefficients at (at
/// least) `bits` of precision, so escalation can regenerate them.
pub fn guess_ode_with<F>(source: F, exact: Option<&[Rational]>, cfg: &GuessConfig) -> Result<GuessReport>
where
    F: Fn(u32) -> Result<Vec<XReal>>,
{
    let mut passes = Vec::new();
    let mut bits = cfg.working_bits;
    loop {
        let pass_cfg = cfg.at_bits(bits)?;
        let coeffs = source(bits)?;
        let outcome = run_pass(&coeffs, &pass_cfg)?;
        passes.push(PassRecord {
            working_bits: bits,
            cells_evaluated: outcome.cells.len(),
            indeterminate_cells: outcome.indeterminate,
        });
        if outcome.indeterminate == 0 {
            let exact = match exact {
                Some(q) => run_exact(q, cfg),
                None => ExactPath::NotApplicable {
                    reason: "coefficients are not exact rationals; only the floating-point path applies".into(),
                },
            };
            let status = if outcome.candidate.is_some() {
                GuessStatus::Found
            } else {
                GuessStatus::NoneUpToBounds
            };
            let scope = match status {
                GuessStatus::Found => format!(
                    "relation found fitting {} coefficients at {bits} bits; verified on held-out coefficients only",
                    cfg.n_coeffs
                ),
                GuessStatus::NoneUpToBounds => format!(
                    "no relation with order <= {} and degree <= {} fits the first {} coefficients at {bits} bits; \
                     evidence, not proof",
                    cfg.r_max, cfg.d_max, cfg.n_coeffs
                ),
            };
            return Ok(GuessReport {
                status,
                scope,
                config: cfg.clone(),
                working_bits_used: bits,
                final_thresholds: Thresholds {
                    accept_log2: pass_cfg.accept_log2,
                    holdout_log2: pass_cfg.holdout_log2,
                    reject_log2: pass_cfg.reject_log2,
                },
                lambda_log2: outcome.lambda_log2,
                cells: outcome.cells,
                passes,
                candidate: outcome.candidate,
                exact,
            });
        }
        let next = bits * 2;
        if next > cfg.max_bits {
            return Err(Error::PrecisionExhausted { required_bits: next });
        }
        bits = next;
    }
}

struct PassOutcome {
    cells: Vec<CellReport>,
    candidate: Option<OdeCandidate>,
    indeterminate: usize,
    lambda_log2: i32,
}

fn run_pass(coeffs: &[XReal], cfg: &GuessConfig) -> Result<PassOutcome> {
    let (scaled, lambda_log2) = prepare(coeffs, cfg)?;
    let mut cells = Vec::new();
    let mut candidate = None;
    let mut indeterminate = 0;
    for r in 1..=cfg.r_max {
        let row: Vec<(CellReport, Option<Vec<XReal>>)> =
            (0..=cfg.d_max).into_par_iter().map(|d| solve_cell(&scaled, r, d, cfg)).collect();
        for (cell, vector) in row {
            let zone = cell.zone;
            let residual = cell.holdout_residual.clone();
            let (r, d) = (cell.r, cell.d);
            cells.push(cell);
            match zone {
                Zone::Reject => {}
                Zone::Indeterminate => indeterminate += 1,
                Zone::Accept if indeterminate == 0 && candidate.is_none() => {
                    let v = vector.expect("accepted cells carry a vector");
                    candidate = Some(OdeCandidate {
                        order: r,
                        degree: d,
                        poly_coeffs: unscale_candidate(&v, r, d, lambda_log2),
                        residual: residual.expect("accepted cells carry a residual"),
                    });
                }
                Zone::Accept => {}
            }
        }
        if candidate.is_some() || indeterminate > 0 {
            break;
        }
    }
    Ok(PassOutcome {
        cells,
        candidate,
        indeterminate,
        lambda_log2,
    })
}

/// Evaluates every cell of the lattice at `cfg.working_bits` without
/// stopping at the first decision. Diagnostic companion to
/// [`guess_ode_with`].
pub fn survey(coeffs: &[XReal], cfg: &GuessConfig) -> Result<Vec<CellReport>> {
    let scaled = prepare(coeffs, cfg)?.0;
    let cells: Vec<(usize, usize)> = (1..=cfg.r_max).flat_map(|r| (0..=cfg.d_max).map(move |d| (r, d))).collect();
    Ok(cells.into_par_iter().map(|(r, d)| solve_cell(&scaled, r, d, cfg).0).collect())
}

/// Rounds to the working precision, validates, and applies the argument
/// scaling. Returns the scaled coefficients and the scaling exponent.
fn prepare(coeffs: &[XReal], cfg: &GuessConfig) -> Result<(Vec<XReal>, i32)> {
    let prec = cfg.working_bits;
    if coeffs.len() < cfg.n_coeffs {
        return Err(Error::domain(format!(
            "series has {} coefficients, the search needs {}",
            coeffs.len(),
            cfg.n_coeffs
        )));
    }
    let raw: Vec<XReal> = coeffs[..cfg.n_coeffs].iter().map(|c| Float::with_val(prec, c)).collect();
    if raw.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("guesser input coefficient"));
    }
    if raw.iter().all(|c| c.is_zero()) {
        return Err(Error::domain("series coefficients are all zero"));
    }
    let lambda_log2 = cfg.lambda_log2.unwrap_or_else(|| growth_scaling(&raw));
    let scaled = raw
        .iter()
        .enumerate()
        .map(|(n, a)| shift(a, lambda_log2 as i64 * n as i64))
        .collect();
    Ok((scaled, lambda_log2))
}

/// Power-of-two argument scaling that flattens the geometric trend of the
/// coefficient magnitudes.
fn growth_scaling(a: &[XReal]) -> i32 {
    let pts: Vec<(f64, f64)> = a
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_zero())
        .map(|(n, c)| (n as f64, f64::from(c.get_exp().unwrap_or(0))))
        .collect();
    if pts.len() < 2 {
        return 0;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (-(sxy / sxx)).round().clamp(-64.0, 64.0) as i32
}

fn shift(x: &XReal, e: i64) -> XReal {
    let mut y = x.clone();
    if e >= 0 {
        y <<= e as u32;
    } else {
        y >>= (-e) as u32;
    }
    y
}

fn rising(n: usize, i: usize) -> Integer {
    (n + 1..=n + i).fold(Integer::from(1), |acc, v| acc * v as u64)
}

/// Column index of the unknown multiplying `x^j y^(i)`.
fn col(i: usize, j: usize, d: usize) -> usize {
    i * (d + 1) + j
}

/// Coefficient of `x^m` in `x^j y^(i)`: `(m-j+1)...(m-j+i) a_{m-j+i}`.
fn entry_index(m: usize, i: usize, j: usize) -> Option<(usize, usize)> {
    (m >= j).then(|| (m - j + i, m - j))
}

fn solve_cell(a: &[XReal], r: usize, d: usize, cfg: &GuessConfig) -> (CellReport, Option<Vec<XReal>>) {
    let prec = cfg.working_bits;
    let cols = (r + 1) * (d + 1);
    let (fit, hold) = cfg.row_split(r);
    let rows = fit + hold;

    // Row-major system, each row divided by its largest magnitude.
    let mut sys: Vec<Vec<XReal>> = (0..rows)
        .map(|m| {
            let mut row = vec![Float::new(prec); cols];
            for i in 0..=r {
                for j in 0..=d {
                    if let Some((idx, n)) = entry_index(m, i, j) {
                        row[col(i, j, d)] = Float::with_val(prec, &a[idx] * rising(n, i));
                    }
                }
            }
            let max = row
                .iter()
                .map(|v| Float::with_val(prec, v.abs_ref()))
                .fold(Float::new(prec), |acc, v| acc.max(&v));
            if !max.is_zero() {
                for v in &mut row {
                    *v /= &max;
                }
            }
            row
        })
        .collect();

    // Power-of-two column scaling from the fitting block.
    let col_exp: Vec<i64> = (0..cols)
        .map(|c| {
            let mut s = Float::new(prec);
            for row in &sys[..fit] {
                s += Float::with_val(prec, row[c].square_ref());
            }
            if s.is_zero() {
                0
            } else {
                -i64::from(s.sqrt().get_exp().unwrap_or(0))
            }
        })
        .collect();
    for row in &mut sys {
        for (v, e) in row.iter_mut().zip(&col_exp) {
            *v = shift(v, *e);
        }
    }

    let mut m = Matrix::zeros(fit, cols, prec);
    for (ri, row) in sys[..fit].iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            m.set(ri, c, v.clone());
        }
    }
    let svd = smallest_singular(&m);
    let ratio = if svd.sigma_max.is_zero() {
        Float::new(prec)
    } else {
        Float::with_val(prec, &svd.sigma_min / &svd.sigma_max)
    };

    // Held-out residual: max over rows of |sum_k A_k v_k| / sum_k |A_k v_k|.
    let mut worst = Float::new(prec);
    for row in &sys[fit..] {
        let mut num = Float::new(prec);
        let mut den = Float::new(prec);
        for (x, v) in row.iter().zip(&svd.vector) {
            let t = Float::with_val(prec, x * v);
            den += Float::with_val(prec, t.abs_ref());
            num += t;
        }
        if !den.is_zero() {
            let q = num.abs() / den;
            if q > worst {
                worst = q;
            }
        }
    }

    // Unknowns in original column units.
    let vector: Vec<XReal> = svd.vector.iter().zip(&col_exp).map(|(v, e)| shift(v, *e)).collect();
    let leading_present = (0..=d).any(|j| !vector[col(r, j, d)].is_zero());
    let mut zone = cfg.zone(&ratio, Some(&worst));
    if zone == Zone::Accept && !leading_present {
        zone = Zone::Indeterminate;
    }
    let report = CellReport {
        r,
        d,
        unknowns: cols,
        fit_rows: fit,
        holdout_rows: hold,
        ratio_log2: log2(&ratio),
        min_singular_ratio: ratio,
        holdout_residual: Some(worst),
        zone,
    };
    (report, (zone == Zone::Accept).then_some(vector))
}

fn log2(x: &XReal) -> Option<f64> {
    if x.is_zero() {
        return None;
    }
    let l = Float::with_val(64, x.ln_ref()) / std::f64::consts::LN_2;
    Some(l.to_f64())
}

/// Undoes the argument scaling `t = x / lambda`: `P[i][j] = P~[i][j] lambda^(i-j)`,
/// then normalizes.
fn unscale_candidate(v: &[XReal], r: usize, d: usize, lambda_log2: i32) -> Vec<Vec<XReal>> {
    let p: Vec<Vec<XReal>> = (0..=r)
        .map(|i| {
            (0..=d)
                .map(|j| shift(&v[col(i, j, d)], i64::from(lambda_log2) * (i as i64 - j as i64)))
                .collect()
        })
        .collect();
    normalize_float(p)
}

/// Position of the entry used for normalization: the largest magnitude,
/// ties broken toward higher derivative order then lower power of `x`.
fn pivot_position<T>(p: &[Vec<T>], bigger: impl Fn(&T, &T) -> bool) -> (usize, usize) {
    let mut best = (p.len() - 1, 0);
    for i in (0..p.len()).rev() {
        for j in 0..p[i].len() {
            if bigger(&p[i][j], &p[best.0][best.1]) {
                best = (i, j);
            }
        }
    }
    best
}

pub fn normalize_float(p: Vec<Vec<XReal>>) -> Vec<Vec<XReal>> {
    let (bi, bj) = pivot_position(&p, |a, b| a.clone().abs() > b.clone().abs());
    let pivot = p[bi][bj].clone();
    p.into_iter()
        .enumerate()
        .map(|(i, row)| {
            row.into_iter()
                .enumerate()
                .map(|(j, v)| if (i, j) == (bi, bj) { Float::with_val(v.prec(), 1) } else { v / &pivot })
                .collect()
        })
        .collect()
}

pub fn normalize_rational(p: Vec<Vec<Rational>>) -> Vec<Vec<Rational>> {
    let (bi, bj) = pivot_position(&p, |a, b| a.clone().abs() > b.clone().abs());
    let pivot = p[bi][bj].clone();
    p.into_iter()
        .map(|row| row.into_iter().map(|v| v / &pivot).collect())
        .collect()
}

fn exact_rows(a: &[Rational], r: usize, d: usize, n: usize) -> Vec<Vec<Rational>> {
    let cols = (r + 1) * (d + 1);
    (0..n - r)
        .map(|m| {
            let mut row = vec![Rational::new(); cols];
            for i in 0..=r {
                for j in 0..=d {
                    if let Some((idx, k)) = entry_index(m, i, j) {
                        row[col(i, j, d)] = Rational::from(&a[idx] * rising(k, i));
                    }
                }
            }
            row
        })
        .collect()
}

/// Exact null-space search over the lattice. A relation in a smaller cell
/// pads to one in every larger cell, so full rank at `(r_max, d_max)`
/// settles the whole lattice.
fn run_exact(a: &[Rational], cfg: &GuessConfig) -> ExactPath {
    let n = cfg.n_coeffs.min(a.len());
    let mut ranks = Vec::new();
    let solve = |r: usize, d: usize| {
        let rows = exact_rows(a, r, d, n);
        let ns = exact_null_space(&rows, (r + 1) * (d + 1));
        (
            ExactRank {
                r,
                d,
                rank: ns.rank,
                unknowns: (r + 1) * (d + 1),
            },
            ns.vector,
        )
    };
    let (top, _) = solve(cfg.r_max, cfg.d_max);
    let full = top.rank == top.unknowns;
    ranks.push(top);
    if full {
        return ExactPath::Completed {
            status: GuessStatus::NoneUpToBounds,
            ranks,
            candidate: None,
        };
    }
    for r in 1..=cfg.r_max {
        for d in 0..=cfg.d_max {
            let (rank, vector) = solve(r, d);
            ranks.push(rank);
            if let Some(v) = vector {
                let p: Vec<Vec<Rational>> = (0..=r).map(|i| (0..=d).map(|j| v[col(i, j, d)].clone()).collect()).collect();
                return ExactPath::Completed {
                    status: GuessStatus::Found,
                    ranks,
                    candidate: Some(ExactCandidate {
                        order: r,
                        degree: d,
                        poly_coeffs: normalize_rational(p),
                    }),
                };
            }
        }
    }
    unreachable!("rank deficiency at the top cell implies a relation in some cell")
}

/// Largest coefficient of `sum P[i][j] x^j s^(i)` over every power of `x`
/// the series determines, relative to the largest series coefficient.
pub fn verify_relation(s: &PowerSeries, c: &OdeCandidate) -> XReal {
    let prec = s.prec().max(c.poly_coeffs[0][0].prec());
    let a = s.coeffs();
    let r = c.order;
    let scale = a
        .iter()
        .map(|v| Float::with_val(prec, v.abs_ref()))
        .fold(Float::new(prec), |acc, v| acc.max(&v));
    let mut worst = Float::new(prec);
    for m in 0..a.len().saturating_sub(r) {
        let mut acc = Float::new(prec);
        for (i, row) in c.poly_coeffs.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                if let Some((idx, n)) = entry_index(m, i, j) {
                    if idx < a.len() {
                        let t = Float::with_val(prec, &a[idx] * rising(n, i));
                        acc += t * p;
                    }
                }
            }
        }
        let acc = acc.abs();
        if acc > worst {
            worst = acc;
        }
    }
    if scale.is_zero() {
        worst
    } else {
        worst / scale
    }
}

pub fn rational_to_float(q: &[Rational], scale: Scale, bits: u32) -> Vec<XReal> {
    let factor = match scale {
        Scale::One => Float::with_val(bits + 16, 1),
        Scale::Euler => euler(bits + 16),
    };
    q.iter()
        .map(|v| Float::with_val(bits, Float::with_val(bits + 16, v) * &factor))
        .collect()
}

/// Outcome for one control of [`control_suite`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ControlOutcome {
    pub control: Control,
    pub name: String,
    pub expected: GuessStatus,
    pub pass: bool,
    pub detail: String,
    pub report: Option<GuessReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub pass: bool,
    pub controls: Vec<ControlOutcome>,
}

impl SuiteReport {
    pub fn failures(&self) -> Vec<&ControlOutcome> {
        self.controls.iter().filter(|c| !c.pass).collect()
    }
}

/// Runs one control. `n_coeffs` is raised to the control's default when
/// the configuration asks for fewer.
pub fn run_control(control: Control, cfg: &GuessConfig) -> ControlOutcome {
    let expected = if control.is_d_finite() {
        GuessStatus::Found
    } else {
        GuessStatus::NoneUpToBounds
    };
    let n = cfg.n_coeffs.max(control.default_coeffs());
    let outcome = cfg.clone().with_n_coeffs(n).and_then(|c| {
        let (q, scale) = control.coefficients(n);
        guess_ode_rational(&q, scale, &c)
    });
    let (pass, detail, report) = match outcome {
        Ok(rep) => {
            let (pass, detail) = judge_control(control, expected, &rep);
            (pass, detail, Some(rep))
        }
        Err(e) => (false, e.to_string(), None),
    };
    ControlOutcome {
        control,
        name: control.name().to_string(),
        expected,
        pass,
        detail,
        report,
    }
}

fn judge_control(control: Control, expected: GuessStatus, rep: &GuessReport) -> (bool, String) {
    if rep.status != expected {
        return (false, format!("expected {expected:?}, got {:?}", rep.status));
    }
    match (&rep.exact, control.known_relation()) {
        (ExactPath::Completed { status, candidate, .. }, known) => {
            if *status != expected {
                return (false, format!("exact path disagrees: {status:?}"));
            }
            if let (Some(known), Some(c)) = (known, candidate) {
                let want = normalize_rational(
                    known
                        .iter()
                        .map(|row| row.iter().map(|v| Rational::from(*v)).collect())
                        .collect(),
                );
                if c.poly_coeffs != want {
                    return (false, "exact relation differs from the known minimal relation".into());
                }
            }
            (true, "ok".into())
        }
        (ExactPath::NotApplicable { .. }, _) => (true, "ok (floating-point path only)".into()),
    }
}

/// Runs every control and checks each classification.
pub fn control_suite(cfg: &GuessConfig) -> SuiteReport {
    let controls: Vec<ControlOutcome> = Control::ALL.iter().map(|c| run_control(*c, cfg)).collect();
    SuiteReport {
        pass: controls.iter().all(|c| c.pass),
        controls,
    }
}

fn ser_short<S: Serializer>(x: &XReal, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&to_decimal_digits(x, 12))
}

fn ser_short_opt<S: Serializer>(x: &Option<XReal>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_str(&to_decimal_digits(v, 12)),
        None => s.serialize_none(),
    }
}

fn ser_matrix<S: Serializer>(p: &[Vec<XReal>], s: S) -> std::result::Result<S::Ok, S::Error> {
    let strings: Vec<Vec<String>> = p.iter().map(|row| row.iter().map(to_decimal).collect()).collect();
    strings.serialize(s)
}

fn ser_rational_matrix<S: Serializer>(p: &[Vec<Rational>], s: S) -> std::result::Result<S::Ok, S::Error> {
    let strings: Vec<Vec<String>> = p.iter().map(|row| row.iter().map(|v| v.to_string()).collect()).collect();
    strings.serialize(s)
}
