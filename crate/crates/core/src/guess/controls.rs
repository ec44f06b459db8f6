//! Exact Taylor coefficients at 0 of the control functions.

use rug::{Integer, Rational};
use serde::Serialize;

/// A control series for the guesser with its expected classification.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Control {
    Exp,
    Log1p,
    Sqrt1p,
    ErfType,
    ExpTimesSqrt1p,
    Tan,
    ExpExp,
}

impl Control {
    pub const ALL: [Control; 7] = [
        Control::Exp,
        Control::Log1p,
        Control::Sqrt1p,
        Control::ErfType,
        Control::ExpTimesSqrt1p,
        Control::Tan,
        Control::ExpExp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Control::Exp => "exp(x)",
            Control::Log1p => "log(1+x)",
            Control::Sqrt1p => "sqrt(1+x)",
            Control::ErfType => "integral of exp(-t^2) from 0 to x",
            Control::ExpTimesSqrt1p => "exp(x)*sqrt(1+x)",
            Control::Tan => "tan(x)",
            Control::ExpExp => "exp(exp(x)) - e",
        }
    }

    /// Whether the function satisfies a linear ODE with polynomial
    /// coefficients.
    pub fn is_d_finite(self) -> bool {
        !matches!(self, Control::Tan | Control::ExpExp)
    }

    /// Number of coefficients the control is run with.
    pub fn default_coeffs(self) -> usize {
        if self.is_d_finite() {
            60
        } else {
            120
        }
    }

    /// Known minimal relation as `P[i][j]` (coefficient of `x^j y^(i)`).
    pub fn known_relation(self) -> Option<Vec<Vec<i64>>> {
        Some(match self {
            Control::Exp => vec![vec![-1], vec![1]],
            Control::Log1p => vec![vec![0, 0], vec![1, 0], vec![1, 1]],
            Control::Sqrt1p => vec![vec![-1, 0], vec![2, 2]],
            Control::ErfType => vec![vec![0, 0], vec![0, 2], vec![1, 0]],
            Control::ExpTimesSqrt1p => vec![vec![-3, -2], vec![2, 2]],
            Control::Tan | Control::ExpExp => return None,
        })
    }

    /// Coefficients `a_0..a_{n-1}` of a rational series proportional to the
    /// function, and the proportionality factor when it is not one.
    ///
    /// `exp(exp(x)) - e` equals `e * (exp(exp(x) - 1) - 1)`; the second
    /// factor has rational coefficients (Bell numbers over factorials).
    pub fn coefficients(self, n: usize) -> (Vec<Rational>, Scale) {
        match self {
            Control::Exp => (exp_coeffs(n), Scale::One),
            Control::Log1p => (log1p_coeffs(n), Scale::One),
            Control::Sqrt1p => (sqrt1p_coeffs(n), Scale::One),
            Control::ErfType => (erf_type_coeffs(n), Scale::One),
            Control::ExpTimesSqrt1p => (cauchy(&exp_coeffs(n), &sqrt1p_coeffs(n)), Scale::One),
            Control::Tan => (tan_coeffs(n), Scale::One),
            Control::ExpExp => (bell_coeffs(n), Scale::Euler),
        }
    }
}

/// Factor relating a rational control series to the named function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    One,
    Euler,
}

pub fn exp_coeffs(n: usize) -> Vec<Rational> {
    let mut out = Vec::with_capacity(n);
    let mut fact = Integer::from(1);
    for k in 0..n {
        if k > 0 {
            fact *= k as u64;
        }
        out.push(Rational::from((Integer::from(1), fact.clone())));
    }
    out
}

pub fn log1p_coeffs(n: usize) -> Vec<Rational> {
    (0..n)
        .map(|k| match k {
            0 => Rational::new(),
            _ => {
                let sign = if k % 2 == 1 { 1 } else { -1 };
                Rational::from((sign, k as i64))
            }
        })
        .collect()
}

/// Binomial coefficients `C(1/2, k)`.
pub fn sqrt1p_coeffs(n: usize) -> Vec<Rational> {
    let half = Rational::from((1, 2));
    let mut out = Vec::with_capacity(n);
    let mut c = Rational::from(1);
    for k in 0..n {
        if k > 0 {
            c *= Rational::from(&half - (k as i64 - 1));
            c /= k as u64;
        }
        out.push(c.clone());
    }
    out
}

/// `sum_k (-1)^k x^(2k+1) / (k! (2k+1))`.
pub fn erf_type_coeffs(n: usize) -> Vec<Rational> {
    let mut out = vec![Rational::new(); n];
    let mut fact = Integer::from(1);
    for k in 0.. {
        let idx = 2 * k + 1;
        if idx >= n {
            break;
        }
        if k > 0 {
            fact *= k as u64;
        }
        let den = Integer::from(&fact * (idx as u64));
        let num = if k % 2 == 0 { 1 } else { -1 };
        out[idx] = Rational::from((Integer::from(num), den));
    }
    out
}

/// From `y' = 1 + y^2`, `y(0) = 0`.
pub fn tan_coeffs(n: usize) -> Vec<Rational> {
    let mut a = vec![Rational::new(); n];
    for m in 0..n.saturating_sub(1) {
        let mut s = Rational::from(u32::from(m == 0));
        for k in 0..=m {
            if a[k] != 0 && a[m - k] != 0 {
                s += Rational::from(&a[k] * &a[m - k]);
            }
        }
        a[m + 1] = s / (m as u64 + 1);
    }
    a
}

/// `exp(exp(x) - 1) - 1`, from `y' = exp(x) y`.
pub fn bell_coeffs(n: usize) -> Vec<Rational> {
    let e = exp_coeffs(n);
    let mut y = vec![Rational::new(); n];
    if n > 0 {
        y[0] = Rational::from(1);
    }
    for m in 0..n.saturating_sub(1) {
        let s: Rational = (0..=m).map(|k| Rational::from(&y[k] * &e[m - k])).sum();
        y[m + 1] = s / (m as u64 + 1);
    }
    if n > 0 {
        y[0] = Rational::new();
    }
    y
}

pub fn cauchy(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    let n = a.len().min(b.len());
    (0..n)
        .map(|m| (0..=m).map(|k| Rational::from(&a[k] * &b[m - k])).sum())
        .collect()
}
