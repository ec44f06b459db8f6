//! Dense linear algebra for the guesser: a one-sided Jacobi SVD in
//! extended precision and a fraction-free exact elimination over the
//! integers.

use rug::ops::NegAssign;
use rug::{Float, Integer, Rational};

use crate::precision::XReal;

/// Column-major real matrix.
#[derive(Clone, Debug)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    /// `data[c][r]`.
    pub data: Vec<Vec<XReal>>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize, prec: u32) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![vec![Float::new(prec); rows]; cols],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> &XReal {
        &self.data[c][r]
    }

    pub fn set(&mut self, r: usize, c: usize, v: XReal) {
        self.data[c][r] = v;
    }
}

/// Smallest and largest singular values and a right singular vector for
/// the smallest.
#[derive(Clone, Debug)]
pub struct SmallestSingular {
    pub sigma_min: XReal,
    pub sigma_max: XReal,
    /// Unit vector `v` with `|A v| = sigma_min`.
    pub vector: Vec<XReal>,
    pub sweeps: u32,
}

const MAX_SWEEPS: u32 = 60;

/// One-sided (Hestenes) Jacobi SVD. Requires `rows >= cols`.
///
/// Columns are rotated pairwise until every pair is orthogonal to within
/// `2^(-prec + 8)` relative to the product of their norms; the singular
/// values are then the final column norms.
pub fn smallest_singular(a: &Matrix) -> SmallestSingular {
    assert!(a.rows >= a.cols && a.cols > 0, "need a tall non-empty matrix");
    let n = a.cols;
    let prec = a.data[0][0].prec();
    let mut u = a.data.clone();
    let mut v: Vec<Vec<XReal>> = (0..n)
        .map(|c| (0..n).map(|r| Float::with_val(prec, u32::from(r == c))).collect())
        .collect();
    let eps = Float::with_val(prec, 1) >> (prec - 8);

    let mut norms: Vec<XReal> = u.iter().map(|col| sum_sq(col, prec)).collect();
    let mut alpha = Float::new(prec);
    let mut beta = Float::new(prec);
    let mut gamma = Float::new(prec);
    let mut t = Float::new(prec);
    let mut zeta = Float::new(prec);
    let mut c = Float::new(prec);
    let mut s = Float::new(prec);
    let mut x = Float::new(prec);
    let mut y = Float::new(prec);
    let mut sweeps = 0;
    for sweep in 1..=MAX_SWEEPS {
        sweeps = sweep;
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                alpha.assign_ref(&norms[p]);
                beta.assign_ref(&norms[q]);
                dot_into(&mut gamma, &u[p], &u[q]);
                if gamma.is_zero() {
                    continue;
                }
                // |gamma| <= eps * sqrt(alpha beta) means the pair is orthogonal.
                t.assign_mul(&alpha, &beta);
                t.sqrt_mut();
                t *= &eps;
                if gamma.clone().abs() <= t {
                    continue;
                }
                rotated = true;
                // zeta = (beta - alpha) / (2 gamma); t = sign(zeta) / (|zeta| + sqrt(1 + zeta^2)).
                zeta.assign_sub(&beta, &alpha);
                zeta /= &gamma;
                zeta >>= 1;
                t.assign_mul(&zeta, &zeta);
                t += 1u32;
                t.sqrt_mut();
                x.assign_abs(&zeta);
                t += &x;
                t.recip_mut();
                if zeta.is_sign_negative() {
                    t.neg_assign();
                }
                c.assign_mul(&t, &t);
                c += 1u32;
                c.sqrt_mut();
                c.recip_mut();
                s.assign_mul(&c, &t);
                rotate(&mut u, p, q, &c, &s, &mut x, &mut y);
                rotate(&mut v, p, q, &c, &s, &mut x, &mut y);
                // Exact updates of the squared norms for this rotation.
                x.assign_mul(&t, &gamma);
                norms[p] -= &x;
                norms[q] += &x;
            }
        }
        if !rotated {
            break;
        }
        // Refresh norms against drift from the incremental updates.
        for (nrm, col) in norms.iter_mut().zip(&u) {
            *nrm = sum_sq(col, prec);
        }
    }
    let sigmas: Vec<XReal> = u.iter().map(|col| sum_sq(col, prec).sqrt()).collect();
    let (imin, _) = sigmas
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).expect("finite singular values"))
        .expect("non-empty");
    let sigma_max = sigmas
        .iter()
        .max_by(|a, b| a.partial_cmp(b).expect("finite singular values"))
        .expect("non-empty")
        .clone();
    SmallestSingular {
        sigma_min: sigmas[imin].clone(),
        sigma_max,
        vector: v.swap_remove(imin),
        sweeps,
    }
}

trait AssignOps {
    fn assign_ref(&mut self, v: &Float);
    fn assign_mul(&mut self, a: &Float, b: &Float);
    fn assign_sub(&mut self, a: &Float, b: &Float);
    fn assign_abs(&mut self, a: &Float);
}

impl AssignOps for Float {
    fn assign_ref(&mut self, v: &Float) {
        rug::Assign::assign(self, v);
    }
    fn assign_mul(&mut self, a: &Float, b: &Float) {
        rug::Assign::assign(self, a * b);
    }
    fn assign_sub(&mut self, a: &Float, b: &Float) {
        rug::Assign::assign(self, a - b);
    }
    fn assign_abs(&mut self, a: &Float) {
        rug::Assign::assign(self, a.abs_ref());
    }
}

fn sum_sq(col: &[XReal], prec: u32) -> XReal {
    let mut acc = Float::new(prec);
    let mut tmp = Float::new(prec);
    for v in col {
        rug::Assign::assign(&mut tmp, v.square_ref());
        acc += &tmp;
    }
    acc
}

fn dot_into(out: &mut Float, a: &[XReal], b: &[XReal]) {
    let mut tmp = Float::new(out.prec());
    rug::Assign::assign(&mut *out, 0u32);
    for (x, y) in a.iter().zip(b) {
        rug::Assign::assign(&mut tmp, x * y);
        *out += &tmp;
    }
}

// (col_p, col_q) <- (c col_p - s col_q, s col_p + c col_q)
fn rotate(m: &mut [Vec<XReal>], p: usize, q: usize, c: &Float, s: &Float, x: &mut Float, y: &mut Float) {
    let (left, right) = m.split_at_mut(q);
    let (cp, cq) = (&mut left[p], &mut right[0]);
    for (a, b) in cp.iter_mut().zip(cq.iter_mut()) {
        rug::Assign::assign(&mut *x, &*a * s);
        rug::Assign::assign(&mut *y, &*b * s);
        *a *= c;
        *a -= &*y;
        *b *= c;
        *b += &*x;
    }
}

/// Null space of an exact rational matrix given row-major.
#[derive(Clone, Debug)]
pub struct ExactNullSpace {
    pub rank: usize,
    /// One null vector when the rank is deficient: the free column with
    /// the smallest index set to one, the other free columns to zero.
    pub vector: Option<Vec<Rational>>,
}

/// Fraction-free (Bareiss) elimination. Each row is first cleared of
/// denominators; every intermediate entry is then a minor of the integer
/// matrix, so all divisions are exact.
pub fn exact_null_space(rows: &[Vec<Rational>], cols: usize) -> ExactNullSpace {
    let mut m: Vec<Vec<Integer>> = rows.iter().map(|r| clear_denominators(r)).collect();
    let nrows = m.len();
    let mut prev = Integer::from(1);
    let mut pivots: Vec<usize> = Vec::new();
    let mut row = 0;
    for col in 0..cols {
        if row == nrows {
            break;
        }
        let Some(pr) = (row..nrows).find(|&i| m[i][col] != 0) else {
            continue;
        };
        m.swap(row, pr);
        let (top, rest) = m.split_at_mut(row + 1);
        let pivot_row = &top[row];
        for r in rest.iter_mut() {
            for j in col + 1..cols {
                let mut v = Integer::from(&pivot_row[col] * &r[j]);
                v -= Integer::from(&r[col] * &pivot_row[j]);
                debug_assert!(v.is_divisible(&prev));
                v.div_exact_mut(&prev);
                r[j] = v;
            }
            r[col] = Integer::new();
        }
        prev = m[row][col].clone();
        pivots.push(col);
        row += 1;
    }
    let rank = pivots.len();
    let vector = (rank < cols).then(|| back_substitute(&m, &pivots, cols));
    ExactNullSpace { rank, vector }
}

fn clear_denominators(row: &[Rational]) -> Vec<Integer> {
    let mut lcm = Integer::from(1);
    for v in row {
        lcm.lcm_mut(v.denom());
    }
    row.iter()
        .map(|v| {
            let scaled = Rational::from(v * &lcm);
            debug_assert!(*scaled.denom() == 1);
            scaled.into_numer_denom().0
        })
        .collect()
}

fn back_substitute(m: &[Vec<Integer>], pivots: &[usize], cols: usize) -> Vec<Rational> {
    let free = (0..cols)
        .find(|c| !pivots.contains(c))
        .expect("rank deficient");
    let mut x = vec![Rational::new(); cols];
    x[free] = Rational::from(1);
    for (i, &pc) in pivots.iter().enumerate().rev() {
        let mut acc = Rational::new();
        for j in pc + 1..cols {
            if m[i][j] != 0 && x[j] != 0 {
                acc += Rational::from(&x[j] * &m[i][j]);
            }
        }
        x[pc] = -acc / Rational::from(&m[i][pc]);
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(prec: u32, rows: &[&[f64]]) -> Matrix {
        let mut m = Matrix::zeros(rows.len(), rows[0].len(), prec);
        for (r, row) in rows.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                m.set(r, c, Float::with_val(prec, *v));
            }
        }
        m
    }

    #[test]
    fn diagonal_singular_values() {
        let m = mat(128, &[&[3.0, 0.0], &[0.0, 0.5], &[0.0, 0.0]]);
        let s = smallest_singular(&m);
        assert_eq!(s.sigma_min, 0.5);
        assert_eq!(s.sigma_max, 3.0);
        assert_eq!(s.vector[1].clone().abs(), 1);
    }

    #[test]
    fn rank_deficient_matrix_has_tiny_sigma() {
        // Third column = first + 2 * second.
        let m = mat(
            256,
            &[&[1.0, 2.0, 5.0], &[3.0, -1.0, 1.0], &[0.5, 0.25, 1.0], &[2.0, 7.0, 16.0]],
        );
        let s = smallest_singular(&m);
        let ratio = Float::with_val(256, &s.sigma_min / &s.sigma_max);
        assert!(ratio < Float::with_val(64, 1) >> 240);
        // Null vector is proportional to (1, 2, -1).
        let k = Float::with_val(256, &s.vector[0]);
        let d1 = Float::with_val(256, &s.vector[1] - Float::with_val(256, &k * 2u32)).abs();
        let d2 = Float::with_val(256, &s.vector[2] + &k).abs();
        assert!(d1 < Float::with_val(64, 1) >> 240 && d2 < Float::with_val(64, 1) >> 240);
    }

    #[test]
    fn singular_values_match_two_by_two_closed_form() {
        // [[2, 1], [1, 2]] has singular values 3 and 1.
        let m = mat(200, &[&[2.0, 1.0], &[1.0, 2.0]]);
        let s = smallest_singular(&m);
        let tol = Float::with_val(64, 1) >> 190;
        assert!(Float::with_val(200, &s.sigma_min - 1u32).abs() < tol);
        assert!(Float::with_val(200, &s.sigma_max - 3u32).abs() < tol);
    }

    fn q(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    #[test]
    fn exact_full_rank() {
        let rows = vec![vec![q(1, 2), q(1, 3)], vec![q(1, 4), q(1, 5)], vec![q(1, 1), q(0, 1)]];
        let ns = exact_null_space(&rows, 2);
        assert_eq!(ns.rank, 2);
        assert!(ns.vector.is_none());
    }

    #[test]
    fn exact_null_vector_annihilates_rows() {
        let rows = vec![
            vec![q(1, 2), q(1, 3), q(5, 6)],
            vec![q(2, 7), q(-1, 7), q(1, 7)],
            vec![q(1, 1), q(1, 1), q(2, 1)],
            vec![q(3, 1), q(2, 1), q(5, 1)],
        ];
        let ns = exact_null_space(&rows, 3);
        assert_eq!(ns.rank, 2);
        let v = ns.vector.unwrap();
        for r in &rows {
            let dot: Rational = r.iter().zip(&v).map(|(a, b)| Rational::from(a * b)).sum();
            assert_eq!(dot, 0);
        }
    }

    #[test]
    fn exact_skips_zero_columns() {
        let rows = vec![vec![q(0, 1), q(1, 1), q(2, 1)], vec![q(0, 1), q(2, 1), q(4, 1)]];
        let ns = exact_null_space(&rows, 3);
        assert_eq!(ns.rank, 1);
        let v = ns.vector.unwrap();
        assert_eq!(v, vec![q(1, 1), q(0, 1), q(0, 1)]);
    }
}
