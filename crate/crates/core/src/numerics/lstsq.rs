use super::matrix::{dot, Matrix};
use crate::error::{Error, Result};

/// Thin singular value decomposition `A = U diag(σ) Vᵀ` from one-sided Jacobi
/// rotations. `u` is `rows x k`, `v` is `cols x k` with `k = cols`; singular
/// values are unsorted.
#[derive(Debug, Clone)]
pub struct JacobiSvd {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub v: Matrix,
}

pub fn jacobi_svd(a: &Matrix) -> Result<JacobiSvd> {
    if !a.is_finite() {
        return Err(Error::NonFinite("svd input".into()));
    }
    let (m, n) = (a.rows(), a.cols());
    // work on columns stored contiguously
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    let tol = f64::EPSILON * (m.max(1) as f64);
    let mut converged = false;
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence(80));
    }
    let singular_values: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let u = Matrix::from_fn(m, n, |i, j| {
        if singular_values[j] > 0.0 {
            cols[j][i] / singular_values[j]
        } else {
            0.0
        }
    });
    let v = Matrix::from_fn(n, n, |i, j| v[j][i]);
    Ok(JacobiSvd {
        u,
        singular_values,
        v,
    })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let cp = &mut lo[p];
    let cq = &mut hi[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub solution: Vec<f64>,
    pub rank: usize,
    /// Set when `ridge == 0` and the system is rank deficient; the solution
    /// is then the minimum-norm minimizer.
    pub rank_deficient: bool,
}

/// `argmin ‖a·w − b‖² + ridge·‖w‖²`.
pub fn solve_least_squares(a: &Matrix, b: &[f64], ridge: f64) -> Result<LeastSquares> {
    if a.rows() == 0 {
        return Err(Error::InvalidArgument("least squares needs at least one row".into()));
    }
    if b.len() != a.rows() {
        return Err(Error::Dimension(format!(
            "rhs has {} entries for {} rows",
            b.len(),
            a.rows()
        )));
    }
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::InvalidArgument(format!("ridge must be non-negative, got {ridge}")));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("least squares rhs".into()));
    }
    let svd = jacobi_svd(a)?;
    let n = a.cols();
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = f64::EPSILON * (a.rows().max(n) as f64) * smax;
    let mut w = vec![0.0; n];
    let mut rank = 0;
    for j in 0..n {
        let s = svd.singular_values[j];
        if s > cutoff {
            rank += 1;
        }
        let factor = if ridge > 0.0 {
            s / (s * s + ridge)
        } else if s > cutoff {
            1.0 / s
        } else {
            continue;
        };
        let coef = factor * dot(&svd.u.column(j), b);
        for (i, wi) in w.iter_mut().enumerate() {
            *wi += coef * svd.v[(i, j)];
        }
    }
    Ok(LeastSquares {
        solution: w,
        rank,
        rank_deficient: ridge == 0.0 && rank < n,
    })
}
