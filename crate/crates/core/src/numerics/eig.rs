//! Eigendecomposition of general real square matrices.
//!
//! The matrix is reduced to upper Hessenberg form with Householder
//! similarities, then driven to real Schur form by Francis double-shift QR.
//! Eigenvectors come from back-substitution on the quasi-triangular factor;
//! left eigenvectors are the rows of the inverse of the right-eigenvector
//! matrix, so `L · R = I` holds by construction.

use std::cmp::Ordering;

use num_complex::Complex64;

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Eigenvector matrices whose 1-norm condition estimate exceeds this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

const MAX_QR_ITERATIONS_PER_EIGENVALUE: usize = 200;

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    fn norm1(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.get(i, j).norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Inverse by LU with partial pivoting; `None` when a pivot vanishes.
    pub fn inverse(&self) -> Option<CMatrix> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = CMatrix::zeros(n, n);
        for i in 0..n {
            inv.set(i, i, Complex64::new(1.0, 0.0));
        }
        for k in 0..n {
            let (piv, best) = (k..n)
                .map(|i| (i, a.get(i, k).norm()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best == 0.0 || !best.is_finite() {
                return None;
            }
            if piv != k {
                for j in 0..n {
                    a.data.swap(k * n + j, piv * n + j);
                    inv.data.swap(k * n + j, piv * n + j);
                }
            }
            let d = a.get(k, k);
            for j in 0..n {
                a.data[k * n + j] /= d;
                inv.data[k * n + j] /= d;
            }
            for i in 0..n {
                if i == k {
                    continue;
                }
                let f = a.get(i, k);
                if f == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    let akj = a.data[k * n + j];
                    let ikj = inv.data[k * n + j];
                    a.data[i * n + j] -= f * akj;
                    inv.data[i * n + j] -= f * ikj;
                }
            }
        }
        Some(inv)
    }
}

/// Eigenvalues sorted by descending magnitude with matching right (columns of
/// `right`) and left (rows of `left`) eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<Complex64>,
    pub right: CMatrix,
    pub left: CMatrix,
    /// 1-norm condition estimate of `right`.
    pub condition: f64,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn right_vector(&self, a: usize) -> Vec<Complex64> {
        self.right.column(a)
    }

    pub fn left_vector(&self, a: usize) -> Vec<Complex64> {
        self.left.row(a).to_vec()
    }

    /// `R · diag(Λ) · L`
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.dim();
        let mut scaled = self.right.clone();
        for i in 0..n {
            for j in 0..n {
                let v = scaled.get(i, j) * self.eigenvalues[j];
                scaled.set(i, j, v);
            }
        }
        scaled.matmul(&self.left)
    }

    /// Negates right eigenvector `a` and the matching left eigenvector.
    pub fn flip_mode(&mut self, a: usize) {
        let n = self.dim();
        for i in 0..n {
            let r = self.right.get(i, a);
            self.right.set(i, a, -r);
            let l = self.left.get(a, i);
            self.left.set(a, i, -l);
        }
    }
}

/// Full eigendecomposition of a real square matrix.
///
/// Right eigenvectors have unit 2-norm with their largest-magnitude entry
/// rotated to be real and positive (first index wins ties).
pub fn eig_general(m: &Matrix) -> Result<EigenDecomposition> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if m.rows() == 0 {
        return Err(Error::Dimension("empty matrix".into()));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("eigendecomposition input".into()));
    }
    let n = m.rows();
    let mut h: Vec<Vec<f64>> = (0..n).map(|i| m.row(i).to_vec()).collect();
    let mut v = vec![vec![0.0; n]; n];
    reduce_to_hessenberg(&mut h, &mut v);
    let (re, im) = hessenberg_qr(&mut h, &mut v)?;

    let mut values = Vec::with_capacity(n);
    let mut vectors: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    let mut j = 0;
    while j < n {
        if im[j] == 0.0 {
            values.push(Complex64::new(re[j], 0.0));
            vectors.push((0..n).map(|i| Complex64::new(v[i][j], 0.0)).collect());
            j += 1;
        } else {
            // columns j, j+1 hold real and imaginary parts for re[j] + i·im[j]
            let lam = Complex64::new(re[j], im[j]);
            let vec: Vec<Complex64> = (0..n).map(|i| Complex64::new(v[i][j], v[i][j + 1])).collect();
            let conj: Vec<Complex64> = vec.iter().map(|z| z.conj()).collect();
            values.push(lam);
            vectors.push(vec);
            values.push(lam.conj());
            vectors.push(conj);
            j += 2;
        }
    }
    for vec in &mut vectors {
        normalize_phase(vec);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| compare_eigenvalues(values[a], values[b]));

    let mut right = CMatrix::zeros(n, n);
    let mut eigenvalues = Vec::with_capacity(n);
    for (col, &src) in order.iter().enumerate() {
        eigenvalues.push(values[src]);
        for i in 0..n {
            right.set(i, col, vectors[src][i]);
        }
    }

    let left = right.inverse().ok_or(Error::IllConditioned {
        condition: f64::INFINITY,
    })?;
    let condition = right.norm1() * left.norm1();
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::IllConditioned { condition });
    }
    Ok(EigenDecomposition {
        eigenvalues,
        right,
        left,
        condition,
    })
}

/// Eigenvalues alone, in the same order as [`eig_general`]. Succeeds for
/// defective matrices too.
pub fn eigenvalues(m: &Matrix) -> Result<Vec<Complex64>> {
    if !m.is_square() || m.rows() == 0 {
        return Err(Error::Dimension(format!(
            "eigenvalues need a non-empty square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("eigenvalue input".into()));
    }
    let n = m.rows();
    let mut h: Vec<Vec<f64>> = (0..n).map(|i| m.row(i).to_vec()).collect();
    let mut v = vec![vec![0.0; n]; n];
    reduce_to_hessenberg(&mut h, &mut v);
    let (re, im) = hessenberg_qr(&mut h, &mut v)?;
    let mut values: Vec<Complex64> = re.iter().zip(&im).map(|(&a, &b)| Complex64::new(a, b)).collect();
    values.sort_by(|&a, &b| compare_eigenvalues(a, b));
    Ok(values)
}

/// Descending magnitude, then descending real part, then positive imaginary first.
fn compare_eigenvalues(a: Complex64, b: Complex64) -> Ordering {
    b.norm()
        .partial_cmp(&a.norm())
        .unwrap_or(Ordering::Equal)
        .then(b.re.partial_cmp(&a.re).unwrap_or(Ordering::Equal))
        .then(b.im.partial_cmp(&a.im).unwrap_or(Ordering::Equal))
}

fn normalize_phase(v: &mut [Complex64]) {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return;
    }
    let mut big = 0;
    let mut big_abs = -1.0;
    for (i, z) in v.iter().enumerate() {
        let a = z.norm();
        // strict comparison with a relative margin keeps the choice stable
        // between a vector and its conjugate
        if a > big_abs * (1.0 + 1e-12) {
            big = i;
            big_abs = a;
        }
    }
    let phase = v[big] / v[big].norm();
    let scale = phase.conj() / norm;
    for z in v.iter_mut() {
        *z *= scale;
    }
    v[big] = Complex64::new(v[big].re, 0.0);
}

fn reduce_to_hessenberg(h: &mut [Vec<f64>], v: &mut [Vec<f64>]) {
    let n = h.len();
    let high = n - 1;
    let mut ort = vec![0.0; n];
    for m in 1..high {
        let scale: f64 = (m..=high).map(|i| h[i][m - 1].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[i][m - 1] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;

        for j in m..n {
            let mut f = 0.0;
            for i in (m..=high).rev() {
                f += ort[i] * h[i][j];
            }
            f /= hh;
            for i in m..=high {
                h[i][j] -= f * ort[i];
            }
        }
        for row in h.iter_mut().take(high + 1) {
            let mut f = 0.0;
            for j in (m..=high).rev() {
                f += ort[j] * row[j];
            }
            f /= hh;
            for j in m..=high {
                row[j] -= f * ort[j];
            }
        }
        ort[m] *= scale;
        h[m][m - 1] = scale * g;
    }

    for (i, row) in v.iter_mut().enumerate() {
        row.iter_mut().for_each(|x| *x = 0.0);
        row[i] = 1.0;
    }
    for m in (1..high).rev() {
        if h[m][m - 1] == 0.0 {
            continue;
        }
        for i in m + 1..=high {
            ort[i] = h[i][m - 1];
        }
        for j in m..=high {
            let mut g = 0.0;
            for i in m..=high {
                g += ort[i] * v[i][j];
            }
            // two divisions avoid underflow
            g = (g / ort[m]) / h[m][m - 1];
            for i in m..=high {
                v[i][j] += g * ort[i];
            }
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix, followed by
/// eigenvector back-substitution. On return `v` holds the eigenvectors of the
/// original matrix (complex pairs as adjacent real/imaginary columns).
fn hessenberg_qr(h: &mut [Vec<f64>], v: &mut [Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let nn = h.len();
    let eps = f64::EPSILON;
    let mut d = vec![0.0; nn];
    let mut e = vec![0.0; nn];
    let mut exshift = 0.0;
    let (mut p, mut q): (f64, f64);
    let (mut r, mut s, mut z) = (0.0f64, 0.0f64, 0.0f64);
    let (mut t, mut w, mut x, mut y);

    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[i][j].abs();
        }
    }

    let max_iter = MAX_QR_ITERATIONS_PER_EIGENVALUE * nn.max(1);
    let mut total_iter = 0usize;
    let mut n = nn as isize - 1;
    let mut iter = 0;
    while n >= 0 {
        let nu = n as usize;
        let mut l = nu;
        while l > 0 {
            s = h[l - 1][l - 1].abs() + h[l][l].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[l][l - 1].abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == nu {
            h[nu][nu] += exshift;
            d[nu] = h[nu][nu];
            e[nu] = 0.0;
            n -= 1;
            iter = 0;
        } else if l + 1 == nu {
            w = h[nu][nu - 1] * h[nu - 1][nu];
            p = (h[nu - 1][nu - 1] - h[nu][nu]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            h[nu][nu] += exshift;
            h[nu - 1][nu - 1] += exshift;
            x = h[nu][nu];

            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                d[nu - 1] = x + z;
                d[nu] = d[nu - 1];
                if z != 0.0 {
                    d[nu] = x - w / z;
                }
                e[nu - 1] = 0.0;
                e[nu] = 0.0;
                x = h[nu][nu - 1];
                s = x.abs() + z.abs();
                p = x / s;
                q = z / s;
                r = (p * p + q * q).sqrt();
                p /= r;
                q /= r;
                for j in nu - 1..nn {
                    z = h[nu - 1][j];
                    h[nu - 1][j] = q * z + p * h[nu][j];
                    h[nu][j] = q * h[nu][j] - p * z;
                }
                for row in h.iter_mut().take(nu + 1) {
                    z = row[nu - 1];
                    row[nu - 1] = q * z + p * row[nu];
                    row[nu] = q * row[nu] - p * z;
                }
                for row in v.iter_mut() {
                    z = row[nu - 1];
                    row[nu - 1] = q * z + p * row[nu];
                    row[nu] = q * row[nu] - p * z;
                }
            } else {
                d[nu - 1] = x + p;
                d[nu] = x + p;
                e[nu - 1] = z;
                e[nu] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            x = h[nu][nu];
            y = 0.0;
            w = 0.0;
            if l < nu {
                y = h[nu - 1][nu - 1];
                w = h[nu][nu - 1] * h[nu - 1][nu];
            }

            // exceptional shifts
            if iter == 10 {
                exshift += x;
                for i in 0..=nu {
                    h[i][i] -= x;
                }
                s = h[nu][nu - 1].abs() + h[nu - 1][nu - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in 0..=nu {
                        h[i][i] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }

            iter += 1;
            total_iter += 1;
            if total_iter > max_iter {
                return Err(Error::NoConvergence(total_iter));
            }

            // look for two consecutive small sub-diagonal elements
            let mut m = nu - 2;
            loop {
                z = h[m][m];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[m + 1][m] + h[m][m + 1];
                q = h[m + 1][m + 1] - z - r - s;
                r = h[m + 2][m + 1];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[m][m - 1].abs() * (q.abs() + r.abs())
                    < eps * (p.abs() * (h[m - 1][m - 1].abs() + z.abs() + h[m + 1][m + 1].abs()))
                {
                    break;
                }
                m -= 1;
            }

            for i in m + 2..=nu {
                h[i][i - 2] = 0.0;
                if i > m + 2 {
                    h[i][i - 3] = 0.0;
                }
            }

            // double QR step on rows l..=n, columns m..=n
            let mut k = m;
            while k < nu {
                let notlast = k != nu - 1;
                if k != m {
                    p = h[k][k - 1];
                    q = h[k + 1][k - 1];
                    r = if notlast { h[k + 2][k - 1] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        k += 1;
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        h[k][k - 1] = -s * x;
                    } else if l != m {
                        h[k][k - 1] = -h[k][k - 1];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    for j in k..nn {
                        p = h[k][j] + q * h[k + 1][j];
                        if notlast {
                            p += r * h[k + 2][j];
                            h[k + 2][j] -= p * z;
                        }
                        h[k][j] -= p * x;
                        h[k + 1][j] -= p * y;
                    }
                    for row in h.iter_mut().take(nu.min(k + 3) + 1) {
                        p = x * row[k] + y * row[k + 1];
                        if notlast {
                            p += z * row[k + 2];
                            row[k + 2] -= p * r;
                        }
                        row[k] -= p;
                        row[k + 1] -= p * q;
                    }
                    for row in v.iter_mut() {
                        p = x * row[k] + y * row[k + 1];
                        if notlast {
                            p += z * row[k + 2];
                            row[k + 2] -= p * r;
                        }
                        row[k] -= p;
                        row[k + 1] -= p * q;
                    }
                }
                k += 1;
            }
        }
    }

    if norm == 0.0 {
        return Ok((d, e));
    }

    // back-substitute to find vectors of the upper triangular form
    for n in (0..nn).rev() {
        p = d[n];
        q = e[n];
        if q == 0.0 {
            let mut l = n;
            h[n][n] = 1.0;
            for i in (0..n).rev() {
                w = h[i][i] - p;
                r = 0.0;
                for j in l..=n {
                    r += h[i][j] * h[j][n];
                }
                if e[i] < 0.0 {
                    z = w;
                    s = r;
                } else {
                    l = i;
                    if e[i] == 0.0 {
                        h[i][n] = if w != 0.0 { -r / w } else { -r / (eps * norm) };
                    } else {
                        x = h[i][i + 1];
                        y = h[i + 1][i];
                        q = (d[i] - p) * (d[i] - p) + e[i] * e[i];
                        t = (x * s - z * r) / q;
                        h[i][n] = t;
                        h[i + 1][n] = if x.abs() > z.abs() {
                            (-r - w * t) / x
                        } else {
                            (-s - y * t) / z
                        };
                    }
                    t = h[i][n].abs();
                    if (eps * t) * t > 1.0 {
                        for row in h.iter_mut().take(n + 1).skip(i) {
                            row[n] /= t;
                        }
                    }
                }
            }
        } else if q < 0.0 {
            let mut l = n - 1;
            if h[n][n - 1].abs() > h[n - 1][n].abs() {
                h[n - 1][n - 1] = q / h[n][n - 1];
                h[n - 1][n] = -(h[n][n] - p) / h[n][n - 1];
            } else {
                let c = cdiv(0.0, -h[n - 1][n], h[n - 1][n - 1] - p, q);
                h[n - 1][n - 1] = c.re;
                h[n - 1][n] = c.im;
            }
            h[n][n - 1] = 0.0;
            h[n][n] = 1.0;
            for i in (0..n.saturating_sub(1)).rev() {
                let mut ra = 0.0;
                let mut sa = 0.0;
                for j in l..=n {
                    ra += h[i][j] * h[j][n - 1];
                    sa += h[i][j] * h[j][n];
                }
                w = h[i][i] - p;
                if e[i] < 0.0 {
                    z = w;
                    r = ra;
                    s = sa;
                } else {
                    l = i;
                    if e[i] == 0.0 {
                        let c = cdiv(-ra, -sa, w, q);
                        h[i][n - 1] = c.re;
                        h[i][n] = c.im;
                    } else {
                        x = h[i][i + 1];
                        y = h[i + 1][i];
                        let mut vr = (d[i] - p) * (d[i] - p) + e[i] * e[i] - q * q;
                        let vi = (d[i] - p) * 2.0 * q;
                        if vr == 0.0 && vi == 0.0 {
                            vr = eps * norm * (w.abs() + q.abs() + x.abs() + y.abs() + z.abs());
                        }
                        let c = cdiv(x * r - z * ra + q * sa, x * s - z * sa - q * ra, vr, vi);
                        h[i][n - 1] = c.re;
                        h[i][n] = c.im;
                        if x.abs() > z.abs() + q.abs() {
                            h[i + 1][n - 1] = (-ra - w * h[i][n - 1] + q * h[i][n]) / x;
                            h[i + 1][n] = (-sa - w * h[i][n] - q * h[i][n - 1]) / x;
                        } else {
                            let c = cdiv(-r - y * h[i][n - 1], -s - y * h[i][n], z, q);
                            h[i + 1][n - 1] = c.re;
                            h[i + 1][n] = c.im;
                        }
                    }
                    t = h[i][n - 1].abs().max(h[i][n].abs());
                    if (eps * t) * t > 1.0 {
                        for row in h.iter_mut().take(n + 1).skip(i) {
                            row[n - 1] /= t;
                            row[n] /= t;
                        }
                    }
                }
            }
        }
    }

    // back transformation to eigenvectors of the original matrix
    for j in (0..nn).rev() {
        for row in v.iter_mut() {
            let mut acc = 0.0;
            for k in 0..=j {
                acc += row[k] * h[k][j];
            }
            row[j] = acc;
        }
    }
    Ok((d, e))
}

fn cdiv(xr: f64, xi: f64, yr: f64, yi: f64) -> Complex64 {
    if yr.abs() > yi.abs() {
        let r = yi / yr;
        let d = yr + r * yi;
        Complex64::new((xr + r * xi) / d, (xi - r * xr) / d)
    } else {
        let r = yr / yi;
        let d = yi + r * yr;
        Complex64::new((r * xr + xi) / d, (r * xi - xr) / d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn residual(m: &Matrix, eig: &EigenDecomposition, a: usize) -> f64 {
        let n = m.rows();
        let r = eig.right_vector(a);
        let lam = eig.eigenvalues[a];
        (0..n)
            .map(|i| {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    acc += r[j] * m[(i, j)];
                }
                (acc - lam * r[i]).norm_sqr()
            })
            .sum::<f64>()
            .sqrt()
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
        Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn swap_matrix() {
        let m = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let eig = eig_general(&m).unwrap();
        assert!((eig.eigenvalues[0] - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        assert!((eig.eigenvalues[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-14);
        let s = 1.0 / 2f64.sqrt();
        let r0 = eig.right_vector(0);
        let r1 = eig.right_vector(1);
        assert!((r0[0].re - s).abs() < 1e-12 && (r0[1].re - s).abs() < 1e-12);
        // phase convention: largest entry (first on ties) is real positive
        assert!((r1[0].re - s).abs() < 1e-12 && (r1[1].re + s).abs() < 1e-12);
    }

    #[test]
    fn diagonal_sorted_by_magnitude() {
        let m = Matrix::from_diagonal(&[3.0, 0.5, -2.0]);
        let eig = eig_general(&m).unwrap();
        let re: Vec<f64> = eig.eigenvalues.iter().map(|z| z.re).collect();
        assert_eq!(re, vec![3.0, -2.0, 0.5]);
        assert!(eig.eigenvalues.iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn rotation_gives_conjugate_pair() {
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let m = Matrix::from_rows(&[
            vec![0.9 * c, -0.9 * s, 0.0],
            vec![0.9 * s, 0.9 * c, 0.0],
            vec![0.0, 0.0, 0.5],
        ])
        .unwrap();
        let eig = eig_general(&m).unwrap();
        assert!((eig.eigenvalues[0].norm() - 0.9).abs() < 1e-12);
        assert!(eig.eigenvalues[0].im > 0.0);
        assert_eq!(eig.eigenvalues[1], eig.eigenvalues[0].conj());
        for a in 0..3 {
            assert!(residual(&m, &eig, a) < 1e-12);
        }
    }

    #[test]
    fn random_matrices_satisfy_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &n in &[1usize, 2, 3, 5, 8, 17, 33] {
            let m = random_matrix(&mut rng, n);
            let eig = eig_general(&m).unwrap();
            let fro = m.frobenius_norm();
            for a in 0..n {
                assert!(residual(&m, &eig, a) <= 1e-6 * fro, "n={n} a={a}");
                let norm: f64 = eig.right_vector(a).iter().map(|z| z.norm_sqr()).sum();
                assert!((norm - 1.0).abs() < 1e-12);
            }
            let sum: Complex64 = eig.eigenvalues.iter().sum();
            assert!((sum.re - m.trace()).abs() < 1e-8);
            assert!(sum.im.abs() < 1e-8);
            for w in eig.eigenvalues.windows(2) {
                assert!(w[0].norm() >= w[1].norm());
            }
        }
    }

    #[test]
    fn rejects_non_square_and_defective() {
        assert!(matches!(
            eig_general(&Matrix::zeros(2, 3)),
            Err(Error::Dimension(_))
        ));
        // Jordan block: eigenvectors collapse onto one direction
        let j = Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(eig_general(&j), Err(Error::IllConditioned { .. })));
        let vals = eigenvalues(&j).unwrap();
        assert!(vals.iter().all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn deterministic_bits() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_matrix(&mut rng, 20);
        assert_eq!(eig_general(&m).unwrap(), eig_general(&m).unwrap());
    }
}
