use super::matrix::{dot, Matrix};
use super::symmetric::symmetric_eigen;
use crate::error::{Error, Result};

/// Principal component fit. `components` rows are orthonormal directions in
/// order of decreasing variance.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaFit {
    pub mean: Vec<f64>,
    pub components: Matrix,
    pub explained_variance_ratio: Vec<f64>,
    /// Total variance (sum over all directions, not only the kept ones).
    pub total_variance: f64,
}

/// Fits `n_components` principal directions to `data` (one sample per row).
///
/// The directions are the leading right-singular vectors of the centered
/// data, obtained from the eigendecomposition of its Gram matrix `XᵀX`; the
/// squared singular values are its eigenvalues. When the data have zero
/// variance every ratio is 0 and the components are the first coordinate axes.
pub fn pca_fit(data: &[Vec<f64>], n_components: usize) -> Result<PcaFit> {
    if data.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "pca needs at least 2 samples, got {}",
            data.len()
        )));
    }
    let dim = data[0].len();
    if data.iter().any(|row| row.len() != dim) {
        return Err(Error::Dimension("pca samples have differing lengths".into()));
    }
    if data.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("pca input".into()));
    }
    if n_components > dim.min(data.len() - 1) {
        return Err(Error::InvalidArgument(format!(
            "{n_components} components requested from {} samples in {dim} dimensions",
            data.len()
        )));
    }
    let n = data.len() as f64;
    let mut mean = vec![0.0; dim];
    for row in data {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);

    let mut gram = Matrix::zeros(dim, dim);
    let mut centered = vec![0.0; dim];
    for row in data {
        for ((c, v), m) in centered.iter_mut().zip(row).zip(&mean) {
            *c = v - m;
        }
        // upper triangle only
        for i in 0..dim {
            let ci = centered[i];
            if ci == 0.0 {
                continue;
            }
            let gi = gram.row_mut(i);
            for j in i..dim {
                gi[j] += ci * centered[j];
            }
        }
    }
    for i in 0..dim {
        for j in 0..i {
            gram[(i, j)] = gram[(j, i)];
        }
    }
    let total_variance = gram.trace();
    if total_variance <= 0.0 {
        return Ok(PcaFit {
            mean,
            components: Matrix::from_fn(n_components, dim, |i, j| f64::from(u8::from(i == j))),
            explained_variance_ratio: vec![0.0; n_components],
            total_variance: 0.0,
        });
    }
    let eig = symmetric_eigen(&gram)?;
    let mut components = Matrix::zeros(n_components, dim);
    let mut ratios = Vec::with_capacity(n_components);
    for k in 0..n_components {
        let col = dim - 1 - k;
        for j in 0..dim {
            components[(k, j)] = eig.vectors[(j, col)];
        }
        ratios.push((eig.values[col].max(0.0) / total_variance).clamp(0.0, 1.0));
    }
    // eigenvalue round-off can break monotonicity at the 1e-16 level
    for k in 1..ratios.len() {
        if ratios[k] > ratios[k - 1] {
            ratios[k] = ratios[k - 1];
        }
    }
    Ok(PcaFit {
        mean,
        components,
        explained_variance_ratio: ratios,
        total_variance: total_variance / (n - 1.0),
    })
}

impl PcaFit {
    pub fn n_components(&self) -> usize {
        self.components.rows()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn component(&self, k: usize) -> &[f64] {
        self.components.row(k)
    }

    /// Coordinates of `x − mean` on the first `k` components.
    pub fn transform(&self, x: &[f64], k: usize) -> Vec<f64> {
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        (0..k).map(|c| dot(self.component(c), &centered)).collect()
    }

    /// Coordinates of a direction (no centering) on the first `k` components.
    pub fn transform_direction(&self, v: &[f64], k: usize) -> Vec<f64> {
        (0..k).map(|c| dot(self.component(c), v)).collect()
    }

    pub fn inverse_transform(&self, coords: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, &a) in coords.iter().enumerate() {
            for (o, v) in out.iter_mut().zip(self.component(c)) {
                *o += a * v;
            }
        }
        out
    }

    pub fn cumulative_ratios(&self) -> Vec<f64> {
        self.explained_variance_ratio
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r;
                Some(*acc)
            })
            .collect()
    }

    /// Fraction of the variance of `points` (about their own mean) that lies
    /// in the span of the first `k` components.
    pub fn variance_retained(&self, points: &[Vec<f64>], k: usize) -> f64 {
        if points.is_empty() {
            return 0.0;
        }
        let dim = self.dim();
        let n = points.len() as f64;
        let mut mu = vec![0.0; dim];
        for p in points {
            for (m, v) in mu.iter_mut().zip(p) {
                *m += v / n;
            }
        }
        let (mut kept, mut total) = (0.0, 0.0);
        for p in points {
            let d: Vec<f64> = p.iter().zip(&mu).map(|(a, b)| a - b).collect();
            total += dot(&d, &d);
            kept += (0..k).map(|c| dot(self.component(c), &d).powi(2)).sum::<f64>();
        }
        if total == 0.0 {
            1.0
        } else {
            kept / total
        }
    }
}
