//! Geometry of hidden states and fixed points: PCA dimensionality, a 1-D
//! locally-linear-embedding coordinate `θ` along the fixed-point set, the
//! principal manifold direction `m`, and overlaps of slow modes with `m`.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linearize::LinearizedSystem;
use crate::numerics::{dot, norm2, pca_fit, solve_least_squares, symmetric_eigen, Matrix, PcaFit};
use crate::training::{ClassifierModel, Document};

/// Every state visited while reading `docs` (initial state excluded).
pub fn collect_states(model: &ClassifierModel, docs: &[Document]) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    for d in docs {
        out.extend(model.trajectory(&d.tokens)?.into_iter().skip(1));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimensionalityComparison {
    pub trained: PcaFit,
    pub untrained: PcaFit,
    pub n_states: usize,
}

impl DimensionalityComparison {
    pub fn trained_curve(&self) -> Vec<f64> {
        self.trained.cumulative_ratios()
    }

    pub fn untrained_curve(&self) -> Vec<f64> {
        self.untrained.cumulative_ratios()
    }
}

/// PCA of the states both models visit on the same documents.
pub fn dimensionality_comparison(trained: &ClassifierModel, untrained: &ClassifierModel, docs: &[Document]) -> Result<DimensionalityComparison> {
    if trained.architecture() != untrained.architecture() || trained.state_size() != untrained.state_size() {
        return Err(Error::Dimension("trained and untrained models differ in architecture or size".into()));
    }
    let a = collect_states(trained, docs)?;
    let b = collect_states(untrained, docs)?;
    if a.len() < 2 {
        return Err(Error::InsufficientData("fewer than 2 visited states".into()));
    }
    let k = trained.state_size().min(a.len() - 1);
    Ok(DimensionalityComparison {
        trained: pca_fit(&a, k)?,
        untrained: pca_fit(&b, k)?,
        n_states: a.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LleConfig {
    pub k_neighbors: usize,
    /// Regularizer added to each local Gram matrix, relative to its trace.
    pub ridge: f64,
}

impl Default for LleConfig {
    fn default() -> Self {
        Self {
            k_neighbors: 10,
            ridge: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldFit {
    pub pca: PcaFit,
    /// Top principal direction of the fixed points, `mᵀ readout ≥ 0`.
    pub m: Vec<f64>,
    /// LLE coordinate per point, min-max scaled to `[−1, 1]`.
    pub theta: Vec<f64>,
    pub config: LleConfig,
}

/// `k` nearest neighbours of every point (Euclidean; ties by index).
pub fn nearest_neighbors(points: &[Vec<f64>], k: usize) -> Vec<Vec<usize>> {
    let n = points.len();
    (0..n)
        .map(|i| {
            let mut d: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let s: f64 = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                    (s, j)
                })
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

/// Sizes of the connected components of the symmetrized neighbour graph,
/// largest first.
pub fn component_sizes(neighbors: &[Vec<usize>]) -> Vec<usize> {
    let n = neighbors.len();
    let mut adj: Vec<Vec<usize>> = neighbors.to_vec();
    for (i, nb) in neighbors.iter().enumerate() {
        for &j in nb {
            adj[j].push(i);
        }
    }
    let mut seen = vec![false; n];
    let mut sizes = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        let mut size = 0;
        while let Some(v) = queue.pop_front() {
            size += 1;
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        sizes.push(size);
    }
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

/// One-dimensional locally linear embedding, min-max scaled to `[−1, 1]`
/// (orientation arbitrary).
pub fn lle_coordinate(points: &[Vec<f64>], config: &LleConfig) -> Result<Vec<f64>> {
    let n = points.len();
    let k = config.k_neighbors;
    if k == 0 {
        return Err(Error::InvalidArgument("k_neighbors must be positive".into()));
    }
    if n < k + 2 {
        return Err(Error::InsufficientData(format!(
            "manifold fit needs at least {} points for k = {k}, got {n}",
            k + 2
        )));
    }
    if !(config.ridge >= 0.0) {
        return Err(Error::InvalidArgument("ridge must be non-negative".into()));
    }
    let neighbors = nearest_neighbors(points, k);
    let sizes = component_sizes(&neighbors);
    if sizes.len() > 1 {
        return Err(Error::DisconnectedGraph { sizes });
    }

    // reconstruction weights: minimize ‖x_i − Σ w_j x_j‖² subject to Σ w_j = 1
    let mut w = Matrix::zeros(n, n);
    for (i, nb) in neighbors.iter().enumerate() {
        let z: Vec<Vec<f64>> = nb
            .iter()
            .map(|&j| points[j].iter().zip(&points[i]).map(|(a, b)| a - b).collect())
            .collect();
        let mut c = Matrix::from_fn(k, k, |a, b| dot(&z[a], &z[b]));
        let tr = c.trace();
        let reg = if tr > 0.0 { config.ridge * tr } else { config.ridge.max(1e-12) };
        for a in 0..k {
            c[(a, a)] += reg;
        }
        let sol = solve_least_squares(&c, &vec![1.0; k], 0.0)?.solution;
        let s: f64 = sol.iter().sum();
        if s == 0.0 || !s.is_finite() {
            return Err(Error::NonFinite("local reconstruction weights".into()));
        }
        for (&j, v) in nb.iter().zip(&sol) {
            w[(i, j)] = v / s;
        }
    }
    // M = (I − W)ᵀ(I − W)
    let iw = Matrix::identity(n).sub(&w)?;
    let m = iw.transpose().matmul(&iw)?;
    let eig = symmetric_eigen(&m)?;
    let y = eig.vectors.column(1);
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if !(hi > lo) {
        return Err(Error::InsufficientData("embedding coordinate is constant".into()));
    }
    Ok(y.iter().map(|v| 2.0 * (v - lo) / (hi - lo) - 1.0).collect())
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

/// PCA of the fixed points and their top direction `m`, signed so that
/// `mᵀ readout ≥ 0`.
pub fn principal_axis(points: &[Vec<f64>], readout: &[f64]) -> Result<(PcaFit, Vec<f64>)> {
    if let Some(p) = points.iter().find(|p| p.len() != readout.len()) {
        return Err(Error::Dimension(format!(
            "point has length {}, readout has {}",
            p.len(),
            readout.len()
        )));
    }
    let n = points.len().max(1);
    let pca = pca_fit(points, readout.len().min(n - 1))?;
    let mut m = pca.component(0).to_vec();
    if dot(&m, readout) < 0.0 {
        m.iter_mut().for_each(|v| *v = -*v);
    }
    Ok((pca, m))
}

/// Fits `θ` and `m` to the fixed points. `θ` is oriented to correlate
/// positively with the readout projection `readoutᵀh` (with the projection on
/// `m` as the fallback when the readout sees no variation).
pub fn fit_manifold(points: &[Vec<f64>], readout: &[f64], config: &LleConfig) -> Result<ManifoldFit> {
    if let Some(p) = points.iter().find(|p| p.len() != readout.len()) {
        return Err(Error::Dimension(format!(
            "point has length {}, readout has {}",
            p.len(),
            readout.len()
        )));
    }
    let mut theta = lle_coordinate(points, config)?;
    let (pca, m) = principal_axis(points, readout)?;
    let along_readout: Vec<f64> = points.iter().map(|p| dot(p, readout)).collect();
    let mut corr = pearson(&theta, &along_readout);
    if corr == 0.0 {
        let along_m: Vec<f64> = points.iter().map(|p| dot(p, &m)).collect();
        corr = pearson(&theta, &along_m);
    }
    if corr < 0.0 {
        theta.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(ManifoldFit {
        pca,
        m,
        theta,
        config: config.clone(),
    })
}

impl ManifoldFit {
    /// Fraction of neighbouring pairs along `θ` whose order matches their order
    /// along `m`.
    pub fn concordance(&self, points: &[Vec<f64>]) -> f64 {
        let mut order: Vec<usize> = (0..self.theta.len()).collect();
        order.sort_by(|&a, &b| self.theta[a].total_cmp(&self.theta[b]).then(a.cmp(&b)));
        let proj: Vec<f64> = points.iter().map(|p| dot(p, &self.m)).collect();
        let pairs = order.len().saturating_sub(1);
        if pairs == 0 {
            return 1.0;
        }
        let agree = order.windows(2).filter(|w| proj[w[1]] >= proj[w[0]]).count();
        agree as f64 / pairs as f64
    }

    pub fn top_component_ratio(&self) -> f64 {
        self.pca.explained_variance_ratio.first().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Overlap {
    pub fixed_point: usize,
    /// `r₁ᵀm`, or for a complex leading pair the norm of `m`'s projection
    /// onto the real 2-d invariant subspace.
    pub value: f64,
    pub complex: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapReport {
    pub overlaps: Vec<Overlap>,
    /// Fixed points skipped because their eigenbasis was defective.
    pub skipped: Vec<usize>,
    /// `|uᵀm|` for random unit vectors `u`.
    pub null: Vec<f64>,
}

/// Quantile by linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

impl OverlapReport {
    pub fn median_abs_overlap(&self) -> f64 {
        let abs: Vec<f64> = self.overlaps.iter().map(|o| o.value.abs()).collect();
        quantile(&abs, 0.5)
    }

    pub fn null_mean(&self) -> f64 {
        self.null.iter().sum::<f64>() / self.null.len().max(1) as f64
    }

    pub fn null_quantile(&self, q: f64) -> f64 {
        quantile(&self.null, q)
    }
}

/// Expected `|uᵀm|` for `u` uniform on the unit sphere in `d` dimensions,
/// `Γ(d/2) / (√π Γ((d+1)/2))`, which tends to `√(2/(πd))`.
pub fn null_overlap_mean(d: usize) -> f64 {
    if d == 0 {
        return 0.0;
    }
    // v(1) = 1, v(2) = 2/π, v(d + 2) = v(d) · d / (d + 1)
    let (mut v, mut k) = if d % 2 == 0 { (2.0 / std::f64::consts::PI, 2) } else { (1.0, 1) };
    while k < d {
        v *= k as f64 / (k + 1) as f64;
        k += 2;
    }
    v
}

/// Random unit vectors of dimension `d` (normalized Gaussians).
pub fn random_unit_vectors(d: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| loop {
            let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let nv = norm2(&v);
            if nv > 0.0 {
                break v.into_iter().map(|x| x / nv).collect();
            }
        })
        .collect()
}

pub fn overlap_report(systems: &[LinearizedSystem], m: &[f64], n_null: usize, seed: u64) -> Result<OverlapReport> {
    let mut overlaps = Vec::new();
    let mut skipped = Vec::new();
    for s in systems {
        let Some(eig) = &s.eig else {
            skipped.push(s.fixed_point);
            continue;
        };
        if m.len() != s.state_size() {
            return Err(Error::Dimension("manifold direction and state sizes differ".into()));
        }
        let r = eig.right_vector(0);
        let (value, complex) = if s.leading_is_complex() {
            // orthonormal basis of span{Re r, Im r}
            let a: Vec<f64> = r.iter().map(|z| z.re).collect();
            let b: Vec<f64> = r.iter().map(|z| z.im).collect();
            let na = norm2(&a);
            let e1: Vec<f64> = a.iter().map(|v| v / na).collect();
            let proj = dot(&b, &e1);
            let b_perp: Vec<f64> = b.iter().zip(&e1).map(|(v, e)| v - proj * e).collect();
            let nb = norm2(&b_perp);
            let c1 = dot(m, &e1);
            let c2 = if nb > 0.0 { dot(m, &b_perp) / nb } else { 0.0 };
            ((c1 * c1 + c2 * c2).sqrt(), true)
        } else {
            let re: Vec<f64> = r.iter().map(|z| z.re).collect();
            (dot(&re, m).clamp(-1.0, 1.0), false)
        };
        overlaps.push(Overlap {
            fixed_point: s.fixed_point,
            value,
            complex,
        });
    }
    let null = random_unit_vectors(m.len(), n_null, seed)
        .iter()
        .map(|u| dot(u, m).abs())
        .collect();
    Ok(OverlapReport { overlaps, skipped, null })
}

/// States, readout direction and initial state expressed on the first `k`
/// principal components.
#[derive(Debug, Clone, PartialEq)]
pub struct StateProjection {
    pub states: Vec<Vec<f64>>,
    pub readout: Vec<f64>,
    pub initial: Vec<f64>,
}

pub fn project_states(pca: &PcaFit, states: &[Vec<f64>], k: usize, readout: &[f64], initial: &[f64]) -> Result<StateProjection> {
    if k > pca.n_components() {
        return Err(Error::InvalidArgument(format!(
            "{k} components requested, fit has {}",
            pca.n_components()
        )));
    }
    let dim = pca.dim();
    if states.iter().any(|s| s.len() != dim) || readout.len() != dim || initial.len() != dim {
        return Err(Error::Dimension(format!("projection expects vectors of length {dim}")));
    }
    Ok(StateProjection {
        states: states.iter().map(|s| pca.transform(s, k)).collect(),
        readout: pca.transform_direction(readout, k),
        initial: pca.transform(initial, k),
    })
}
