//! Approximate fixed points of the zero-input dynamics `h ↦ F(h, 0)`.
//!
//! Candidates minimize `q(h) = (1/N)‖h − F(h, 0)‖²` with Adam on `h`,
//! starting from states the trained network actually visits.

use log::{debug, warn};
use rayon::prelude::*;

use crate::cells::CellParameters;
use crate::error::{Error, Result};
use crate::numerics::{norm2, sub};
use crate::training::Adam;

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    pub h_star: Vec<f64>,
    pub q_value: f64,
    pub n_iterations: usize,
    /// Index of the initial state this point was optimized from.
    pub initial_state_id: usize,
    /// Manifold coordinate, filled in by the manifold fit.
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateStatus {
    Accepted,
    AboveThreshold,
    NonFinite,
}

/// Outcome of one optimization, kept whether or not it was accepted.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub initial_state_id: usize,
    pub h: Vec<f64>,
    pub q_value: f64,
    pub n_iterations: usize,
    pub status: CandidateStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointConfig {
    pub learning_rate: f64,
    /// Learning rate is multiplied by `decay_factor` every `decay_every` iterations.
    pub decay_factor: f64,
    pub decay_every: usize,
    pub max_iterations: usize,
    pub threshold: f64,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            decay_factor: 0.5,
            decay_every: 1000,
            max_iterations: 10_000,
            threshold: 1e-8,
        }
    }
}

impl FixedPointConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) || self.decay_every == 0 {
            return Err(Error::InvalidArgument("fixed-point optimizer settings out of range".into()));
        }
        if !(self.threshold >= 0.0) {
            return Err(Error::InvalidArgument(format!("threshold {} must be non-negative", self.threshold)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointSearch {
    /// Ordered by initial state id.
    pub accepted: Vec<FixedPoint>,
    pub candidates: Vec<Candidate>,
}

impl FixedPointSearch {
    pub fn rejected(&self) -> impl Iterator<Item = &Candidate> {
        self.candidates.iter().filter(|c| c.status != CandidateStatus::Accepted)
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.candidates.is_empty() {
            return 0.0;
        }
        self.accepted.len() as f64 / self.candidates.len() as f64
    }
}

fn check_state(cell: &CellParameters, h: &[f64]) -> Result<()> {
    if h.len() != cell.state_size() {
        return Err(Error::Dimension(format!(
            "state has length {}, cell state size is {}",
            h.len(),
            cell.state_size()
        )));
    }
    Ok(())
}

/// `(1/N)‖h − F(h, 0)‖²` with `N` the full state size.
pub fn q_loss(cell: &CellParameters, h: &[f64]) -> Result<f64> {
    check_state(cell, h)?;
    let x = vec![0.0; cell.input_size()];
    let f = cell.forward(h, &x).0;
    let d = sub(h, &f);
    Ok(d.iter().map(|v| v * v).sum::<f64>() / h.len() as f64)
}

/// `q` and `∇q = (2/N)(δ − J_recᵀ δ)` with `δ = h − F(h, 0)`.
pub fn q_loss_and_gradient(cell: &CellParameters, h: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_state(cell, h)?;
    Ok(q_unchecked(cell, h, &vec![0.0; cell.input_size()]))
}

fn q_unchecked(cell: &CellParameters, h: &[f64], x: &[f64]) -> (f64, Vec<f64>) {
    let n = h.len() as f64;
    let (f, cache) = cell.forward(h, x);
    let d = sub(h, &f);
    let q = d.iter().map(|v| v * v).sum::<f64>() / n;
    let (jt_d, _) = cell.backward(&cache, &d, None);
    let g = d.iter().zip(&jt_d).map(|(a, b)| 2.0 * (a - b) / n).collect();
    (q, g)
}

/// Minimizes `q` from one start. Returns the best iterate seen.
pub fn optimize_candidate(cell: &CellParameters, h0: &[f64], id: usize, config: &FixedPointConfig) -> Result<Candidate> {
    check_state(cell, h0)?;
    config.validate()?;
    let x = vec![0.0; cell.input_size()];
    let mut h = h0.to_vec();
    let mut opt = Adam::new(config.learning_rate, &[h.len()]);
    let stop = config.threshold / 10.0;
    let mut best = (f64::INFINITY, h.clone(), 0usize);
    let mut iterations = 0;
    loop {
        let (q, g) = q_unchecked(cell, &h, &x);
        if !q.is_finite() || !g.iter().all(|v| v.is_finite()) {
            debug!("candidate {id}: non-finite loss after {iterations} iterations");
            return Ok(Candidate {
                initial_state_id: id,
                h,
                q_value: q,
                n_iterations: iterations,
                status: CandidateStatus::NonFinite,
            });
        }
        if q < best.0 {
            best = (q, h.clone(), iterations);
        }
        if q < stop || iterations >= config.max_iterations {
            break;
        }
        if iterations > 0 && iterations % config.decay_every == 0 {
            opt.learning_rate *= config.decay_factor;
        }
        opt.step(&mut [&mut h], &[&g]);
        iterations += 1;
    }
    let (_, h, _) = best;
    // recompute so the stored value is exactly reproducible from h
    let q_value = q_loss(cell, &h)?;
    Ok(Candidate {
        initial_state_id: id,
        status: if q_value < config.threshold {
            CandidateStatus::Accepted
        } else {
            CandidateStatus::AboveThreshold
        },
        h,
        q_value,
        n_iterations: iterations,
    })
}

/// Optimizes every initial state independently (in parallel) and keeps those
/// ending below the threshold. Results are ordered by initial state id and do
/// not depend on scheduling.
pub fn find_fixed_points(cell: &CellParameters, initial_states: &[Vec<f64>], config: &FixedPointConfig) -> Result<FixedPointSearch> {
    config.validate()?;
    for h in initial_states {
        check_state(cell, h)?;
    }
    let candidates: Vec<Candidate> = initial_states
        .par_iter()
        .enumerate()
        .map(|(id, h0)| optimize_candidate(cell, h0, id, config))
        .collect::<Result<_>>()?;
    let accepted: Vec<FixedPoint> = candidates
        .iter()
        .filter(|c| c.status == CandidateStatus::Accepted)
        .map(|c| FixedPoint {
            h_star: c.h.clone(),
            q_value: c.q_value,
            n_iterations: c.n_iterations,
            initial_state_id: c.initial_state_id,
            theta: None,
        })
        .collect();
    if accepted.is_empty() && !candidates.is_empty() {
        warn!("no fixed points below q < {:e} among {} candidates", config.threshold, candidates.len());
    }
    Ok(FixedPointSearch { accepted, candidates })
}

/// Normalized velocities `‖h_{t+1} − h_t‖ / ‖h_t‖` of the zero-input
/// dynamics; a zero-norm state contributes the absolute step size instead.
pub fn simulate_autonomous(cell: &CellParameters, h0: &[f64], n_steps: usize) -> Result<Vec<f64>> {
    check_state(cell, h0)?;
    if n_steps == 0 {
        return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
    }
    let x = vec![0.0; cell.input_size()];
    let mut h = h0.to_vec();
    let mut out = Vec::with_capacity(n_steps);
    for _ in 0..n_steps {
        let next = cell.forward(&h, &x).0;
        let step = norm2(&sub(&next, &h));
        let scale = norm2(&h);
        out.push(if scale > 0.0 { step / scale } else { step });
        h = next;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cells::Architecture;
    use crate::numerics::{solve_least_squares, Matrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Linear cell `h' = W h + b` with `W = ρ·(random orthogonal-ish)` scaled to spectral radius below 1.
    fn linear_cell(n: usize, w: Matrix, b: Vec<f64>) -> CellParameters {
        CellParameters::from_tensors(
            Architecture::Linear,
            n,
            2,
            vec![w, Matrix::zeros(n, 2), Matrix::from_vec(n, 1, b).unwrap()],
        )
        .unwrap()
    }

    fn contracting(n: usize, seed: u64) -> CellParameters {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0) * 0.5 / (n as f64).sqrt());
        let b = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        linear_cell(n, w, b)
    }

    fn algebraic_fixed_point(cell: &CellParameters) -> Vec<f64> {
        let n = cell.hidden_size();
        let a = Matrix::identity(n).sub(&cell.tensors()[0]).unwrap();
        solve_least_squares(&a, cell.tensors()[2].as_slice(), 0.0).unwrap().solution
    }

    #[test]
    fn exact_linear_fixed_point_has_zero_q() {
        let cell = linear_cell(2, Matrix::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.25]]).unwrap(), vec![1.0, 3.0]);
        // (I − W) h = b  ⇒  h = (2, 4)
        assert!(q_loss(&cell, &[2.0, 4.0]).unwrap() < 1e-20);
        let cell = contracting(6, 1);
        assert!(q_loss(&cell, &algebraic_fixed_point(&cell)).unwrap() < 1e-20);
    }

    #[test]
    fn zero_vanilla_origin() {
        let cell = CellParameters::zeros(Architecture::Vanilla, 4, 3);
        assert_eq!(q_loss(&cell, &[0.0; 4]).unwrap(), 0.0);
    }

    #[test]
    fn q_matches_direct_recomputation_and_gradient_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for arch in Architecture::ALL {
            let cell = CellParameters::init(arch, 5, 3, &mut rng);
            let h: Vec<f64> = (0..cell.state_size()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let f = cell.step(&h, &[0.0; 3]).unwrap();
            let direct = h.iter().zip(&f).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / h.len() as f64;
            let (q, g) = q_loss_and_gradient(&cell, &h).unwrap();
            assert!((q - direct).abs() <= 1e-14, "{arch}");
            for j in 0..h.len() {
                let mut p = h.clone();
                let mut m = h.clone();
                p[j] += 1e-6;
                m[j] -= 1e-6;
                let fd = (q_loss(&cell, &p).unwrap() - q_loss(&cell, &m).unwrap()) / 2e-6;
                assert!((fd - g[j]).abs() < 1e-8, "{arch} coord {j}: {fd} vs {}", g[j]);
            }
        }
        assert!(q_loss(&CellParameters::zeros(Architecture::Gru, 3, 2), &[0.0; 4]).is_err());
    }

    #[test]
    fn contracting_linear_cell_has_one_attractor() {
        let cell = contracting(6, 3);
        let star = algebraic_fixed_point(&cell);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let starts: Vec<Vec<f64>> = (0..12).map(|_| (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let res = find_fixed_points(&cell, &starts, &FixedPointConfig::default()).unwrap();
        assert_eq!(res.accepted.len(), 12);
        for fp in &res.accepted {
            assert!(norm2(&sub(&fp.h_star, &star)) < 1e-4);
            assert_eq!(fp.q_value, q_loss(&cell, &fp.h_star).unwrap());
        }
        for (i, fp) in res.accepted.iter().enumerate() {
            assert_eq!(fp.initial_state_id, i);
        }
    }

    #[test]
    fn zero_threshold_accepts_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cell = CellParameters::init(Architecture::Gru, 6, 3, &mut rng);
        let starts: Vec<Vec<f64>> = (0..4).map(|_| (0..6).map(|_| rng.gen_range(-0.5..0.5)).collect()).collect();
        let cfg = FixedPointConfig {
            threshold: 0.0,
            max_iterations: 300,
            ..FixedPointConfig::default()
        };
        let res = find_fixed_points(&cell, &starts, &cfg).unwrap();
        assert!(res.accepted.is_empty());
        assert_eq!(res.rejected().count(), 4);
    }

    #[test]
    fn deterministic_and_monotone_in_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cell = CellParameters::init(Architecture::Gru, 8, 3, &mut rng);
        let starts: Vec<Vec<f64>> = (0..10).map(|_| (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let base = FixedPointConfig {
            max_iterations: 2000,
            ..FixedPointConfig::default()
        };
        let a = find_fixed_points(&cell, &starts, &base).unwrap();
        assert_eq!(a, find_fixed_points(&cell, &starts, &base).unwrap());
        let mut previous: Option<Vec<usize>> = None;
        for t in [1e-4, 1e-6, 1e-8, 1e-10, 1e-12] {
            let res = find_fixed_points(&cell, &starts, &FixedPointConfig { threshold: t, ..base.clone() }).unwrap();
            let ids: Vec<usize> = res.accepted.iter().map(|f| f.initial_state_id).collect();
            if let Some(prev) = &previous {
                assert!(ids.iter().all(|i| prev.contains(i)), "{t}: {ids:?} ⊄ {prev:?}");
            }
            previous = Some(ids);
        }
    }

    #[test]
    fn velocity_at_fixed_point_vanishes() {
        let cell = contracting(5, 7);
        let star = algebraic_fixed_point(&cell);
        assert!(simulate_autonomous(&cell, &star, 20).unwrap().iter().all(|&v| v < 1e-6));
        assert!(simulate_autonomous(&cell, &star, 0).is_err());
        let zero = CellParameters::zeros(Architecture::Linear, 2, 2);
        assert_eq!(simulate_autonomous(&zero, &[0.0, 0.0], 3).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn linear_velocity_decays_at_spectral_radius() {
        // W = ρR with R a rotation: every step contracts the displacement by exactly ρ
        let rho: f64 = 0.8;
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let w = Matrix::from_rows(&[vec![rho * c, -rho * s], vec![rho * s, rho * c]]).unwrap();
        let cell = linear_cell(2, w, vec![1.0, -0.5]);
        let star = algebraic_fixed_point(&cell);
        let h0 = vec![star[0] + 0.3, star[1] - 0.2];
        let v = simulate_autonomous(&cell, &h0, 12).unwrap();
        // closed form: h_t = h* + (ρR)^t (h0 − h*)
        let mut d = sub(&h0, &star);
        let mut h = h0.clone();
        for (t, &vt) in v.iter().enumerate() {
            let nd = cell.tensors()[0].matvec(&d);
            let expected = norm2(&sub(&nd, &d)) / norm2(&h);
            assert!((vt - expected).abs() <= 1e-12 * expected.max(1e-300), "step {t}");
            d = nd;
            h = star.iter().zip(&d).map(|(a, b)| a + b).collect();
        }
        for t in 5..11 {
            let ratio = v[t + 1] / v[t];
            assert!((ratio - rho).abs() <= 0.05 * rho, "step {t}: ratio {ratio}");
        }
    }
}
