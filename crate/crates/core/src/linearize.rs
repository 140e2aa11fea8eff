//! First-order expansion of the dynamics around fixed points,
//!
//! `h_{t+1} ≈ h* + J_rec (h_t − h*) + J_inp x_t`,
//!
//! with `J_rec = ∂F/∂h`, `J_inp = ∂F/∂x` evaluated at `(h*, 0)`, and the
//! eigendecomposition `J_rec = R Λ L` that splits the linear response into modes.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::cells::CellParameters;
use crate::error::{Error, Result};
use crate::numerics::{dot, eig_general, eigenvalues, norm2, sub, EigenDecomposition, Matrix};
use crate::training::{ClassifierModel, Document, ValenceLexicon};

/// Eigenvalues with `|λ|` above this count as unstable in the census.
pub const UNSTABLE_MAGNITUDE: f64 = 1.05;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedSystem {
    /// Position of the fixed point in the list that was linearized.
    pub fixed_point: usize,
    pub h_star: Vec<f64>,
    pub j_rec: Matrix,
    pub j_inp: Matrix,
    /// Sorted by descending magnitude; available even when defective.
    pub eigenvalues: Vec<Complex64>,
    /// `None` when the eigenvector basis is numerically singular.
    pub eig: Option<EigenDecomposition>,
    /// `|1/ln|λ_a||`, aligned with `eigenvalues`.
    pub time_constants: Vec<f64>,
}

/// `τ = |1/ln|λ||`. `|λ| = 1` gives `∞` (no decay) and `λ = 0` gives 0
/// (forgotten after one step).
pub fn time_constant(lambda: Complex64) -> f64 {
    let m = lambda.norm();
    if m == 0.0 {
        0.0
    } else if m == 1.0 {
        f64::INFINITY
    } else {
        (1.0 / m.ln()).abs()
    }
}

/// Which computation produced a k-step effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KStepRoute {
    Eigen,
    /// Repeated multiplication, used for defective systems.
    DirectPowers,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputProjection {
    /// `Re(ℓ₁ᵀ J_inp x)`.
    pub value: f64,
    /// `|ℓ₁ᵀ J_inp x|`, the magnitude within the real 2-d invariant subspace
    /// when the leading eigenvalue belongs to a complex pair.
    pub pair_magnitude: Option<f64>,
}

impl LinearizedSystem {
    pub fn is_defective(&self) -> bool {
        self.eig.is_none()
    }

    pub fn state_size(&self) -> usize {
        self.h_star.len()
    }

    pub fn leading_is_complex(&self) -> bool {
        self.eigenvalues.first().is_some_and(|l| l.im != 0.0)
    }

    pub fn condition(&self) -> f64 {
        self.eig.as_ref().map_or(f64::INFINITY, |e| e.condition)
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.first().map_or(0.0, |l| l.norm())
    }

    pub fn unstable_count(&self) -> usize {
        self.eigenvalues.iter().filter(|l| l.norm() > UNSTABLE_MAGNITUDE).count()
    }

    fn decomposition(&self) -> Result<&EigenDecomposition> {
        self.eig.as_ref().ok_or(Error::IllConditioned { condition: f64::INFINITY })
    }

    /// Real part of the leading right eigenvector.
    pub fn leading_right(&self) -> Result<Vec<f64>> {
        Ok(self.decomposition()?.right_vector(0).iter().map(|z| z.re).collect())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.j_inp.cols() {
            return Err(Error::Dimension(format!(
                "input has length {}, system expects {}",
                x.len(),
                self.j_inp.cols()
            )));
        }
        Ok(())
    }

    /// `J_inp x`
    pub fn input_effect(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.j_inp.matvec(x))
    }

    /// `ℓ₁ᵀ J_inp x` under the readout-aligned sign convention.
    pub fn input_projection(&self, x: &[f64]) -> Result<InputProjection> {
        let eig = self.decomposition()?;
        let v = self.input_effect(x)?;
        let p: Complex64 = eig.left.row(0).iter().zip(&v).map(|(l, &vi)| l * vi).sum();
        Ok(InputProjection {
            value: p.re,
            pair_magnitude: self.leading_is_complex().then(|| p.norm()),
        })
    }

    /// `(J_rec)^k J_inp x`, through `Σ λ_a^k r_a ℓ_aᵀ J_inp x` when the
    /// eigenbasis is usable and by repeated multiplication otherwise.
    pub fn k_step_effect(&self, x: &[f64], k: u32) -> Result<(Vec<f64>, KStepRoute)> {
        let v = self.input_effect(x)?;
        match &self.eig {
            Some(eig) => {
                let n = v.len();
                let mut out = vec![Complex64::new(0.0, 0.0); n];
                for a in 0..n {
                    let c: Complex64 = eig.left.row(a).iter().zip(&v).map(|(l, &vi)| l * vi).sum();
                    let coef = eig.eigenvalues[a].powu(k) * c;
                    for (i, o) in out.iter_mut().enumerate() {
                        *o += coef * eig.right.get(i, a);
                    }
                }
                Ok((out.into_iter().map(|z| z.re).collect(), KStepRoute::Eigen))
            }
            None => Ok((direct_power(&self.j_rec, v, k), KStepRoute::DirectPowers)),
        }
    }

    /// `h* + J_rec (h − h*) + J_inp x`
    pub fn linearized_step(&self, h: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        if h.len() != self.state_size() {
            return Err(Error::Dimension(format!(
                "state has length {}, system expects {}",
                h.len(),
                self.state_size()
            )));
        }
        self.check_input(x)?;
        Ok(self.step_unchecked(h, x))
    }

    fn step_unchecked(&self, h: &[f64], x: &[f64]) -> Vec<f64> {
        let d = sub(h, &self.h_star);
        let mut out = self.j_rec.matvec(&d);
        for (o, (s, u)) in out.iter_mut().zip(self.h_star.iter().zip(self.j_inp.matvec(x))) {
            *o += s + u;
        }
        out
    }
}

/// `Aᵏ v` by repeated multiplication.
pub fn direct_power(a: &Matrix, mut v: Vec<f64>, k: u32) -> Vec<f64> {
    for _ in 0..k {
        v = a.matvec(&v);
    }
    v
}

/// Linearizes `cell` at `(h*, 0)`. The leading mode is sign-flipped, if
/// needed, so that `Re(r₁)ᵀ readout > 0`. An ill-conditioned eigenbasis marks
/// the system defective instead of failing.
pub fn linearize_at(cell: &CellParameters, readout: &[f64], h_star: &[f64], fixed_point: usize) -> Result<LinearizedSystem> {
    if readout.len() != cell.state_size() {
        return Err(Error::Dimension(format!(
            "readout has length {}, state size is {}",
            readout.len(),
            cell.state_size()
        )));
    }
    let x = vec![0.0; cell.input_size()];
    let (j_rec, j_inp) = cell.jacobians(h_star, &x)?;
    let (eigenvalues, eig) = match eig_general(&j_rec) {
        Ok(mut e) => {
            let r1: Vec<f64> = e.right_vector(0).iter().map(|z| z.re).collect();
            if dot(&r1, readout) < 0.0 {
                e.flip_mode(0);
            }
            (e.eigenvalues.clone(), Some(e))
        }
        Err(Error::IllConditioned { .. }) => (eigenvalues(&j_rec)?, None),
        Err(e) => return Err(e),
    };
    let time_constants = eigenvalues.iter().map(|&l| time_constant(l)).collect();
    Ok(LinearizedSystem {
        fixed_point,
        h_star: h_star.to_vec(),
        j_rec,
        j_inp,
        eigenvalues,
        eig,
        time_constants,
    })
}

/// Linearizes every fixed point (in parallel); output order follows input order.
pub fn linearize_all(cell: &CellParameters, readout: &[f64], fixed_points: &[Vec<f64>]) -> Result<Vec<LinearizedSystem>> {
    fixed_points
        .par_iter()
        .enumerate()
        .map(|(i, h)| linearize_at(cell, readout, h, i))
        .collect()
}

/// Input projections of one fixed point over the three valence word sets.
#[derive(Debug, Clone, PartialEq)]
pub struct InputProjectionSummary {
    pub fixed_point: usize,
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
    pub neutral: Vec<f64>,
    pub positive_mean: f64,
    pub negative_mean: f64,
    pub neutral_mean: f64,
    pub leading_complex: bool,
}

impl InputProjectionSummary {
    /// Positive words push along the slow mode one way, negative words the
    /// other, and neutral words least.
    pub fn is_sign_separated(&self) -> bool {
        self.positive_mean > 0.0
            && self.negative_mean < 0.0
            && self.neutral_mean.abs() < self.positive_mean.abs().min(self.negative_mean.abs())
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

pub fn input_projection_summary(system: &LinearizedSystem, model: &ClassifierModel, lexicon: &ValenceLexicon) -> Result<InputProjectionSummary> {
    let project = |set: &[usize]| -> Result<Vec<f64>> {
        set.iter().map(|&t| system.input_projection(model.embed(t)).map(|p| p.value)).collect()
    };
    let positive = project(&lexicon.positive)?;
    let negative = project(&lexicon.negative)?;
    let neutral = project(&lexicon.neutral)?;
    Ok(InputProjectionSummary {
        fixed_point: system.fixed_point,
        positive_mean: mean(&positive),
        negative_mean: mean(&negative),
        neutral_mean: mean(&neutral),
        positive,
        negative,
        neutral,
        leading_complex: system.leading_is_complex(),
    })
}

/// Index of the system whose fixed point is nearest to `h` (Euclidean, first wins ties).
pub fn nearest_system(systems: &[LinearizedSystem], h: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in systems.iter().enumerate() {
        let d: f64 = s.h_star.iter().zip(h).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.map_or(true, |(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|b| b.0)
}

/// One step of the linearization-error study.
#[derive(Debug, Clone, PartialEq)]
pub struct StepError {
    pub document: usize,
    pub step: usize,
    pub system: usize,
    /// `‖h_nl − h_lin‖ / ‖h_nl‖`
    pub relative_error: f64,
}

/// Single-step errors along the true trajectories of `docs`: from each visited
/// state the nonlinear update is compared against the linearization at the
/// nearest fixed point. Stops after `max_steps` steps in total.
pub fn single_step_errors(model: &ClassifierModel, systems: &[LinearizedSystem], docs: &[Document], max_steps: usize) -> Result<Vec<StepError>> {
    if systems.is_empty() {
        return Err(Error::InsufficientData("no linearized systems".into()));
    }
    let mut out = Vec::new();
    'docs: for (di, d) in docs.iter().enumerate() {
        let states = model.trajectory(&d.tokens)?;
        for (t, &tok) in d.tokens.iter().enumerate() {
            if out.len() >= max_steps {
                break 'docs;
            }
            let h = &states[t];
            let k = nearest_system(systems, h).expect("non-empty");
            let lin = systems[k].step_unchecked(h, model.embed(tok));
            let nl = &states[t + 1];
            out.push(StepError {
                document: di,
                step: t,
                system: k,
                relative_error: relative_error(nl, &lin),
            });
        }
    }
    Ok(out)
}

fn relative_error(reference: &[f64], approx: &[f64]) -> f64 {
    let num = norm2(&sub(reference, approx));
    let den = norm2(reference);
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

/// Final state of a document run entirely through the piecewise-linear
/// dynamics (nearest fixed point at every step).
pub fn linearized_final_state(model: &ClassifierModel, systems: &[LinearizedSystem], tokens: &[usize]) -> Result<Vec<f64>> {
    if systems.is_empty() {
        return Err(Error::InsufficientData("no linearized systems".into()));
    }
    if let Some(&t) = tokens.iter().find(|&&t| t >= model.vocab_size()) {
        return Err(Error::InvalidArgument(format!("token {t} outside vocabulary")));
    }
    let mut h = model.initial_state();
    for &tok in tokens {
        let k = nearest_system(systems, &h).unwrap_or(0);
        h = systems[k].step_unchecked(&h, model.embed(tok));
    }
    Ok(h)
}

/// Relative error of each document's linearized final state against the true one.
pub fn multi_step_errors(model: &ClassifierModel, systems: &[LinearizedSystem], docs: &[Document]) -> Result<Vec<f64>> {
    docs.iter()
        .map(|d| Ok(relative_error(&model.run(&d.tokens)?, &linearized_final_state(model, systems, &d.tokens)?)))
        .collect()
}

/// Accuracy of the readout applied to linearized final states. A state that
/// blows up to non-finite values is classified as class 0.
pub fn linearized_trajectory_accuracy(model: &ClassifierModel, systems: &[LinearizedSystem], docs: &[Document]) -> Result<f64> {
    if docs.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for d in docs {
        let h = linearized_final_state(model, systems, &d.tokens)?;
        let pred = u8::from(model.logit_of_state(&h) >= 0.0);
        if pred == d.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / docs.len() as f64)
}

/// Norm of the mean embedding vector: how far the average input sits from
/// the expansion point `x* = 0`.
pub fn embedding_center_diagnostic(model: &ClassifierModel) -> f64 {
    norm2(&model.mean_embedding(None))
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cells::Architecture;
    use crate::training::{evaluate_accuracy, Vocabulary};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> Matrix {
        Matrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0) * scale)
    }

    fn linear_cell(w: Matrix, u: Matrix, b: Vec<f64>) -> CellParameters {
        let (n, e) = (w.rows(), u.cols());
        CellParameters::from_tensors(Architecture::Linear, n, e, vec![w, u, Matrix::from_vec(n, 1, b).unwrap()]).unwrap()
    }

    /// Solves `(I − W) h = b`.
    fn linear_fixed_point(cell: &CellParameters) -> Vec<f64> {
        let n = cell.hidden_size();
        let a = Matrix::identity(n).sub(&cell.tensors()[0]).unwrap();
        crate::numerics::solve_least_squares(&a, cell.tensors()[2].as_slice(), 0.0).unwrap().solution
    }

    fn random_linear(seed: u64, n: usize, e: usize) -> CellParameters {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = rand_matrix(&mut rng, n, n, 0.9 / (n as f64).sqrt());
        let u = rand_matrix(&mut rng, n, e, 1.0);
        let b = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
        linear_cell(w, u, b)
    }

    #[test]
    fn time_constant_values() {
        assert!((time_constant(Complex64::new((-1.0f64).exp(), 0.0)) - 1.0).abs() < 1e-15);
        assert!((time_constant(Complex64::new(0.999, 0.0)) - 999.4999166249727).abs() < 1e-9);
        assert_eq!(time_constant(Complex64::new(0.0, 1.0)), f64::INFINITY);
        assert_eq!(time_constant(Complex64::new(0.0, 0.0)), 0.0);
        // monotone decreasing in distance from the unit circle on each side
        let inside: Vec<f64> = [0.1, 0.5, 0.9, 0.99].iter().map(|&m| time_constant(Complex64::new(m, 0.0))).collect();
        assert!(inside.windows(2).all(|w| w[0] < w[1]));
        let outside: Vec<f64> = [1.01, 1.1, 2.0, 10.0].iter().map(|&m| time_constant(Complex64::new(m, 0.0))).collect();
        assert!(outside.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn step_doubling_matches_exponential_decay() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let mag: f64 = rng.gen_range(0.05..3.0);
            if (mag - 1.0).abs() < 1e-3 {
                continue;
            }
            let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let lambda = Complex64::from_polar(mag, phase);
            let tau = time_constant(lambda);
            let sign = if mag < 1.0 { -1.0 } else { 1.0 };
            let t = rng.gen_range(1..40) as i32;
            // |h(2t)| / |h(t)| for h(t) = λᵗ h(0), compared in log space
            let ratio = lambda.powi(2 * t).norm().ln() - lambda.powi(t).norm().ln();
            let expected = sign * f64::from(t) / tau;
            assert!((ratio - expected).abs() <= 1e-10 * expected.abs().max(1.0), "λ={lambda} t={t}");
        }
    }

    #[test]
    fn linear_cell_linearizes_to_itself() {
        let cell = random_linear(2, 6, 3);
        let w = cell.tensors()[0].clone();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let readout: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let star = linear_fixed_point(&cell);
        let mut spectra = Vec::new();
        for k in 0..3 {
            let h: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let ls = linearize_at(&cell, &readout, &h, k).unwrap();
            assert_eq!(ls.j_rec, w);
            spectra.push(ls.eigenvalues.clone());
        }
        assert!(spectra.windows(2).all(|s| s[0] == s[1]));
        {
            let ls = linearize_at(&cell, &readout, &star, 0).unwrap();
            assert_eq!(ls.j_rec, w);
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            assert_eq!(ls.input_effect(&x).unwrap(), cell.tensors()[1].matvec(&x));
            let hh: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let nl = cell.step(&hh, &x).unwrap();
            let lin = ls.linearized_step(&hh, &x).unwrap();
            assert!(norm2(&sub(&nl, &lin)) < 1e-12);
            assert!(dot(&ls.leading_right().unwrap(), &readout) > 0.0);
        }
    }

    #[test]
    fn input_maps_are_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cell = CellParameters::init(Architecture::Gru, 6, 3, &mut rng);
        let ls = linearize_at(&cell, &[1.0; 6], &[0.1; 6], 0).unwrap();
        let x1: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x2: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sum: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a + b).collect();
        let e = ls.input_effect(&sum).unwrap();
        let e12: Vec<f64> = ls.input_effect(&x1).unwrap().iter().zip(ls.input_effect(&x2).unwrap()).map(|(a, b)| a + b).collect();
        assert!(norm2(&sub(&e, &e12)) < 1e-12);
        assert!(ls.input_effect(&[0.0; 3]).unwrap().iter().all(|&v| v == 0.0));
        assert_eq!(ls.input_projection(&[0.0; 3]).unwrap().value, 0.0);
        let p1 = ls.input_projection(&x1).unwrap().value;
        let twice: Vec<f64> = x1.iter().map(|v| 2.0 * v).collect();
        assert!((ls.input_projection(&twice).unwrap().value - 2.0 * p1).abs() < 1e-12);
        assert!(ls.input_effect(&[0.0; 2]).is_err());
    }

    #[test]
    fn k_step_small_cases() {
        let cell = linear_cell(Matrix::from_diagonal(&[0.5, 0.5]), Matrix::identity(2), vec![0.0, 0.0]);
        let ls = linearize_at(&cell, &[1.0, 0.0], &[0.0, 0.0], 0).unwrap();
        assert_eq!(ls.k_step_effect(&[1.0, 0.0], 0).unwrap().0, vec![1.0, 0.0]);
        let (v, route) = ls.k_step_effect(&[1.0, 0.0], 2).unwrap();
        assert_eq!(route, KStepRoute::Eigen);
        assert!((v[0] - 0.25).abs() < 1e-15 && v[1].abs() < 1e-15);
    }

    #[test]
    fn k_step_eigen_route_matches_direct_powers() {
        for seed in 0..20 {
            let cell = random_linear(100 + seed, 10, 4);
            let ls = linearize_at(&cell, &[1.0; 10], &[0.0; 10], 0).unwrap();
            let x = [0.3, -1.0, 0.5, 0.2];
            for k in [1, 7, 50, 200] {
                let (eig, _) = ls.k_step_effect(&x, k).unwrap();
                let direct = direct_power(&ls.j_rec, ls.input_effect(&x).unwrap(), k);
                let scale = norm2(&direct).max(1e-300);
                assert!(norm2(&sub(&eig, &direct)) <= 1e-6 * scale, "seed {seed} k {k}");
            }
        }
    }

    #[test]
    fn defective_system_falls_back_to_powers() {
        let cell = linear_cell(Matrix::from_rows(&[vec![0.9, 1.0], vec![0.0, 0.9]]).unwrap(), Matrix::identity(2), vec![0.0, 0.0]);
        let ls = linearize_at(&cell, &[1.0, 1.0], &[0.0, 0.0], 0).unwrap();
        assert!(ls.is_defective());
        assert!((ls.spectral_radius() - 0.9).abs() < 1e-6);
        assert!(ls.input_projection(&[1.0, 0.0]).is_err());
        let (v, route) = ls.k_step_effect(&[0.0, 1.0], 3).unwrap();
        assert_eq!(route, KStepRoute::DirectPowers);
        // [[a,1],[0,a]]³ e₂ = (3a², a³)
        assert!((v[0] - 3.0 * 0.81).abs() < 1e-12 && (v[1] - 0.729).abs() < 1e-12);
    }

    #[test]
    fn complex_leading_pair_is_flagged() {
        let (c, s) = (0.95 * 0.4f64.cos(), 0.95 * 0.4f64.sin());
        let cell = linear_cell(Matrix::from_rows(&[vec![c, -s], vec![s, c]]).unwrap(), Matrix::identity(2), vec![0.0, 0.0]);
        let ls = linearize_at(&cell, &[1.0, 0.0], &[0.0, 0.0], 0).unwrap();
        assert!(ls.leading_is_complex());
        let p = ls.input_projection(&[1.0, 0.0]).unwrap();
        assert!(p.pair_magnitude.unwrap() >= p.value.abs());
    }

    #[test]
    fn fixed_point_is_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cell = CellParameters::init(Architecture::Lstm, 4, 3, &mut rng);
        let h: Vec<f64> = (0..8).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let ls = linearize_at(&cell, &[0.0; 8], &h, 0).unwrap();
        assert_eq!(ls.linearized_step(&h, &[0.0; 3]).unwrap(), h);
    }

    fn linear_model() -> ClassifierModel {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cell = random_linear(10, 4, 2);
        ClassifierModel {
            embedding: rand_matrix(&mut rng, 8, 2, 1.0),
            cell,
            readout: (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            readout_bias: 0.1,
        }
    }

    #[test]
    fn linear_model_trajectory_accuracy_is_unchanged() {
        let model = linear_model();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let docs: Vec<Document> = (0..40)
            .map(|_| Document {
                tokens: (0..rng.gen_range(3..15)).map(|_| rng.gen_range(0..8)).collect(),
                label: rng.gen_range(0..2),
            })
            .collect();
        // a linear cell has one fixed point; repeat it so nearest-point selection is exercised
        let hs = vec![linear_fixed_point(&model.cell); 3];
        let systems = linearize_all(&model.cell, &model.readout, &hs).unwrap();
        assert_eq!(
            linearized_trajectory_accuracy(&model, &systems, &docs).unwrap(),
            evaluate_accuracy(&model, &docs).unwrap()
        );
        let errs = single_step_errors(&model, &systems, &docs, 50).unwrap();
        assert_eq!(errs.len(), 50);
        assert!(errs.iter().all(|e| e.relative_error < 1e-12));
        assert!(multi_step_errors(&model, &systems, &docs).unwrap().iter().all(|&e| e < 1e-10));
    }

    #[test]
    fn nearest_and_median() {
        let model = linear_model();
        let hs = vec![vec![0.0; 4], vec![1.0; 4], vec![1.0; 4]];
        let systems = linearize_all(&model.cell, &model.readout, &hs).unwrap();
        assert_eq!(nearest_system(&systems, &[0.9; 4]), Some(1));
        assert_eq!(nearest_system(&systems, &[0.1; 4]), Some(0));
        assert_eq!(nearest_system(&[], &[0.1; 4]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn embedding_center() {
        let mut model = linear_model();
        model.embedding = Matrix::zeros(8, 2);
        assert_eq!(embedding_center_diagnostic(&model), 0.0);
        // rows ±d around (3, 4): mean is exactly (3, 4)
        model.embedding = Matrix::from_fn(8, 2, |i, j| [3.0, 4.0][j] + if i % 2 == 0 { 0.5 } else { -0.5 });
        assert!((embedding_center_diagnostic(&model) - 5.0).abs() < 1e-14);
    }

    #[test]
    fn projection_summary_means() {
        let model = linear_model();
        let vocab = Vocabulary::from_tokens(&["a", "b", "c", "d", "e", "f"]).unwrap();
        let coefs = [0.0, 0.0, 2.0, 1.0, -1.0, -2.0, 0.01, -0.02];
        let lex = ValenceLexicon::from_coefficients(&vocab, &coefs, 2).unwrap();
        let ls = linearize_at(&model.cell, &model.readout, &[0.0; 4], 0).unwrap();
        let s = input_projection_summary(&ls, &model, &lex).unwrap();
        assert_eq!(s.positive.len(), 2);
        assert!((s.positive_mean - s.positive.iter().sum::<f64>() / 2.0).abs() <= 1e-12);
        assert!((s.neutral_mean - s.neutral.iter().sum::<f64>() / 2.0).abs() <= 1e-12);
    }
}
