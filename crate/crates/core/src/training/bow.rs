//! Bag-of-words logistic regression and the valence lexicon built from its
//! coefficients.

use std::collections::VecDeque;

use super::data::{Dataset, Document};
use super::vocab::Vocabulary;
use crate::error::{Error, Result};
use crate::numerics::{axpy, dot};

/// Sparse token-count features of one document.
fn counts(doc: &Document) -> Vec<(usize, f64)> {
    let mut toks = doc.tokens.clone();
    toks.sort_unstable();
    let mut out: Vec<(usize, f64)> = Vec::new();
    for t in toks {
        match out.last_mut() {
            Some((last, c)) if *last == t => *c += 1.0,
            _ => out.push((t, 1.0)),
        }
    }
    out
}

/// Logistic regression on token counts: `σ(wᵀc + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BowModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl BowModel {
    pub fn logit(&self, doc: &Document) -> f64 {
        self.bias + doc.tokens.iter().map(|&t| self.weights.get(t).copied().unwrap_or(0.0)).sum::<f64>()
    }

    pub fn accuracy(&self, docs: &[Document]) -> f64 {
        if docs.is_empty() {
            return 0.0;
        }
        let ok = docs.iter().filter(|d| u8::from(self.logit(d) >= 0.0) == d.label).count();
        ok as f64 / docs.len() as f64
    }
}

/// Regularized objective `mean BCE + (l2/2)‖w‖²` (bias unpenalized) over
/// precomputed count features. Parameters are `[w..., b]`.
pub struct BowObjective {
    features: Vec<Vec<(usize, f64)>>,
    labels: Vec<f64>,
    dim: usize,
    l2: f64,
}

impl BowObjective {
    pub fn new(docs: &[Document], vocab_size: usize, l2: f64) -> Result<Self> {
        if !(l2 > 0.0 && l2.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "l2 must be positive (got {l2}); unregularized coefficients diverge on separable data"
            )));
        }
        if docs.is_empty() {
            return Err(Error::InsufficientData("no training documents".into()));
        }
        if let Some(t) = docs.iter().flat_map(|d| d.tokens.iter()).find(|&&t| t >= vocab_size) {
            return Err(Error::InvalidArgument(format!("token {t} outside vocabulary of {vocab_size}")));
        }
        Ok(Self {
            features: docs.iter().map(counts).collect(),
            labels: docs.iter().map(|d| f64::from(d.label)).collect(),
            dim: vocab_size,
            l2,
        })
    }

    pub fn n_params(&self) -> usize {
        self.dim + 1
    }

    /// Objective value and gradient at `theta`.
    pub fn value_and_gradient(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let (w, b) = (&theta[..self.dim], theta[self.dim]);
        let n = self.features.len() as f64;
        let mut grad = vec![0.0; self.dim + 1];
        let mut loss = 0.0;
        for (f, &y) in self.features.iter().zip(&self.labels) {
            let z = b + f.iter().map(|&(j, c)| w[j] * c).sum::<f64>();
            loss += if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() } - y * z;
            let r = (1.0 / (1.0 + (-z).exp()) - y) / n;
            for &(j, c) in f {
                grad[j] += r * c;
            }
            grad[self.dim] += r;
        }
        loss /= n;
        loss += 0.5 * self.l2 * dot(w, w);
        axpy(self.l2, w, &mut grad[..self.dim]);
        (loss, grad)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsReport {
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
}

/// Limited-memory BFGS with a backtracking Armijo line search. Stops once the
/// gradient 2-norm drops below `tol` or after `max_iter` iterations.
pub fn lbfgs<F: Fn(&[f64]) -> (f64, Vec<f64>)>(f: F, x0: Vec<f64>, tol: f64, max_iter: usize) -> (Vec<f64>, LbfgsReport) {
    const MEMORY: usize = 10;
    let mut x = x0;
    let (mut fx, mut g) = f(&x);
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    while iterations < max_iter {
        let gnorm = dot(&g, &g).sqrt();
        if gnorm < tol {
            break;
        }
        iterations += 1;
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &q);
            axpy(-a, y, &mut q);
            alphas.push(a);
        }
        if let Some((s, y, _)) = hist.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        } else {
            let s = 1.0 / gnorm.max(1.0);
            q.iter_mut().for_each(|v| *v *= s);
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            axpy(a - b, s, &mut q);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            hist.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }
        let mut step = 1.0;
        let (x_new, f_new, g_new) = loop {
            let cand: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            let (fc, gc) = f(&cand);
            if fc <= fx + 1e-4 * step * slope || step < 1e-20 {
                break (cand, fc, gc);
            }
            step *= 0.5;
        };
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if hist.len() == MEMORY {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        let stalled = f_new >= fx && step < 1e-20;
        x = x_new;
        fx = f_new;
        g = g_new;
        if stalled {
            break;
        }
    }
    let gradient_norm = dot(&g, &g).sqrt();
    (
        x,
        LbfgsReport {
            iterations,
            gradient_norm,
            converged: gradient_norm < tol,
        },
    )
}

/// Token coefficients split into valence sets. Reserved tokens never appear
/// in any set.
#[derive(Debug, Clone, PartialEq)]
pub struct ValenceLexicon {
    pub tokens: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Vocabulary indices, most positive coefficient first.
    pub positive: Vec<usize>,
    /// Most negative coefficient first.
    pub negative: Vec<usize>,
    /// Smallest |coefficient| first.
    pub neutral: Vec<usize>,
}

impl ValenceLexicon {
    /// `k` tokens per set: positive sets take only positive coefficients,
    /// negative only negative ones, neutral the smallest magnitudes among the
    /// rest. Ties are broken by vocabulary index.
    pub fn from_coefficients(vocab: &Vocabulary, coefficients: &[f64], k: usize) -> Result<Self> {
        if coefficients.len() != vocab.len() {
            return Err(Error::Dimension(format!(
                "{} coefficients for a vocabulary of {}",
                coefficients.len(),
                vocab.len()
            )));
        }
        let candidates: Vec<usize> = (0..vocab.len()).filter(|&i| !Vocabulary::is_reserved(i)).collect();
        let mut pos: Vec<usize> = candidates.iter().copied().filter(|&i| coefficients[i] > 0.0).collect();
        pos.sort_by(|&a, &b| coefficients[b].total_cmp(&coefficients[a]).then(a.cmp(&b)));
        pos.truncate(k);
        let mut neg: Vec<usize> = candidates.iter().copied().filter(|&i| coefficients[i] < 0.0).collect();
        neg.sort_by(|&a, &b| coefficients[a].total_cmp(&coefficients[b]).then(a.cmp(&b)));
        neg.truncate(k);
        let mut neu: Vec<usize> = candidates
            .iter()
            .copied()
            .filter(|i| !pos.contains(i) && !neg.contains(i))
            .collect();
        neu.sort_by(|&a, &b| coefficients[a].abs().total_cmp(&coefficients[b].abs()).then(a.cmp(&b)));
        neu.truncate(k);
        Ok(Self {
            tokens: vocab.tokens().to_vec(),
            coefficients: coefficients.to_vec(),
            positive: pos,
            negative: neg,
            neutral: neu,
        })
    }

    pub fn coefficient(&self, idx: usize) -> f64 {
        self.coefficients[idx]
    }

    pub fn words(&self, set: &[usize]) -> Vec<&str> {
        set.iter().map(|&i| self.tokens[i].as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BowResult {
    pub model: BowModel,
    pub lexicon: ValenceLexicon,
    pub train_accuracy: f64,
    pub validation_accuracy: f64,
    pub test_accuracy: f64,
    pub report: LbfgsReport,
}

pub const DEFAULT_L2: f64 = 1e-4;
pub const DEFAULT_LEXICON_SIZE: usize = 100;

/// Fits the baseline on the training split to gradient norm < 1e-6 (or
/// `max_iter` iterations) and derives the lexicon with `k` words per set.
pub fn train_bow_baseline(dataset: &Dataset, l2: f64, k: usize, max_iter: usize) -> Result<BowResult> {
    dataset.validate()?;
    let obj = BowObjective::new(&dataset.train, dataset.vocab.len(), l2)?;
    let (theta, report) = lbfgs(|t| obj.value_and_gradient(t), vec![0.0; obj.n_params()], 1e-6, max_iter);
    if !theta.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("bag-of-words coefficients".into()));
    }
    let n = dataset.vocab.len();
    let model = BowModel {
        weights: theta[..n].to_vec(),
        bias: theta[n],
    };
    let lexicon = ValenceLexicon::from_coefficients(&dataset.vocab, &model.weights, k)?;
    Ok(BowResult {
        train_accuracy: model.accuracy(&dataset.train),
        validation_accuracy: model.accuracy(&dataset.validation),
        test_accuracy: model.accuracy(&dataset.test),
        model,
        lexicon,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::synthetic::{synthetic_dataset, SyntheticSpec};

    fn doc(tokens: Vec<usize>, label: u8) -> Document {
        Document { tokens, label }
    }

    fn tiny() -> Dataset {
        let vocab = Vocabulary::from_tokens(&["a", "b", "c"]).unwrap();
        // "a" only in positives, "b" only in negatives, "c" everywhere
        let train = vec![
            doc(vec![2, 4], 1),
            doc(vec![2, 2, 4], 1),
            doc(vec![3, 4], 0),
            doc(vec![3, 4, 4], 0),
            doc(vec![4, 2], 1),
        ];
        Dataset {
            vocab,
            validation: train.clone(),
            test: train.clone(),
            train,
        }
    }

    #[test]
    fn sign_is_forced_by_exclusive_token() {
        let r = train_bow_baseline(&tiny(), 1e-2, 1, 500).unwrap();
        assert!(r.report.converged, "{:?}", r.report);
        assert!(r.model.weights[2] > 0.0);
        assert!(r.model.weights[3] < 0.0);
        assert_eq!(r.lexicon.positive, vec![2]);
        assert_eq!(r.lexicon.negative, vec![3]);
        assert_eq!(r.lexicon.neutral, vec![4]);
        assert_eq!(r.test_accuracy, 1.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let ds = tiny();
        let obj = BowObjective::new(&ds.train, ds.vocab.len(), 0.3).unwrap();
        let theta = vec![0.1, -0.2, 0.5, -0.7, 0.05, 0.3];
        let (_, g) = obj.value_and_gradient(&theta);
        for j in 0..theta.len() {
            let mut p = theta.clone();
            let mut m = theta.clone();
            p[j] += 1e-6;
            m[j] -= 1e-6;
            let fd = (obj.value_and_gradient(&p).0 - obj.value_and_gradient(&m).0) / 2e-6;
            assert!((fd - g[j]).abs() < 1e-8, "coordinate {j}: {fd} vs {}", g[j]);
        }
    }

    #[test]
    fn matches_gradient_descent_oracle() {
        let ds = synthetic_dataset(&SyntheticSpec::balanced(3, 3, 6, 4, 12, 300, 8), 0.1, 0.1).unwrap();
        let l2 = 1e-2;
        let obj = BowObjective::new(&ds.train, ds.vocab.len(), l2).unwrap();
        let (theta, report) = lbfgs(|t| obj.value_and_gradient(t), vec![0.0; obj.n_params()], 1e-9, 2000);
        assert!(report.converged);
        // plain full-batch gradient descent, step below 1/L with
        // L ≤ max_doc_len²/4 + l2 (counts are bounded by document length)
        let step = 1.0 / (12.0f64 * 12.0 / 4.0 + l2 + 1.0);
        let mut gd = vec![0.0; obj.n_params()];
        for _ in 0..200_000 {
            let (_, g) = obj.value_and_gradient(&gd);
            if dot(&g, &g).sqrt() < 1e-10 {
                break;
            }
            axpy(-step, &g, &mut gd);
        }
        for (a, b) in theta.iter().zip(&gd) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn synthetic_lexicon_and_accuracy() {
        let spec = SyntheticSpec::balanced(20, 20, 160, 20, 80, 3000, 21);
        let ds = synthetic_dataset(&spec, 0.1, 0.1).unwrap();
        let r = train_bow_baseline(&ds, DEFAULT_L2, 20, 1000).unwrap();
        assert!(r.test_accuracy >= 0.99, "{}", r.test_accuracy);
        let mut pos: Vec<usize> = r.lexicon.positive.clone();
        pos.sort_unstable();
        let mut neg: Vec<usize> = r.lexicon.negative.clone();
        neg.sort_unstable();
        assert_eq!(pos, (2..22).collect::<Vec<_>>());
        assert_eq!(neg, (22..42).collect::<Vec<_>>());
        assert!(r.lexicon.neutral.iter().all(|&i| i >= 42));
    }

    #[test]
    fn rejects_zero_l2() {
        assert!(train_bow_baseline(&tiny(), 0.0, 1, 10).is_err());
    }

    #[test]
    fn lbfgs_on_rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            (v, g)
        };
        let (x, rep) = lbfgs(f, vec![-1.2, 1.0], 1e-8, 1000);
        assert!(rep.converged, "{rep:?}");
        assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] - 1.0).abs() < 1e-6);
    }
}
