use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::data::Document;
use crate::cells::{Architecture, CellParameters, StepCache};
use crate::error::{Error, Result};
use crate::numerics::{dot, Matrix};

/// Embedding table, recurrent cell and linear readout. The readout has one
/// weight per state coordinate; for LSTM the cell-state half is held at zero
/// so that only the output half `h` is read.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub embedding: Matrix,
    pub cell: CellParameters,
    pub readout: Vec<f64>,
    pub readout_bias: f64,
}

impl ClassifierModel {
    pub fn init<R: Rng>(architecture: Architecture, vocab_size: usize, hidden: usize, embed: usize, rng: &mut R) -> Self {
        let embedding = Matrix::from_fn(vocab_size, embed, |_, _| rng.gen_range(-0.1..0.1));
        let cell = CellParameters::init(architecture, hidden, embed, rng);
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut readout = vec![0.0; cell.state_size()];
        for i in cell.output_range() {
            readout[i] = rng.gen_range(-bound..bound);
        }
        Self {
            embedding,
            cell,
            readout,
            readout_bias: 0.0,
        }
    }

    /// Checks that the parts fit together and are finite.
    pub fn validate(&self) -> Result<()> {
        if self.embedding.cols() != self.cell.input_size() {
            return Err(Error::Dimension(format!(
                "embedding width {} differs from cell input size {}",
                self.embedding.cols(),
                self.cell.input_size()
            )));
        }
        if self.readout.len() != self.cell.state_size() {
            return Err(Error::Dimension(format!(
                "readout has length {}, state size is {}",
                self.readout.len(),
                self.cell.state_size()
            )));
        }
        let out = self.cell.output_range();
        if self.readout.iter().enumerate().any(|(i, &v)| !out.contains(&i) && v != 0.0) {
            return Err(Error::InvalidArgument("readout weights outside the output half must be zero".into()));
        }
        if !self.embedding.is_finite() || !self.readout.iter().all(|v| v.is_finite()) || !self.readout_bias.is_finite() {
            return Err(Error::NonFinite("classifier parameters".into()));
        }
        Ok(())
    }

    pub fn architecture(&self) -> Architecture {
        self.cell.architecture()
    }

    pub fn state_size(&self) -> usize {
        self.cell.state_size()
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.rows()
    }

    pub fn embed(&self, token: usize) -> &[f64] {
        self.embedding.row(token)
    }

    /// Mean embedding over the given token ids (all rows when `tokens` is `None`).
    pub fn mean_embedding(&self, tokens: Option<&[usize]>) -> Vec<f64> {
        let mut m = vec![0.0; self.embedding.cols()];
        let rows: Vec<usize> = match tokens {
            Some(t) => t.to_vec(),
            None => (0..self.vocab_size()).collect(),
        };
        for &r in &rows {
            crate::numerics::axpy(1.0, self.embedding.row(r), &mut m);
        }
        let k = rows.len().max(1) as f64;
        m.iter_mut().for_each(|v| *v /= k);
        m
    }

    pub fn initial_state(&self) -> Vec<f64> {
        vec![0.0; self.state_size()]
    }

    fn check_tokens(&self, tokens: &[usize]) -> Result<()> {
        if let Some(&t) = tokens.iter().find(|&&t| t >= self.vocab_size()) {
            return Err(Error::InvalidArgument(format!(
                "token {t} outside vocabulary of {}",
                self.vocab_size()
            )));
        }
        Ok(())
    }

    /// Final state after reading `tokens` from the zero state.
    pub fn run(&self, tokens: &[usize]) -> Result<Vec<f64>> {
        self.check_tokens(tokens)?;
        let mut h = self.initial_state();
        for &t in tokens {
            h = self.cell.forward(&h, self.embed(t)).0;
        }
        Ok(h)
    }

    /// Every visited state, starting with the initial one (`len + 1` states).
    pub fn trajectory(&self, tokens: &[usize]) -> Result<Vec<Vec<f64>>> {
        self.check_tokens(tokens)?;
        let mut states = Vec::with_capacity(tokens.len() + 1);
        states.push(self.initial_state());
        for &t in tokens {
            let next = self.cell.forward(states.last().unwrap(), self.embed(t)).0;
            states.push(next);
        }
        Ok(states)
    }

    pub fn logit_of_state(&self, h: &[f64]) -> f64 {
        dot(&self.readout, h) + self.readout_bias
    }

    pub fn logit(&self, tokens: &[usize]) -> Result<f64> {
        Ok(self.logit_of_state(&self.run(tokens)?))
    }

    /// Class 1 when the logit is non-negative.
    pub fn predict(&self, tokens: &[usize]) -> Result<u8> {
        Ok(u8::from(self.logit(tokens)? >= 0.0))
    }

    /// Forward pass keeping per-step caches for backpropagation.
    pub(crate) fn forward_cached(&self, tokens: &[usize]) -> (Vec<f64>, Vec<StepCache>) {
        let mut h = self.initial_state();
        let mut caches = Vec::with_capacity(tokens.len());
        for &t in tokens {
            let (next, cache) = self.cell.forward(&h, self.embed(t));
            caches.push(cache);
            h = next;
        }
        (h, caches)
    }
}

/// Fraction of documents classified correctly; 0 for an empty split.
pub fn evaluate_accuracy(model: &ClassifierModel, docs: &[Document]) -> Result<f64> {
    if docs.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for d in docs {
        if model.predict(&d.tokens)? == d.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / docs.len() as f64)
}

/// Draws `n_samples` of the states visited while reading `docs` (the initial
/// zero state excluded), uniformly without replacement.
pub fn sample_hidden_states(model: &ClassifierModel, docs: &[Document], n_samples: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if docs.is_empty() {
        return Err(Error::InsufficientData("no documents to sample states from".into()));
    }
    let total: usize = docs.iter().map(|d| d.tokens.len()).sum();
    if n_samples > total {
        return Err(Error::InsufficientData(format!(
            "requested {n_samples} states but only {total} were visited"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = rand::seq::index::sample(&mut rng, total, n_samples).into_vec();
    picks.sort_unstable();
    let mut out = Vec::with_capacity(n_samples);
    let mut next = picks.iter().peekable();
    let mut offset = 0usize;
    for d in docs {
        if next.peek().is_none() {
            break;
        }
        if **next.peek().unwrap() >= offset + d.tokens.len() {
            offset += d.tokens.len();
            continue;
        }
        let states = model.trajectory(&d.tokens)?;
        while let Some(&&p) = next.peek() {
            if p >= offset + d.tokens.len() {
                break;
            }
            let s = &states[p - offset + 1];
            if !s.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite("visited hidden state".into()));
            }
            out.push(s.clone());
            next.next();
        }
        offset += d.tokens.len();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_model(arch: Architecture) -> ClassifierModel {
        ClassifierModel::init(arch, 12, 6, 4, &mut ChaCha8Rng::seed_from_u64(5))
    }

    fn docs() -> Vec<Document> {
        vec![
            Document { tokens: vec![2, 3, 4], label: 1 },
            Document { tokens: vec![5, 6], label: 0 },
            Document { tokens: vec![7, 8, 9, 10, 11], label: 1 },
        ]
    }

    #[test]
    fn zero_readout_predicts_class_one() {
        let mut m = small_model(Architecture::Gru);
        m.readout.iter_mut().for_each(|v| *v = 0.0);
        // two of three documents are positive
        assert!((evaluate_accuracy(&m, &docs()).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn analytic_accumulator_is_perfect() {
        // linear cell summing one coordinate of the embedding: +1 / −1 / 0 valence
        let mut cell = CellParameters::zeros(Architecture::Linear, 1, 1);
        cell.tensors_mut()[0][(0, 0)] = 1.0;
        cell.tensors_mut()[1][(0, 0)] = 1.0;
        let embedding = Matrix::from_vec(5, 1, vec![0.0, 0.0, 1.0, -1.0, 0.0]).unwrap();
        let m = ClassifierModel {
            embedding,
            cell,
            readout: vec![1.0],
            readout_bias: 0.0,
        };
        let d = |t: Vec<usize>, label| Document { tokens: t, label };
        let set = vec![d(vec![2, 4, 2, 3], 1), d(vec![3, 3, 4], 0), d(vec![4, 2], 1), d(vec![3], 0)];
        assert_eq!(evaluate_accuracy(&m, &set).unwrap(), 1.0);
        assert_eq!(m.run(&[2, 2, 3, 4]).unwrap(), vec![1.0]);
    }

    #[test]
    fn trajectory_ends_in_run() {
        for arch in Architecture::ALL {
            let m = small_model(arch);
            m.validate().unwrap();
            let traj = m.trajectory(&[2, 3, 4]).unwrap();
            assert_eq!(traj.len(), 4);
            assert_eq!(traj[3], m.run(&[2, 3, 4]).unwrap());
        }
        assert!(small_model(Architecture::Gru).run(&[99]).is_err());
    }

    #[test]
    fn lstm_readout_ignores_cell_state() {
        let m = small_model(Architecture::Lstm);
        assert!(m.readout[..6].iter().all(|&v| v == 0.0));
        assert!(m.readout[6..].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn sampling_everything_returns_every_state() {
        let m = small_model(Architecture::Vanilla);
        let all = sample_hidden_states(&m, &docs(), 10, 1).unwrap();
        let mut expected = Vec::new();
        for d in docs() {
            expected.extend(m.trajectory(&d.tokens).unwrap().into_iter().skip(1));
        }
        assert_eq!(all, expected);
        assert!(sample_hidden_states(&m, &docs(), 11, 1).is_err());
        assert_eq!(sample_hidden_states(&m, &docs(), 4, 7).unwrap(), sample_hidden_states(&m, &docs(), 4, 7).unwrap());
    }

    #[test]
    fn sampled_mean_matches_population_mean() {
        let m = small_model(Architecture::Gru);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let docs: Vec<Document> = (0..200)
            .map(|_| Document {
                tokens: (0..rng.gen_range(5..30)).map(|_| rng.gen_range(2..12)).collect(),
                label: 0,
            })
            .collect();
        let total: usize = docs.iter().map(|d| d.tokens.len()).sum();
        let population = sample_hidden_states(&m, &docs, total, 0).unwrap();
        let k = 500;
        let sample = sample_hidden_states(&m, &docs, k, 3).unwrap();
        for j in 0..m.state_size() {
            let mu = population.iter().map(|s| s[j]).sum::<f64>() / total as f64;
            let var = population.iter().map(|s| (s[j] - mu).powi(2)).sum::<f64>() / total as f64;
            let se = (var / k as f64).sqrt();
            let m_s = sample.iter().map(|s| s[j]).sum::<f64>() / k as f64;
            assert!((m_s - mu).abs() <= 3.0 * se, "dim {j}: {m_s} vs {mu} (se {se})");
        }
    }
}
