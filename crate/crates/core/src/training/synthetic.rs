//! Synthetic evidence-integration task: documents are i.i.d. token draws and
//! the label is the sign of the summed token valences.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::data::{split_by_fraction, Dataset, Document, LabeledText};
use super::vocab::Vocabulary;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    /// Valence of each synthetic token.
    pub valences: Vec<i32>,
    /// Sampling weight of each token; uniform when `None`.
    pub weights: Option<Vec<f64>>,
    /// Document length drawn uniformly from `min_len..=max_len`.
    pub min_len: usize,
    pub max_len: usize,
    pub n_docs: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    /// `n_pos` tokens of valence +1, `n_neg` of −1 and `n_neutral` of 0.
    pub fn balanced(n_pos: usize, n_neg: usize, n_neutral: usize, min_len: usize, max_len: usize, n_docs: usize, seed: u64) -> Self {
        let mut valences = vec![1; n_pos];
        valences.extend(std::iter::repeat(-1).take(n_neg));
        valences.extend(std::iter::repeat(0).take(n_neutral));
        Self {
            valences,
            weights: None,
            min_len,
            max_len,
            n_docs,
            seed,
        }
    }

    /// Token names: `pos<i>`, `neg<i>` or `neu<i>` by valence sign, `i` the token id.
    pub fn token_names(&self) -> Vec<String> {
        self.valences
            .iter()
            .enumerate()
            .map(|(i, &v)| match v.signum() {
                1 => format!("pos{i}"),
                -1 => format!("neg{i}"),
                _ => format!("neu{i}"),
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.valences.iter().filter(|&&v| v != 0).count() < 2 {
            return Err(Error::InvalidArgument(
                "synthetic task needs at least two tokens with nonzero valence".into(),
            ));
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(Error::InvalidArgument(format!(
                "document length range {}..={} is empty",
                self.min_len, self.max_len
            )));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.valences.len() {
                return Err(Error::Dimension("one weight per synthetic token required".into()));
            }
            if !self.valences.iter().zip(w).any(|(&v, &x)| v != 0 && x > 0.0) {
                return Err(Error::InvalidArgument("no valenced token has positive weight".into()));
            }
        }
        // a nonzero sum must be reachable, otherwise resampling never ends
        let has_pos = self.valences.iter().enumerate().any(|(i, &v)| v > 0 && self.weight(i) > 0.0);
        let has_neg = self.valences.iter().enumerate().any(|(i, &v)| v < 0 && self.weight(i) > 0.0);
        if !has_pos && !has_neg {
            return Err(Error::InvalidArgument("all sampled valences are zero".into()));
        }
        Ok(())
    }

    fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }
}

/// Documents as synthetic token ids with their labels. Documents whose valence
/// sum is zero are redrawn.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<(Vec<usize>, u8)>> {
    spec.validate()?;
    let weights: Vec<f64> = (0..spec.valences.len()).map(|i| spec.weight(i)).collect();
    let dist = WeightedIndex::new(&weights).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut docs = Vec::with_capacity(spec.n_docs);
    let mut attempts = 0usize;
    while docs.len() < spec.n_docs {
        attempts += 1;
        if attempts > 1000 * spec.n_docs.max(1) + 1000 {
            return Err(Error::InvalidArgument("synthetic configuration almost never yields a nonzero valence sum".into()));
        }
        let len = rng.gen_range(spec.min_len..=spec.max_len);
        let tokens: Vec<usize> = (0..len).map(|_| dist.sample(&mut rng)).collect();
        let sum: i64 = tokens.iter().map(|&t| i64::from(spec.valences[t])).sum();
        if sum == 0 {
            continue;
        }
        docs.push((tokens, u8::from(sum > 0)));
    }
    Ok(docs)
}

/// Renders synthetic documents in the labeled-text format.
pub fn synthetic_texts(spec: &SyntheticSpec) -> Result<Vec<LabeledText>> {
    let names = spec.token_names();
    Ok(generate_synthetic(spec)?
        .into_iter()
        .map(|(tokens, label)| LabeledText {
            label,
            text: tokens.iter().map(|&t| names[t].as_str()).collect::<Vec<_>>().join(" "),
        })
        .collect())
}

/// Generates a synthetic dataset directly in index space. Synthetic token `i`
/// has vocabulary index `i + 2`.
pub fn synthetic_dataset(spec: &SyntheticSpec, validation: f64, test: f64) -> Result<Dataset> {
    let vocab = Vocabulary::from_tokens(&spec.token_names())?;
    let docs: Vec<Document> = generate_synthetic(spec)?
        .into_iter()
        .map(|(tokens, label)| Document {
            tokens: tokens.into_iter().map(|t| t + 2).collect(),
            label,
        })
        .collect();
    let (train, validation, test) = split_by_fraction(&docs, validation, test, spec.seed ^ 0x5eed)?;
    Ok(Dataset {
        vocab,
        train,
        validation,
        test,
    })
}
