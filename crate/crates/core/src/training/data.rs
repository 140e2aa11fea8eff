use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::vocab::Vocabulary;
use crate::error::{Error, Result};

/// A tokenized document with a binary label (0 negative, 1 positive).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub tokens: Vec<usize>,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledText {
    pub label: u8,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub vocab: Vocabulary,
    pub train: Vec<Document>,
    pub validation: Vec<Document>,
    pub test: Vec<Document>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Dataset {
    pub fn split(&self, which: Split) -> &[Document] {
        match which {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }

    /// Builds a dataset from raw splits; the vocabulary comes from the
    /// training texts only.
    pub fn from_texts(
        train: &[LabeledText],
        validation: &[LabeledText],
        test: &[LabeledText],
        max_vocab: usize,
    ) -> Result<Self> {
        let corpus: Vec<&str> = train.iter().map(|d| d.text.as_str()).collect();
        let vocab = Vocabulary::build(&corpus, max_vocab)?;
        let encode = |docs: &[LabeledText]| -> Vec<Document> {
            docs.iter()
                .map(|d| Document {
                    tokens: vocab.encode(&d.text),
                    label: d.label,
                })
                .filter(|d| !d.tokens.is_empty())
                .collect()
        };
        let (train, validation, test) = (encode(train), encode(validation), encode(test));
        Ok(Self {
            vocab,
            train,
            validation,
            test,
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (name, docs) in [("train", &self.train), ("validation", &self.validation), ("test", &self.test)] {
            if docs.is_empty() {
                return Err(Error::InsufficientData(format!("{name} split is empty")));
            }
            for d in docs.iter() {
                if d.tokens.is_empty() {
                    return Err(Error::InvalidArgument(format!("empty document in {name} split")));
                }
                if let Some(&t) = d.tokens.iter().find(|&&t| t >= self.vocab.len()) {
                    return Err(Error::InvalidArgument(format!(
                        "token index {t} outside vocabulary of {}",
                        self.vocab.len()
                    )));
                }
                if d.label > 1 {
                    return Err(Error::InvalidArgument(format!("label {} is not binary", d.label)));
                }
            }
        }
        Ok(())
    }
}

/// Reads `<label>\t<text>` lines. Blank lines are skipped.
pub fn read_labeled_text(path: &Path) -> Result<Vec<LabeledText>> {
    let content = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_labeled_text(&content, &path.display().to_string())
}

pub fn parse_labeled_text(content: &str, origin: &str) -> Result<Vec<LabeledText>> {
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: origin.to_string(),
            line: i + 1,
            message,
        };
        let (label, text) = line
            .split_once('\t')
            .ok_or_else(|| parse_err("expected '<label>\\t<text>'".into()))?;
        let label = match label.trim() {
            "0" => 0,
            "1" => 1,
            other => return Err(parse_err(format!("label must be 0 or 1, got '{other}'"))),
        };
        if text.trim().is_empty() {
            return Err(parse_err("empty document text".into()));
        }
        out.push(LabeledText {
            label,
            text: text.to_string(),
        });
    }
    Ok(out)
}

pub fn format_labeled_text(docs: &[LabeledText]) -> String {
    let mut s = String::new();
    for d in docs {
        s.push_str(&d.label.to_string());
        s.push('\t');
        s.push_str(&d.text);
        s.push('\n');
    }
    s
}

pub fn write_labeled_text(path: &Path, docs: &[LabeledText]) -> Result<()> {
    fs::write(path, format_labeled_text(docs)).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Shuffles deterministically and cuts into train/validation/test by fraction.
pub fn split_by_fraction<T: Clone>(items: &[T], validation: f64, test: f64, seed: u64) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    if !(0.0..1.0).contains(&validation) || !(0.0..1.0).contains(&test) || validation + test >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "split fractions validation={validation}, test={test} leave no training data"
        )));
    }
    let mut items = items.to_vec();
    items.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = items.len();
    let n_test = (n as f64 * test).round() as usize;
    let n_val = (n as f64 * validation).round() as usize;
    let test_part = items.split_off(n - n_test);
    let val_part = items.split_off(n - n_test - n_val);
    Ok((items, val_part, test_part))
}
