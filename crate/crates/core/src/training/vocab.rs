use std::collections::HashMap;

use crate::error::{Error, Result};

pub const OOV: usize = 0;
pub const PAD: usize = 1;
pub const OOV_TOKEN: &str = "<oov>";
pub const PAD_TOKEN: &str = "<pad>";

/// Lowercases and splits on whitespace; ASCII punctuation characters become
/// tokens of their own.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars().flat_map(char::to_lowercase) {
        if ch.is_whitespace() {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
        } else if ch.is_ascii_punctuation() {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            tokens.push(ch.to_string());
        } else {
            current.push(ch);
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Token ↔ index map. Index 0 is the out-of-vocabulary token and index 1 the
/// padding token; corpus tokens follow in order of decreasing frequency, ties
/// broken lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<usize>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary keeping the `max_size` most frequent corpus tokens
    /// (the two reserved tokens are not counted against `max_size`).
    pub fn build<S: AsRef<str>>(corpus: &[S], max_size: usize) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::InsufficientData("cannot build a vocabulary from an empty corpus".into()));
        }
        let mut freq: HashMap<String, usize> = HashMap::new();
        for doc in corpus {
            for tok in tokenize(doc.as_ref()) {
                *freq.entry(tok).or_default() += 1;
            }
        }
        let mut entries: Vec<(String, usize)> = freq.into_iter().collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        entries.truncate(max_size);
        Ok(Self::from_entries(entries))
    }

    /// Vocabulary with the given tokens in order (after the reserved two).
    pub fn from_tokens<S: AsRef<str>>(tokens: &[S]) -> Result<Self> {
        let entries: Vec<(String, usize)> = tokens.iter().map(|t| (t.as_ref().to_string(), 0)).collect();
        let v = Self::from_entries(entries);
        if v.index.len() != v.tokens.len() {
            return Err(Error::InvalidArgument("duplicate tokens in vocabulary".into()));
        }
        Ok(v)
    }

    fn from_entries(entries: Vec<(String, usize)>) -> Self {
        let mut tokens = vec![OOV_TOKEN.to_string(), PAD_TOKEN.to_string()];
        let mut counts = vec![0, 0];
        for (t, c) in entries {
            tokens.push(t);
            counts.push(c);
        }
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, counts, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(OOV)
    }

    pub fn token(&self, idx: usize) -> &str {
        &self.tokens[idx]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Corpus frequency recorded when the vocabulary was built (0 for reserved tokens).
    pub fn count(&self, idx: usize) -> usize {
        self.counts[idx]
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        tokenize(text).iter().map(|t| self.index_of(t)).collect()
    }

    pub fn is_reserved(idx: usize) -> bool {
        idx == OOV || idx == PAD
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_splits_punctuation() {
        assert_eq!(tokenize("Good good BAD."), vec!["good", "good", "bad", "."]);
        assert_eq!(tokenize("  it's\tfine!! "), vec!["it", "'", "s", "fine", "!", "!"]);
    }

    #[test]
    fn small_corpus() {
        let v = Vocabulary::build(&["Good good BAD."], 10).unwrap();
        assert_eq!(v.len(), 5);
        assert_eq!(v.token(0), OOV_TOKEN);
        assert_eq!(v.token(1), PAD_TOKEN);
        assert_eq!(v.token(2), "good");
        assert_eq!(v.count(2), 2);
        let mut rest = vec![v.token(3), v.token(4)];
        rest.sort();
        assert_eq!(rest, vec![".", "bad"]);
        assert_eq!(v.index_of("terrible"), OOV);
        assert_eq!(v.encode("good movie"), vec![2, OOV]);
    }

    #[test]
    fn truncation_and_determinism() {
        let corpus = ["b a c a", "c d a", "e"];
        let v = Vocabulary::build(&corpus, 2).unwrap();
        assert_eq!(v.tokens()[2..], ["a".to_string(), "c".to_string()]);
        assert_eq!(v, Vocabulary::build(&corpus, 2).unwrap());
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let empty: [&str; 0] = [];
        assert!(Vocabulary::build(&empty, 5).is_err());
    }
}
