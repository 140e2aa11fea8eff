//! Pipeline configuration, read from TOML.
//!
//! Every field has a default, so an empty file is a valid configuration.
//! Unknown keys are rejected. Grammar (all sections optional):
//!
//! ```toml
//! seed = 7
//! output_dir = "runs/synthetic"
//!
//! [data]
//! source = "synthetic"          # or "files"
//! train = "data/train.tsv"      # files only: "<label>\t<text>" per line
//! validation = "data/dev.tsv"
//! test = "data/test.tsv"
//! max_vocab = 20000
//!
//! [data.synthetic]
//! positive = 20                 # tokens with valence +1
//! negative = 20                 # tokens with valence −1
//! neutral = 160
//! min_len = 20
//! max_len = 80
//! n_docs = 4000
//! validation_fraction = 0.1
//! test_fraction = 0.1
//!
//! [model]
//! architecture = "gru"          # vanilla | gru | lstm | ugrnn | linear
//! hidden_size = 64
//! embedding_size = 32
//!
//! [train]
//! epochs = 10
//! batch_size = 32
//! learning_rate = 1e-3
//! clip_norm = 5.0
//! max_len = 400
//!
//! [fixed_points]
//! n_initial = 512
//! threshold = 1e-8
//! learning_rate = 1e-2
//! decay_factor = 0.5
//! decay_every = 1000
//! max_iterations = 10000
//!
//! [analysis]
//! lexicon_size = 100
//! bow_l2 = 1e-4
//! bow_max_iterations = 1000
//! n_null = 10000
//! k_neighbors = 10
//! lle_ridge = 1e-3
//! n_documents = 1000            # test documents used for state statistics
//! max_error_steps = 5000
//! velocity_steps = 50
//! svg = false
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sentidyn::cells::Architecture;
use sentidyn::fixedpoints::FixedPointConfig;
use sentidyn::manifold::LleConfig;
use sentidyn::training::{SyntheticSpec, TrainConfig};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub fixed_points: FixedPointSection,
    pub analysis: AnalysisConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("out"),
            data: DataConfig::default(),
            model: ModelConfig::default(),
            train: TrainSection::default(),
            fixed_points: FixedPointSection::default(),
            analysis: AnalysisConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Synthetic,
    Files,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    pub train: Option<PathBuf>,
    pub validation: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub max_vocab: usize,
    pub synthetic: SyntheticSection,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Synthetic,
            train: None,
            validation: None,
            test: None,
            max_vocab: 20_000,
            synthetic: SyntheticSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSection {
    pub positive: usize,
    pub negative: usize,
    pub neutral: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub n_docs: usize,
    pub validation_fraction: f64,
    pub test_fraction: f64,
}

impl Default for SyntheticSection {
    fn default() -> Self {
        Self {
            positive: 20,
            negative: 20,
            neutral: 160,
            min_len: 20,
            max_len: 80,
            n_docs: 4000,
            validation_fraction: 0.1,
            test_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub architecture: String,
    pub hidden_size: usize,
    pub embedding_size: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            architecture: "gru".into(),
            hidden_size: 64,
            embedding_size: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub clip_norm: f64,
    pub max_len: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            clip_norm: t.clip_norm,
            max_len: t.max_len,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedPointSection {
    pub n_initial: usize,
    pub threshold: f64,
    pub learning_rate: f64,
    pub decay_factor: f64,
    pub decay_every: usize,
    pub max_iterations: usize,
}

impl Default for FixedPointSection {
    fn default() -> Self {
        let f = FixedPointConfig::default();
        Self {
            n_initial: 512,
            threshold: f.threshold,
            learning_rate: f.learning_rate,
            decay_factor: f.decay_factor,
            decay_every: f.decay_every,
            max_iterations: f.max_iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub lexicon_size: usize,
    pub bow_l2: f64,
    pub bow_max_iterations: usize,
    pub n_null: usize,
    pub k_neighbors: usize,
    pub lle_ridge: f64,
    pub n_documents: usize,
    pub max_error_steps: usize,
    pub velocity_steps: usize,
    pub svg: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let lle = LleConfig::default();
        Self {
            lexicon_size: 100,
            bow_l2: 1e-4,
            bow_max_iterations: 1000,
            n_null: 10_000,
            k_neighbors: lle.k_neighbors,
            lle_ridge: lle.ridge,
            n_documents: 1000,
            max_error_steps: 5000,
            velocity_steps: 50,
            svg: false,
        }
    }
}

fn field_error(field: &str, message: impl Into<String>) -> CliError {
    CliError::Config(format!("{field}: {}", message.into()))
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }

    pub fn architecture(&self) -> Result<Architecture, CliError> {
        self.model
            .architecture
            .parse()
            .map_err(|_| field_error("model.architecture", format!("unknown architecture '{}'", self.model.architecture)))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.architecture()?;
        if self.model.hidden_size == 0 {
            return Err(field_error("model.hidden_size", "must be positive"));
        }
        if self.model.embedding_size == 0 {
            return Err(field_error("model.embedding_size", "must be positive"));
        }
        if self.train.batch_size == 0 {
            return Err(field_error("train.batch_size", "must be positive"));
        }
        if !(self.train.learning_rate > 0.0) {
            return Err(field_error("train.learning_rate", "must be positive"));
        }
        if !(self.train.clip_norm > 0.0) {
            return Err(field_error("train.clip_norm", "must be positive"));
        }
        if self.train.max_len == 0 {
            return Err(field_error("train.max_len", "must be positive"));
        }
        if !(self.fixed_points.threshold >= 0.0) {
            return Err(field_error("fixed_points.threshold", "must be non-negative"));
        }
        if !(self.fixed_points.learning_rate > 0.0) {
            return Err(field_error("fixed_points.learning_rate", "must be positive"));
        }
        if !(self.fixed_points.decay_factor > 0.0 && self.fixed_points.decay_factor <= 1.0) {
            return Err(field_error("fixed_points.decay_factor", "must be in (0, 1]"));
        }
        if self.fixed_points.decay_every == 0 {
            return Err(field_error("fixed_points.decay_every", "must be positive"));
        }
        if self.fixed_points.n_initial == 0 {
            return Err(field_error("fixed_points.n_initial", "must be positive"));
        }
        if !(self.analysis.bow_l2 > 0.0) {
            return Err(field_error("analysis.bow_l2", "must be positive"));
        }
        if self.analysis.k_neighbors == 0 {
            return Err(field_error("analysis.k_neighbors", "must be positive"));
        }
        if !(self.analysis.lle_ridge >= 0.0) {
            return Err(field_error("analysis.lle_ridge", "must be non-negative"));
        }
        if self.analysis.velocity_steps == 0 {
            return Err(field_error("analysis.velocity_steps", "must be positive"));
        }
        if self.analysis.n_documents == 0 {
            return Err(field_error("analysis.n_documents", "must be positive"));
        }
        let s = &self.data.synthetic;
        match self.data.source {
            DataSource::Synthetic => {
                if s.positive + s.negative < 2 {
                    return Err(field_error("data.synthetic", "needs at least two valenced tokens"));
                }
                if s.min_len == 0 || s.min_len > s.max_len {
                    return Err(field_error("data.synthetic.min_len", "must be in 1..=max_len"));
                }
                let f = s.validation_fraction + s.test_fraction;
                if !(s.validation_fraction >= 0.0 && s.test_fraction >= 0.0 && f < 1.0) {
                    return Err(field_error("data.synthetic", "split fractions must be non-negative and sum below 1"));
                }
            }
            DataSource::Files => {
                for (name, p) in [("data.train", &self.data.train), ("data.validation", &self.data.validation), ("data.test", &self.data.test)] {
                    if p.is_none() {
                        return Err(field_error(name, "required when data.source = \"files\""));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn synthetic_spec(&self) -> SyntheticSpec {
        let s = &self.data.synthetic;
        SyntheticSpec::balanced(s.positive, s.negative, s.neutral, s.min_len, s.max_len, s.n_docs, self.seed)
    }

    pub fn train_config(&self) -> Result<TrainConfig, CliError> {
        Ok(TrainConfig {
            architecture: self.architecture()?,
            hidden_size: self.model.hidden_size,
            embedding_size: self.model.embedding_size,
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            learning_rate: self.train.learning_rate,
            clip_norm: self.train.clip_norm,
            max_len: self.train.max_len,
            seed: self.seed,
        })
    }

    pub fn fixed_point_config(&self) -> FixedPointConfig {
        let f = &self.fixed_points;
        FixedPointConfig {
            learning_rate: f.learning_rate,
            decay_factor: f.decay_factor,
            decay_every: f.decay_every,
            max_iterations: f.max_iterations,
            threshold: f.threshold,
        }
    }

    pub fn lle_config(&self) -> LleConfig {
        LleConfig {
            k_neighbors: self.analysis.k_neighbors,
            ridge: self.analysis.lle_ridge,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = PipelineConfig::from_toml("").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        assert_eq!(cfg.model.hidden_size, 64);
        assert_eq!(cfg.fixed_points.n_initial, 512);
        assert_eq!(cfg.fixed_points.threshold, 1e-8);
        assert_eq!(cfg.analysis.lexicon_size, 100);
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = PipelineConfig::default();
        cfg.seed = 42;
        cfg.model.architecture = "lstm".into();
        cfg.fixed_points.threshold = 3.5e-9;
        cfg.data.source = DataSource::Files;
        cfg.data.train = Some("a.tsv".into());
        cfg.data.validation = Some("b.tsv".into());
        cfg.data.test = Some("c.tsv".into());
        let text = cfg.to_toml();
        assert_eq!(PipelineConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(PipelineConfig::from_toml("sede = 3").is_err());
        assert!(PipelineConfig::from_toml("[model]\nhiden_size = 3").is_err());
    }

    #[test]
    fn errors_name_the_field() {
        let e = PipelineConfig::from_toml("[model]\narchitecture = \"transformer\"").unwrap_err();
        assert!(e.to_string().contains("model.architecture"), "{e}");
        let e = PipelineConfig::from_toml("[train]\nbatch_size = 0").unwrap_err();
        assert!(e.to_string().contains("train.batch_size"), "{e}");
        let e = PipelineConfig::from_toml("[data]\nsource = \"files\"").unwrap_err();
        assert!(e.to_string().contains("data.train"), "{e}");
        assert_eq!(e.exit_code(), 2);
    }
}
