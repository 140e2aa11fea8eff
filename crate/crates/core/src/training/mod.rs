//! Data ingestion, classifier training and the bag-of-words baseline.

mod adam;
mod bow;
mod data;
mod model;
mod synthetic;
mod train;
mod vocab;

pub use adam::{clip_global_norm, Adam};
pub use bow::{
    lbfgs, train_bow_baseline, BowModel, BowObjective, BowResult, LbfgsReport, ValenceLexicon, DEFAULT_L2,
    DEFAULT_LEXICON_SIZE,
};
pub use data::{
    format_labeled_text, parse_labeled_text, read_labeled_text, split_by_fraction, write_labeled_text, Dataset,
    Document, LabeledText, Split,
};
pub use model::{evaluate_accuracy, sample_hidden_states, ClassifierModel};
pub use synthetic::{generate_synthetic, synthetic_dataset, synthetic_texts, SyntheticSpec};
pub use train::{logistic_loss, mean_loss, train_classifier, EpochRecord, TrainConfig, TrainingLog};
pub use vocab::{tokenize, Vocabulary, OOV, OOV_TOKEN, PAD, PAD_TOKEN};
