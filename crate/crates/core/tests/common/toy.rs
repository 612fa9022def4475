//! The bundled 50-review corpus and the schedule that memorizes it.

#![allow(dead_code)]

use std::path::Path;

use revgen::corpus::{ingest, FieldMapping, ReviewRecord};
use revgen::encoding::{default_tokenizer, normalize_words, EncoderConfig, Level};
use revgen::experiment::ExperimentConfig;
use revgen::numeric::OptimizerConfig;
use revgen::training::TrainConfig;

pub const TOY_HIDDEN: usize = 64;

pub fn toy_records() -> Vec<ReviewRecord> {
    let data = include_str!("../../data/toy_reviews.jsonl");
    ingest(data.as_bytes(), &FieldMapping::default(), default_tokenizer()).unwrap().records
}

pub fn toy_encoder() -> EncoderConfig {
    EncoderConfig {
        min_word_count: 1,
        word_embedding_dim: 32,
        attr_embedding_dim: 16,
        ..EncoderConfig::default()
    }
}

/// Higher base rate, smaller batches and a later decay than the full-scale
/// schedule: 50 sequences give too few updates per epoch otherwise.
pub fn toy_train(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 5,
        lr_decay_start_epoch: 60,
        optimizer: OptimizerConfig::default().with_learning_rate(0.01),
        ..TrainConfig::default()
    }
}

/// How a decoded text should read at `level` to count as verbatim.
pub fn expected_text(level: Level, text: &str) -> String {
    match level {
        Level::Char => text.to_string(),
        Level::Word => normalize_words(text),
    }
}

/// A fast end-to-end configuration over the toy corpus writing to `out`.
pub fn toy_pipeline(out: &Path, extra: &[&str]) -> ExperimentConfig {
    let text = format!(
        r#"
output_dir = "{}"
[data]
input = "{}/data/toy_reviews.jsonl"
[encoder]
attr_embedding_dim = 8
word_embedding_dim = 8
min_word_count = 1
[[models]]
architecture = "gcn"
level = "word"
hidden_dim = 16
[train]
epochs = 2
batch_size = 8
[generate]
max_len_word = 12
[recsys]
embedding_dim = 4
filter_count = 4
latent_dim = 2
document_length = 12
fm_factor_dim = 2
epochs = 2
"#,
        out.display(),
        env!("CARGO_MANIFEST_DIR")
    );
    let extra: Vec<String> = extra.iter().map(|s| s.to_string()).collect();
    ExperimentConfig::from_toml(&text, &extra, Path::new("/")).unwrap()
}
