//! End-to-end experiment: prepare, train, generate, eval-nlp, eval-rec, report.
//!
//! Each stage reads its inputs from the output directory and writes its
//! artifacts next to a stamp holding the hash of those inputs. A stage whose
//! stamp still matches is skipped. Tables are tab-separated with a first
//! line `# config <hash> corpus <hash>`.

mod config;
mod report;
mod stages;
pub mod tsv;

pub use config::{DataConfig, ExperimentConfig, GenerateConfig, ModelEntry, Seeds, OUTPUT_DIR_ENV};
pub use report::{MetricsReport, MetricsRow, NlpRow, NlpSummary, RecSummary, SourceKind};
pub use stages::{Experiment, PreparedCorpus, SourceTexts, Stage, StageOutcome};
