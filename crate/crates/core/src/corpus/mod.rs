//! Review ingestion, filtering, splitting and the sampled baselines.

mod baseline;
mod filter;
mod ingest;
mod split;

use serde::{Deserialize, Serialize};

pub use baseline::{baseline_select, BaselineIndex, BaselineKind, BaselinePick, Fallback, FallbackCounts};
pub use filter::{filter, FilterConfig, FilterReport};
pub use ingest::{ingest, ingest_path, write_records, FieldMapping, IngestOutcome};
pub use split::{partition_indices, split, DatasetSplit, SplitManifest, DEFAULT_PROPORTIONS};

/// One user–item interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewRecord {
    pub user_id: String,
    pub item_id: String,
    /// Stars in `1..=5`.
    pub rating: u8,
    pub helpful_votes: u32,
    pub total_votes: u32,
    pub helpful_ratio: f64,
    pub text: String,
    pub word_count: usize,
}

impl ReviewRecord {
    /// Builds a record, deriving the helpful ratio and word count.
    pub fn new(
        user_id: impl Into<String>,
        item_id: impl Into<String>,
        rating: u8,
        helpful_votes: u32,
        total_votes: u32,
        text: impl Into<String>,
    ) -> Self {
        let text = text.into();
        let word_count = crate::encoding::default_tokenizer().word_count(&text);
        ReviewRecord {
            user_id: user_id.into(),
            item_id: item_id.into(),
            rating,
            helpful_votes,
            total_votes,
            helpful_ratio: helpful_ratio(helpful_votes, total_votes),
            text,
            word_count,
        }
    }
}

pub fn helpful_ratio(helpful: u32, total: u32) -> f64 {
    if total == 0 {
        0.0
    } else {
        f64::from(helpful) / f64::from(total)
    }
}
