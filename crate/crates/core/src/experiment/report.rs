use serde::{Deserialize, Serialize};

use crate::hashing::sha256_hex;
use crate::recsys::{ConditionResult, RecReport};
use crate::textmetrics::Histogram;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    /// The human review of each TEST pair.
    Human,
    Baseline,
    Model,
}

impl SourceKind {
    pub fn name(self) -> &'static str {
        match self {
            SourceKind::Human => "human",
            SourceKind::Baseline => "baseline",
            SourceKind::Model => "model",
        }
    }
}

/// Text-quality results for one source of TEST texts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlpRow {
    pub source: String,
    pub kind: SourceKind,
    pub checkpoint_hash: Option<String>,
    /// Mean sentence-level BLEU-4 against the human review.
    pub bleu4: f64,
    /// Means in `ReadabilityIndex::ALL` order over the scorable texts.
    pub readability: [Option<f64>; 4],
    pub scored: usize,
    pub histograms: Vec<Histogram>,
    /// `None` when either side is constant.
    pub polarity_pearson: Option<f64>,
    /// `(count, mean polarity)` for true ratings 1..=5.
    pub polarity_by_rating: Vec<(usize, Option<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlpSummary {
    pub config_hash: String,
    pub corpus_hash: String,
    pub rows: Vec<NlpRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecSummary {
    pub config_hash: String,
    pub corpus_hash: String,
    pub report: RecReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub source: String,
    pub kind: SourceKind,
    pub config_hash: String,
    pub checkpoint_hash: Option<String>,
    pub bleu4: f64,
    pub coleman_liau: Option<f64>,
    pub flesch: Option<f64>,
    pub smog: Option<f64>,
    pub dale_chall: Option<f64>,
    pub polarity_pearson: Option<f64>,
    pub rmse: f64,
    pub mean_abs_delta: f64,
    pub outliers: usize,
    pub improvement_pct: f64,
}

impl MetricsRow {
    pub fn merge(nlp: &NlpRow, rec: &ConditionResult, config_hash: &str) -> Self {
        MetricsRow {
            source: nlp.source.clone(),
            kind: nlp.kind,
            config_hash: config_hash.to_string(),
            checkpoint_hash: nlp.checkpoint_hash.clone(),
            bleu4: nlp.bleu4,
            coleman_liau: nlp.readability[0],
            flesch: nlp.readability[1],
            smog: nlp.readability[2],
            dale_chall: nlp.readability[3],
            polarity_pearson: nlp.polarity_pearson,
            rmse: rec.rmse,
            mean_abs_delta: rec.mean_abs_delta,
            outliers: rec.outliers,
            improvement_pct: rec.improvement_pct,
        }
    }
}

/// One row per text source across every metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config_hash: String,
    pub corpus_hash: String,
    pub test_pairs: usize,
    pub cold_pairs: usize,
    pub mean_baseline_rmse: f64,
    pub rows: Vec<MetricsRow>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| format!("{x:.6}"))
}

impl MetricsReport {
    pub fn row(&self, source: &str) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.source == source)
    }

    pub fn models(&self) -> impl Iterator<Item = &MetricsRow> {
        self.rows.iter().filter(|r| r.kind == SourceKind::Model)
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from(
            "source\tkind\tbleu4\tcoleman_liau\tflesch\tsmog\tdale_chall\tpolarity_pearson\trmse\tmean_abs_delta\toutliers\timprovement_pct\tconfig_hash\tcheckpoint_sha256\n",
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{}\t{}\t{:.6}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{}\t{:.4}\t{}\t{}\n",
                r.source,
                r.kind.name(),
                r.bleu4,
                opt(r.coleman_liau),
                opt(r.flesch),
                opt(r.smog),
                opt(r.dale_chall),
                opt(r.polarity_pearson),
                r.rmse,
                r.mean_abs_delta,
                r.outliers,
                r.improvement_pct,
                r.config_hash,
                r.checkpoint_hash.as_deref().unwrap_or("")
            ));
        }
        s
    }

    /// Hash of the report content, independent of where it was written.
    pub fn content_hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("report serializes").as_bytes())
    }
}
