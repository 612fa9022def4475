use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::deepconn::{DeepConn, DeepConnConfig, FitRecord};
use super::{rating_discrepancy, rmse, Discrepancy};
use crate::corpus::{partition_indices, ReviewRecord, DEFAULT_PROPORTIONS};
use crate::encoding::{build_vocab, EncoderConfig, Level, Vocabulary, PAD};
use crate::error::{Error, Result};
use crate::par;
use crate::textmetrics::histogram;

/// Name of the condition that keeps the human review texts.
pub const TEST_PAIR: &str = "test_pair";

/// Replacement review text per `(user_id, item_id)` pair.
pub type ConditionTexts = BTreeMap<(String, String), String>;

/// Evaluator partition of the TEST pairs, shared by every condition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalSplits {
    pub seed: u64,
    pub train: Vec<usize>,
    pub validate: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn build_eval_splits(pairs: usize, seed: u64) -> Result<EvalSplits> {
    let [train, validate, test] = partition_indices(pairs, seed, DEFAULT_PROPORTIONS)?;
    if train.is_empty() || validate.is_empty() || test.is_empty() {
        return Err(Error::Evaluation(format!(
            "{pairs} pairs are too few for non-empty evaluator splits"
        )));
    }
    Ok(EvalSplits {
        seed,
        train,
        validate,
        test,
    })
}

/// Fixed-length user and item documents built from evaluator-train reviews.
pub struct Documents<'a> {
    vocab: &'a Vocabulary,
    length: usize,
    by_user: HashMap<&'a str, Vec<usize>>,
    by_item: HashMap<&'a str, Vec<usize>>,
    records: &'a [ReviewRecord],
}

impl<'a> Documents<'a> {
    pub fn new(records: &'a [ReviewRecord], train: &[usize], vocab: &'a Vocabulary, length: usize) -> Self {
        let mut by_user: HashMap<&str, Vec<usize>> = HashMap::new();
        let mut by_item: HashMap<&str, Vec<usize>> = HashMap::new();
        let mut sorted = train.to_vec();
        sorted.sort_unstable();
        for &j in &sorted {
            by_user.entry(records[j].user_id.as_str()).or_default().push(j);
            by_item.entry(records[j].item_id.as_str()).or_default().push(j);
        }
        Documents {
            vocab,
            length,
            by_user,
            by_item,
            records,
        }
    }

    fn tokens(&self, text: &str) -> Vec<usize> {
        let framed = self.vocab.encode_text(text);
        framed[1..framed.len() - 1].to_vec()
    }

    fn build(&self, sources: Option<&Vec<usize>>, own: usize, text: &dyn Fn(usize) -> &'a str) -> (Vec<usize>, bool) {
        let mut doc = Vec::with_capacity(self.length);
        let mut any = false;
        for &j in sources.into_iter().flatten().filter(|&&j| j != own) {
            any = true;
            doc.extend(self.tokens(text(j)));
            if doc.len() >= self.length {
                break;
            }
        }
        doc.resize(self.length, PAD);
        (doc, any)
    }

    /// User and item documents for pair `p`, excluding `p`'s own review, and
    /// whether either side was empty.
    pub fn for_pair(&self, p: usize, text: &dyn Fn(usize) -> &'a str) -> (Vec<usize>, Vec<usize>, bool) {
        let r = &self.records[p];
        let (u, has_u) = self.build(self.by_user.get(r.user_id.as_str()), p, text);
        let (i, has_i) = self.build(self.by_item.get(r.item_id.as_str()), p, text);
        (u, i, !(has_u && has_i))
    }
}

/// The trained rating predictor plus everything needed to rebuild documents.
pub struct Evaluator {
    pub model: DeepConn<f32>,
    pub vocab: Vocabulary,
    pub splits: EvalSplits,
    pub records: Vec<ReviewRecord>,
    pub fit_log: Vec<FitRecord>,
    pub train_mean: f64,
}

fn human<'a>(records: &'a [ReviewRecord]) -> impl Fn(usize) -> &'a str + 'a {
    move |j| records[j].text.as_str()
}

impl Evaluator {
    /// Train once on the human reviews of the evaluator-train portion.
    pub fn train(records: &[ReviewRecord], cfg: &DeepConnConfig, split_seed: u64) -> Result<Self> {
        cfg.validate()?;
        if records.is_empty() {
            return Err(Error::Evaluation("no TEST pairs to evaluate".into()));
        }
        let splits = build_eval_splits(records.len(), split_seed)?;
        let texts: Vec<&str> = splits.train.iter().map(|&j| records[j].text.as_str()).collect();
        let enc = EncoderConfig {
            min_word_count: cfg.min_word_count,
            ..EncoderConfig::default()
        };
        let vocab = build_vocab(&texts, Level::Word, &enc)?;
        let mut model = DeepConn::new(cfg.clone(), vocab.len())?;
        let (fit_log, train_mean) = {
            let docs = Documents::new(records, &splits.train, &vocab, cfg.document_length);
            let text = human(records);
            let gather = |idx: &[usize]| {
                let mut us = Vec::with_capacity(idx.len());
                let mut is = Vec::with_capacity(idx.len());
                let mut ys = Vec::with_capacity(idx.len());
                for &p in idx {
                    let (u, i, _) = docs.for_pair(p, &text);
                    us.push(u);
                    is.push(i);
                    ys.push(records[p].rating as f64);
                }
                (us, is, ys)
            };
            let (tu, ti, ty) = gather(&splits.train);
            let (vu, vi, vy) = gather(&splits.validate);
            let log = model.fit((&tu, &ti, &ty), (&vu, &vi, &vy))?;
            (log, ty.iter().sum::<f64>() / ty.len() as f64)
        };
        Ok(Evaluator {
            model,
            vocab,
            splits,
            records: records.to_vec(),
            fit_log,
            train_mean,
        })
    }

    fn resolve<'t>(&'t self, texts: &'t ConditionTexts) -> Result<Vec<&'t str>> {
        let mut missing = Vec::new();
        let out: Vec<&str> = self
            .records
            .iter()
            .map(|r| match texts.get(&(r.user_id.clone(), r.item_id.clone())) {
                Some(t) => t.as_str(),
                None => {
                    missing.push(format!("({}, {})", r.user_id, r.item_id));
                    ""
                }
            })
            .collect();
        if !missing.is_empty() {
            let shown = missing.iter().take(10).cloned().collect::<Vec<_>>().join(", ");
            return Err(Error::Evaluation(format!(
                "condition lacks {} pair(s): {shown}{}",
                missing.len(),
                if missing.len() > 10 { ", …" } else { "" }
            )));
        }
        Ok(out)
    }

    /// Raw predictions on the evaluator-test pairs with documents built from
    /// `texts` (human texts when `None`), plus truths and the cold-pair count.
    pub fn predict_condition(&self, texts: Option<&ConditionTexts>) -> Result<(Vec<f64>, Vec<f64>, usize)> {
        let resolved = texts.map(|t| self.resolve(t)).transpose()?;
        let text = |j: usize| -> &str {
            match &resolved {
                Some(v) => v[j],
                None => self.records[j].text.as_str(),
            }
        };
        let docs = Documents::new(&self.records, &self.splits.train, &self.vocab, self.model.config().document_length);
        let (mut us, mut is, mut ys, mut cold) = (Vec::new(), Vec::new(), Vec::new(), 0);
        for &p in &self.splits.test {
            let (u, i, c) = docs.for_pair(p, &text);
            us.push(u);
            is.push(i);
            ys.push(self.records[p].rating as f64);
            cold += usize::from(c);
        }
        Ok((self.model.predict(&us, &is)?, ys, cold))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub name: String,
    /// RMSE of predictions clamped to [1, 5].
    pub rmse: f64,
    pub raw_rmse: f64,
    pub mean_abs_delta: f64,
    pub outliers: usize,
    /// `(rmse_test_pair − rmse) / rmse_test_pair · 100`.
    pub improvement_pct: f64,
    pub discrepancy: Discrepancy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecReport {
    pub rows: Vec<ConditionResult>,
    pub test_pairs: usize,
    pub cold_pairs: usize,
    /// RMSE of always predicting the evaluator-train mean rating.
    pub mean_baseline_rmse: f64,
}

const DELTA_EDGES: [f64; 17] = [
    -4.0, -3.5, -3.0, -2.5, -2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0,
];

impl RecReport {
    pub fn row(&self, name: &str) -> Option<&ConditionResult> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("condition\trmse\traw_rmse\tmean_abs_delta\toutliers\timprovement_pct\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{}\t{:.6}\t{:.6}\t{:.6}\t{}\t{:.4}\n",
                r.name, r.rmse, r.raw_rmse, r.mean_abs_delta, r.outliers, r.improvement_pct
            ));
        }
        s.push_str(&format!("mean_baseline\t{:.6}\t{:.6}\t\t\t\n", self.mean_baseline_rmse, self.mean_baseline_rmse));
        s
    }

    /// Δ histogram per condition and true rating with fixed half-star bins.
    pub fn delta_histogram_tsv(&self) -> Result<String> {
        let mut s = String::from("condition\trating\tbin_low\tbin_high\tcount\n");
        for r in &self.rows {
            for rating in 1..=5u8 {
                let deltas: Vec<f64> = r
                    .discrepancy
                    .deltas
                    .iter()
                    .zip(r.discrepancy.truths())
                    .filter(|(_, t)| *t == rating)
                    .map(|(d, _)| *d)
                    .collect();
                if deltas.is_empty() {
                    continue;
                }
                let h = histogram(&deltas, &DELTA_EDGES)?;
                for (k, c) in h.counts.iter().enumerate() {
                    s.push_str(&format!("{}\t{rating}\t{}\t{}\t{c}\n", r.name, h.edges[k], h.edges[k + 1]));
                }
            }
        }
        Ok(s)
    }
}

fn result(name: &str, raw: &[f64], truths: &[f64]) -> Result<ConditionResult> {
    let clamped: Vec<f64> = raw.iter().map(|p| p.clamp(1.0, 5.0)).collect();
    let discrepancy = rating_discrepancy(&clamped, truths)?;
    Ok(ConditionResult {
        name: name.to_string(),
        rmse: rmse(&clamped, truths)?,
        raw_rmse: rmse(raw, truths)?,
        mean_abs_delta: discrepancy.mean_abs(),
        outliers: discrepancy.outliers(),
        improvement_pct: 0.0,
        discrepancy,
    })
}

/// Evaluate the human texts plus every named condition on the same pairs.
pub fn compare_conditions(evaluator: &Evaluator, conditions: &[(String, ConditionTexts)]) -> Result<RecReport> {
    let (raw, truths, cold) = evaluator.predict_condition(None)?;
    let base = result(TEST_PAIR, &raw, &truths)?;
    let extra = par::map(conditions, |(name, texts)| -> Result<ConditionResult> {
        let (raw, truths, _) = evaluator.predict_condition(Some(texts))?;
        result(name, &raw, &truths)
    });
    let mut rows = vec![base];
    for r in extra {
        rows.push(r?);
    }
    let reference = rows[0].rmse;
    for r in &mut rows {
        r.improvement_pct = if reference > 0.0 {
            (reference - r.rmse) / reference * 100.0
        } else {
            0.0
        };
    }
    let mean = vec![evaluator.train_mean; truths.len()];
    Ok(RecReport {
        rows,
        test_pairs: truths.len(),
        cold_pairs: cold,
        mean_baseline_rmse: rmse(&mean, &truths)?,
    })
}
