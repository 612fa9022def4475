//! Teacher-forced training with validation-based checkpoint selection.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::ReviewRecord;
use crate::encoding::{AttributeBundle, IdTables, Vocabulary};
use crate::error::{Error, Result};
use crate::genmodels::{save_checkpoint, CheckpointMeta, Generator, Regularizer};
use crate::numeric::{rmsprop_step, OptimizerConfig, ParamStore, Tape};
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Last epoch (1-based) trained at the base learning rate.
    pub lr_decay_start_epoch: usize,
    pub lr_decay_factor: f64,
    pub keep_prob: f64,
    pub optimizer: OptimizerConfig,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            lr_decay_start_epoch: 10,
            lr_decay_factor: 0.95,
            keep_prob: 0.8,
            optimizer: OptimizerConfig::default(),
            batch_size: 32,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor <= 1.0) {
            return Err(Error::Config("lr_decay_factor must lie in (0, 1]".into()));
        }
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return Err(Error::Config("keep_prob must lie in (0, 1]".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        self.optimizer.validate()
    }

    /// Learning rate used during `epoch` (1-based).
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        let decays = epoch.saturating_sub(self.lr_decay_start_epoch);
        self.optimizer.learning_rate * self.lr_decay_factor.powi(decays as i32)
    }
}

/// One training sequence: attributes plus framed token indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub bundle: AttributeBundle,
    pub tokens: Vec<usize>,
}

pub fn examples(records: &[ReviewRecord], vocab: &Vocabulary, tables: &IdTables) -> Result<Vec<Example>> {
    records
        .iter()
        .map(|r| {
            Ok(Example {
                bundle: tables.bundle(r)?,
                tokens: vocab.encode_text(&r.text),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_loss: f64,
    pub validation_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_validation_loss: f64,
    pub checkpoint: Option<PathBuf>,
}

impl TrainReport {
    /// Tab-separated epoch log with a header row.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("epoch\tlearning_rate\ttrain_loss\tvalidation_loss\n");
        for e in &self.epochs {
            s.push_str(&format!(
                "{}\t{:e}\t{:.6}\t{:.6}\n",
                e.epoch, e.learning_rate, e.train_loss, e.validation_loss
            ));
        }
        s
    }

    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_tsv().as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Where to save the best checkpoint.
#[derive(Debug, Clone)]
pub struct CheckpointTarget {
    pub path: PathBuf,
    pub vocab_hash: String,
    pub config_hash: String,
}

/// Length-bucketed batches: shuffle, sort by length, cut, shuffle the batches.
pub fn make_batches(examples: &[Example], batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(rng);
    order.sort_by_key(|&i| examples[i].tokens.len());
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect();
    batches.shuffle(rng);
    batches
}

fn eval_batches(examples: &[Example], batch_size: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.sort_by_key(|&i| (examples[i].tokens.len(), i));
    order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}

fn gather(examples: &[Example], idx: &[usize]) -> (Vec<AttributeBundle>, Vec<Vec<usize>>) {
    idx.iter()
        .map(|&i| (examples[i].bundle, examples[i].tokens.clone()))
        .unzip()
}

/// Mean per-token cross-entropy with dropout disabled.
pub fn evaluate_loss(model: &Generator<f32>, examples: &[Example], batch_size: usize) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::Evaluation("empty split".into()));
    }
    let batches = eval_batches(examples, batch_size);
    let parts = par::map(&batches, |idx| -> Result<(f64, usize)> {
        let (bundles, seqs) = gather(examples, idx);
        let mut tape = Tape::with_params(&model.params);
        let (loss, count) = model.batch_loss(&mut tape, &bundles, &seqs, None)?;
        Ok((tape.value(loss).values()[0] as f64 * count as f64, count))
    });
    let (mut total, mut count) = (0.0, 0usize);
    for p in parts {
        let (t, c) = p?;
        total += t;
        count += c;
    }
    Ok(total / count.max(1) as f64)
}

/// Train `model` in place. On return the model holds the parameters of the
/// epoch with the lowest validation loss.
pub fn train(
    model: &mut Generator<f32>,
    train_set: &[Example],
    validate_set: &[Example],
    cfg: &TrainConfig,
    target: Option<&CheckpointTarget>,
) -> Result<TrainReport> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Evaluation("empty training split".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut records = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, ParamStore<f32>)> = None;
    for epoch in 1..=cfg.epochs {
        let lr = cfg.learning_rate(epoch);
        let opt = cfg.optimizer.with_learning_rate(lr);
        let (mut total, mut count) = (0.0f64, 0usize);
        for (b, idx) in make_batches(train_set, cfg.batch_size, &mut rng).iter().enumerate() {
            let (bundles, seqs) = gather(train_set, idx);
            let grads = {
                let mut tape = Tape::with_params(&model.params);
                let reg = Regularizer {
                    keep_prob: cfg.keep_prob,
                    rng: &mut rng,
                };
                let (loss, n) = model.batch_loss(&mut tape, &bundles, &seqs, Some(reg))?;
                let value = tape.value(loss).values()[0] as f64;
                if !value.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, batch: b + 1 });
                }
                total += value * n as f64;
                count += n;
                tape.backward(loss)?
            };
            grads.accumulate_into(&mut model.params)?;
            rmsprop_step(&mut model.params, &opt)?;
        }
        let train_loss = total / count.max(1) as f64;
        let validation_loss = evaluate_loss(model, validate_set, cfg.batch_size)?;
        log::info!(
            "{} epoch {epoch}: lr {lr:.3e} train {train_loss:.4} validate {validation_loss:.4}",
            model.spec().label()
        );
        records.push(EpochRecord {
            epoch,
            learning_rate: lr,
            train_loss,
            validation_loss,
        });
        if best.as_ref().is_none_or(|(_, v, _)| validation_loss < *v) {
            if let Some(t) = target {
                let meta = CheckpointMeta {
                    vocab_hash: t.vocab_hash.clone(),
                    config_hash: t.config_hash.clone(),
                    epoch,
                    validation_loss,
                };
                save_checkpoint(&t.path, model, &meta)?;
            }
            best = Some((epoch, validation_loss, model.params.clone()));
        }
    }
    let (best_epoch, best_validation_loss, params) = best.expect("at least one epoch");
    model.params = params;
    Ok(TrainReport {
        epochs: records,
        best_epoch,
        best_validation_loss,
        checkpoint: target.map(|t| t.path.clone()),
    })
}
