use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{init_uniform_with, rmsprop_step, OptimizerConfig, ParamId, ParamStore, Real, Tape, Tensor, Var};
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeepConnConfig {
    pub embedding_dim: usize,
    pub filter_count: usize,
    pub kernel_width: usize,
    pub latent_dim: usize,
    /// Tokens per user or item document after truncation and padding.
    pub document_length: usize,
    pub fm_factor_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    /// Minimum count for a word to enter the evaluator's vocabulary.
    pub min_word_count: usize,
    pub seed: u64,
}

impl Default for DeepConnConfig {
    fn default() -> Self {
        DeepConnConfig {
            embedding_dim: 64,
            filter_count: 50,
            kernel_width: 3,
            latent_dim: 32,
            document_length: 300,
            fm_factor_dim: 8,
            epochs: 20,
            batch_size: 32,
            optimizer: OptimizerConfig::default(),
            min_word_count: 1,
            seed: 1,
        }
    }
}

impl DeepConnConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("embedding_dim", self.embedding_dim),
            ("filter_count", self.filter_count),
            ("kernel_width", self.kernel_width),
            ("latent_dim", self.latent_dim),
            ("document_length", self.document_length),
            ("fm_factor_dim", self.fm_factor_dim),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("min_word_count", self.min_word_count),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.kernel_width > self.document_length {
            return Err(Error::Config("kernel_width exceeds document_length".into()));
        }
        self.optimizer.validate()
    }
}

#[derive(Debug, Clone, Copy)]
struct Tower {
    embed: ParamId,
    conv_w: ParamId,
    conv_b: ParamId,
    fc_w: ParamId,
    fc_b: ParamId,
}

/// Two convolutional towers joined by a factorization machine.
#[derive(Debug, Clone)]
pub struct DeepConn<F: Real = f32> {
    cfg: DeepConnConfig,
    pub params: ParamStore<F>,
    user: Tower,
    item: Tower,
    w0: ParamId,
    w: ParamId,
    v: ParamId,
    trained: bool,
}

/// One epoch's training MSE and validation RMSE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub validation_rmse: f64,
}

impl<F: Real> DeepConn<F> {
    pub fn new(cfg: DeepConnConfig, vocab_size: usize) -> Result<Self> {
        cfg.validate()?;
        if vocab_size == 0 {
            return Err(Error::Config("empty evaluator vocabulary".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut store = ParamStore::new();
        let (e, f, l, k) = (cfg.embedding_dim, cfg.filter_count, cfg.latent_dim, cfg.fm_factor_dim);
        let mut tower = |name: &str, store: &mut ParamStore<F>| -> Result<Tower> {
            let mut add = |n: &str, shape: &[usize]| store.add(format!("{name}.{n}"), init_uniform_with(shape, &mut rng)?);
            Ok(Tower {
                embed: add("embed", &[vocab_size, e])?,
                conv_w: add("conv.w", &[cfg.kernel_width * e, f])?,
                conv_b: add("conv.b", &[1, f])?,
                fc_w: add("fc.w", &[f, l])?,
                fc_b: add("fc.b", &[1, l])?,
            })
        };
        let user = tower("user", &mut store)?;
        let item = tower("item", &mut store)?;
        let w0 = store.add("fm.w0", Tensor::zeros(&[1, 1]))?;
        let w = store.add("fm.w", init_uniform_with(&[2 * l, 1], &mut rng)?)?;
        let v = store.add("fm.v", init_uniform_with(&[2 * l, k], &mut rng)?)?;
        Ok(DeepConn {
            cfg,
            params: store,
            user,
            item,
            w0,
            w,
            v,
            trained: false,
        })
    }

    pub fn config(&self) -> &DeepConnConfig {
        &self.cfg
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    /// Mark hand-set parameters as usable for prediction.
    pub fn mark_trained(&mut self) {
        self.trained = true;
    }

    pub fn bias_id(&self) -> ParamId {
        self.w0
    }

    pub fn fm_ids(&self) -> (ParamId, ParamId, ParamId) {
        (self.w0, self.w, self.v)
    }

    fn tower(&self, tape: &mut Tape<'_, F>, t: &Tower, docs: &[Vec<usize>]) -> Result<Var> {
        let len = self.cfg.document_length;
        let mut idx = Vec::with_capacity(docs.len() * len);
        for d in docs {
            if d.len() != len {
                return Err(Error::Dimension(format!("document of {} tokens, expected {len}", d.len())));
            }
            idx.extend_from_slice(d);
        }
        let embed = tape.param(t.embed);
        let x = tape.gather_rows(embed, &idx)?;
        let windows = tape.unfold_rows(x, len, self.cfg.kernel_width)?;
        let conv_w = tape.param(t.conv_w);
        let conv_b = tape.param(t.conv_b);
        let c = tape.matmul(windows, conv_w)?;
        let c = tape.add_row(c, conv_b)?;
        let c = tape.relu(c);
        let pooled = tape.group_max_rows(c, len - self.cfg.kernel_width + 1)?;
        let fc_w = tape.param(t.fc_w);
        let fc_b = tape.param(t.fc_b);
        let z = tape.matmul(pooled, fc_w)?;
        tape.add_row(z, fc_b)
    }

    /// Raw predictions, `B × 1`.
    pub fn forward(&self, tape: &mut Tape<'_, F>, users: &[Vec<usize>], items: &[Vec<usize>]) -> Result<Var> {
        if users.len() != items.len() || users.is_empty() {
            return Err(Error::Dimension(format!(
                "{} user documents for {} item documents",
                users.len(),
                items.len()
            )));
        }
        let zu = self.tower(tape, &self.user, users)?;
        let zi = self.tower(tape, &self.item, items)?;
        let z = tape.concat_cols(&[zu, zi])?;
        let (w0, w, v) = (tape.param(self.w0), tape.param(self.w), tape.param(self.v));
        let linear = tape.matmul(z, w)?;
        let zv = tape.matmul(z, v)?;
        let zv2 = tape.mul(zv, zv)?;
        let z2 = tape.mul(z, z)?;
        let v2 = tape.mul(v, v)?;
        let z2v2 = tape.matmul(z2, v2)?;
        let inter = tape.sub(zv2, z2v2)?;
        let inter = tape.sum_cols(inter);
        let inter = tape.scale(inter, 0.5);
        let y = tape.add(linear, inter)?;
        tape.add_row(y, w0)
    }

    /// Mean squared error against `targets`.
    pub fn loss(&self, tape: &mut Tape<'_, F>, users: &[Vec<usize>], items: &[Vec<usize>], targets: &[f64]) -> Result<Var> {
        let y = self.forward(tape, users, items)?;
        let t = tape.leaf(Tensor::new(
            vec![targets.len(), 1],
            targets.iter().map(|&v| F::from_f64(v)).collect(),
        )?);
        let d = tape.sub(y, t)?;
        let sq = tape.mul(d, d)?;
        Ok(tape.mean_all(sq))
    }

    fn predict_unchecked(&self, users: &[Vec<usize>], items: &[Vec<usize>]) -> Result<Vec<f64>> {
        let bs = self.cfg.batch_size;
        let starts: Vec<usize> = (0..users.len()).step_by(bs).collect();
        let parts = par::map(&starts, |&s| -> Result<Vec<f64>> {
            let e = (s + bs).min(users.len());
            let mut tape = Tape::with_params(&self.params);
            let y = self.forward(&mut tape, &users[s..e], &items[s..e])?;
            Ok(tape.value(y).values().iter().map(|v| v.as_f64()).collect())
        });
        let mut out = Vec::with_capacity(users.len());
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    }

    /// Raw (unclamped) predicted ratings.
    pub fn predict(&self, users: &[Vec<usize>], items: &[Vec<usize>]) -> Result<Vec<f64>> {
        if !self.trained {
            return Err(Error::Usage("the rating predictor has not been trained".into()));
        }
        if users.is_empty() {
            return Ok(Vec::new());
        }
        self.predict_unchecked(users, items)
    }

    /// Train with RMSProp on MSE; keeps the epoch with the lowest validation RMSE.
    pub fn fit(
        &mut self,
        train: (&[Vec<usize>], &[Vec<usize>], &[f64]),
        validate: (&[Vec<usize>], &[Vec<usize>], &[f64]),
    ) -> Result<Vec<FitRecord>> {
        let (tu, ti, tr) = train;
        if tu.is_empty() || validate.0.is_empty() {
            return Err(Error::Evaluation("rating predictor needs train and validate pairs".into()));
        }
        let mean = tr.iter().sum::<f64>() / tr.len() as f64;
        self.params.get_mut(self.w0).tensor.values_mut()[0] = F::from_f64(mean);
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed ^ 0x5eed);
        let mut order: Vec<usize> = (0..tu.len()).collect();
        let mut records = Vec::with_capacity(self.cfg.epochs);
        let mut best: Option<(f64, ParamStore<F>)> = None;
        for epoch in 1..=self.cfg.epochs {
            order.shuffle(&mut rng);
            let (mut sse, mut n) = (0.0, 0usize);
            for (b, chunk) in order.chunks(self.cfg.batch_size).enumerate() {
                let pick = |src: &[Vec<usize>]| chunk.iter().map(|&i| src[i].clone()).collect::<Vec<_>>();
                let targets: Vec<f64> = chunk.iter().map(|&i| tr[i]).collect();
                let grads = {
                    let mut tape = Tape::with_params(&self.params);
                    let loss = self.loss(&mut tape, &pick(tu), &pick(ti), &targets)?;
                    let v = tape.value(loss).values()[0].as_f64();
                    if !v.is_finite() {
                        return Err(Error::NonFiniteLoss { epoch, batch: b + 1 });
                    }
                    sse += v * chunk.len() as f64;
                    n += chunk.len();
                    tape.backward(loss)?
                };
                grads.accumulate_into(&mut self.params)?;
                rmsprop_step(&mut self.params, &self.cfg.optimizer)?;
            }
            let preds = self.predict_unchecked(validate.0, validate.1)?;
            let clamped: Vec<f64> = preds.iter().map(|p| p.clamp(1.0, 5.0)).collect();
            let val = super::rmse(&clamped, validate.2)?;
            log::debug!("rating predictor epoch {epoch}: train mse {:.4} validate rmse {val:.4}", sse / n as f64);
            records.push(FitRecord {
                epoch,
                train_mse: sse / n as f64,
                validation_rmse: val,
            });
            if best.as_ref().is_none_or(|(v, _)| val < *v) {
                best = Some((val, self.params.clone()));
            }
        }
        self.params = best.expect("at least one epoch").1;
        self.trained = true;
        Ok(records)
    }
}
