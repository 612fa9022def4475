use serde::{Deserialize, Serialize};

use super::{ParamStore, Real};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    /// Decay of the squared-gradient moving average.
    pub decay: f64,
    /// Added under the square root of the accumulator.
    pub epsilon: f64,
    pub clip_min: f64,
    pub clip_max: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            learning_rate: 0.002,
            decay: 0.95,
            epsilon: 1e-8,
            clip_min: -5.0,
            clip_max: 5.0,
        }
    }
}

impl OptimizerConfig {
    // Negated comparisons so NaN fails too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(Error::Config("decay must lie in (0, 1)".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if !(self.clip_min < self.clip_max) {
            return Err(Error::Config("clip_min must be below clip_max".into()));
        }
        Ok(())
    }

    pub fn with_learning_rate(mut self, lr: f64) -> Self {
        self.learning_rate = lr;
        self
    }
}

/// Elementwise value clipping into `[lo, hi]`.
pub fn clip_value<F: Real>(g: F, lo: F, hi: F) -> F {
    g.max(lo).min(hi)
}

/// One RMSProp update over every parameter.
///
/// Gradients are clipped elementwise first, then
/// `acc ← decay·acc + (1−decay)·g²` and `θ ← θ − lr·g / √(acc + ε)`.
/// Gradient slots are emptied afterwards.
pub fn rmsprop_step<F: Real>(store: &mut ParamStore<F>, cfg: &OptimizerConfig) -> Result<()> {
    cfg.validate()?;
    if let Some(p) = store.iter().find(|p| p.tensor.grad().is_none()) {
        return Err(Error::State(format!("parameter `{}` has no gradient", p.name)));
    }
    let lr = F::from_f64(cfg.learning_rate);
    let decay = F::from_f64(cfg.decay);
    let keep = F::one() - decay;
    let eps = F::from_f64(cfg.epsilon);
    let (lo, hi) = (F::from_f64(cfg.clip_min), F::from_f64(cfg.clip_max));
    for p in store.iter_mut() {
        let grad = p.tensor.grad().expect("checked above").to_vec();
        let acc = &mut p.accumulator;
        let values = p.tensor.values_mut();
        for ((v, a), g) in values.iter_mut().zip(acc.iter_mut()).zip(grad) {
            let g = clip_value(g, lo, hi);
            *a = decay * *a + keep * g * g;
            *v = *v - lr * g / (*a + eps).sqrt();
        }
        p.tensor.clear_grad();
    }
    Ok(())
}
