use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lstm::{lstm_gates, LstmParams};
use super::{Architecture, ModelSpec};
use crate::encoding::{AttributeBundle, GcnAttributeEncoder, Level, MlpAttributeEncoder, END, PAD, START};
use crate::error::{Error, Result};
use crate::numeric::{dropout_mask, init_uniform_with, ParamId, ParamStore, Real, Tape, Tensor, Var};
use crate::par;

/// Additive attention weights.
#[derive(Debug, Clone, Copy)]
pub struct AttentionParams {
    pub w_h: ParamId,
    pub w_x: ParamId,
    pub v: ParamId,
}

#[derive(Debug, Clone)]
enum AttrPath {
    Gcn { enc: GcnAttributeEncoder, w: ParamId },
    Mlp { enc: MlpAttributeEncoder, attention: Option<AttentionParams> },
}

/// Attribute-derived quantities computed once per batch.
#[derive(Debug, Clone, Copy)]
pub struct Conditioning {
    batch: usize,
    /// GCN: attribute contribution to the first layer's gates.
    gcn_contrib: Option<Var>,
    /// Attention: attribute embeddings and their projection, grouped per example.
    grouped: Option<Var>,
    projected: Option<Var>,
    attributes: usize,
}

impl Conditioning {
    pub fn batch(&self) -> usize {
        self.batch
    }
}

/// Per-layer hidden and cell states.
#[derive(Debug, Clone)]
pub struct DecoderState {
    pub h: Vec<Var>,
    pub c: Vec<Var>,
}

/// Features entering the output layer, plus attention weights when present.
#[derive(Debug, Clone, Copy)]
pub struct StepOutput {
    pub features: Var,
    pub attention: Option<Var>,
    pub top_hidden: Var,
}

/// Training-mode dropout on every layer's output.
pub struct Regularizer<'a> {
    pub keep_prob: f64,
    pub rng: &'a mut ChaCha8Rng,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSample {
    pub bundle: AttributeBundle,
    /// Emitted tokens, ending with the end symbol unless the length cap hit.
    pub token_indices: Vec<usize>,
    pub text: String,
    pub log_likelihood: f64,
}

/// A generator: layout, parameters and resolved parameter handles.
#[derive(Debug, Clone)]
pub struct Generator<F: Real = f32> {
    spec: ModelSpec,
    pub params: ParamStore<F>,
    embed: Option<ParamId>,
    lstm: Vec<LstmParams>,
    attr: AttrPath,
    out_w: ParamId,
    out_b: ParamId,
}

/// `s_j = vᵀ tanh(W_h h + W_x x_j)`, `α = softmax(s)`, `c = Σ α_j x_j`.
///
/// `grouped` holds each example's `k` attribute vectors on adjacent rows and
/// `projected` is `grouped · W_x`. Returns `(c, α)`.
pub fn attend<F: Real>(
    tape: &mut Tape<'_, F>,
    h: Var,
    grouped: Var,
    projected: Var,
    k: usize,
    p: &AttentionParams,
) -> Result<(Var, Var)> {
    let w_h = tape.param(p.w_h);
    let v = tape.param(p.v);
    let hp = tape.matmul(h, w_h)?;
    let e = tape.group_add_broadcast(projected, hp, k)?;
    let e = tape.tanh(e);
    let s = tape.matmul(e, v)?;
    let batch = tape.value(h).rows();
    let s = tape.reshape(s, vec![batch, k])?;
    let alpha = tape.softmax_rows(s);
    let ctx = tape.group_weighted_sum(alpha, grouped)?;
    Ok((ctx, alpha))
}

fn argmax_lowest<F: Real>(row: &[F]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Natural-log softmax probability of every entry, computed in f64.
fn log_softmax<F: Real>(row: &[F]) -> Vec<f64> {
    let max = row.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
    let lse = row.iter().map(|v| (v.as_f64() - max).exp()).sum::<f64>().ln() + max;
    row.iter().map(|v| v.as_f64() - lse).collect()
}

impl<F: Real> Generator<F> {
    /// Fresh generator with every parameter drawn from `U[-0.08, 0.08]`.
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        for (name, shape) in spec.layout() {
            store.add(name, init_uniform_with(&shape, &mut rng)?)?;
        }
        Self::from_params(spec, store)
    }

    /// Attach to an existing store, checking every name and shape.
    pub fn from_params(spec: ModelSpec, params: ParamStore<F>) -> Result<Self> {
        spec.validate()?;
        let layout = spec.layout();
        if layout.len() != params.len() {
            return Err(Error::Format(format!(
                "{} parameters for a layout of {}",
                params.len(),
                layout.len()
            )));
        }
        for (name, shape) in &layout {
            let p = params
                .by_name(name)
                .ok_or_else(|| Error::Format(format!("missing parameter `{name}`")))?;
            if p.tensor.shape() != shape.as_slice() {
                return Err(Error::Format(format!(
                    "parameter `{name}` has shape {:?}, expected {shape:?}",
                    p.tensor.shape()
                )));
            }
        }
        let id = |n: &str| params.id(n).expect("checked above");
        let lstm = (0..spec.layers)
            .map(|l| LstmParams {
                w_x: id(&format!("lstm{l}.w_x")),
                w_h: id(&format!("lstm{l}.w_h")),
                b: id(&format!("lstm{l}.b")),
            })
            .collect();
        let attr = match spec.architecture {
            Architecture::Gcn => AttrPath::Gcn {
                enc: GcnAttributeEncoder::attach(&params, spec.use_helpful)?,
                w: id("lstm0.w_attr"),
            },
            arch => AttrPath::Mlp {
                enc: MlpAttributeEncoder::attach(&params, spec.use_helpful)?,
                attention: (arch == Architecture::Attention).then(|| AttentionParams {
                    w_h: id("att.w_h"),
                    w_x: id("att.w_x"),
                    v: id("att.v"),
                }),
            },
        };
        Ok(Generator {
            embed: (spec.level == Level::Word).then(|| id("embed")),
            lstm,
            attr,
            out_w: id("out.w"),
            out_b: id("out.b"),
            spec,
            params,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn attention_params(&self) -> Option<AttentionParams> {
        match &self.attr {
            AttrPath::Mlp { attention, .. } => *attention,
            AttrPath::Gcn { .. } => None,
        }
    }

    pub fn output_params(&self) -> (ParamId, ParamId) {
        (self.out_w, self.out_b)
    }

    /// Same model at another precision.
    pub fn cast<G: Real>(&self) -> Generator<G> {
        Generator::from_params(self.spec.clone(), self.params.cast()).expect("layout unchanged")
    }

    /// Encode attributes and build the initial decoder state.
    pub fn condition(
        &self,
        tape: &mut Tape<'_, F>,
        bundles: &[AttributeBundle],
    ) -> Result<(Conditioning, DecoderState)> {
        let batch = bundles.len();
        if batch == 0 {
            return Err(Error::Usage("empty batch".into()));
        }
        let h = self.spec.hidden_dim;
        let mut cond = Conditioning {
            batch,
            gcn_contrib: None,
            grouped: None,
            projected: None,
            attributes: 0,
        };
        let state = match &self.attr {
            AttrPath::Gcn { enc, w } => {
                let a = enc.encode(tape, bundles)?;
                let w = tape.param(*w);
                cond.gcn_contrib = Some(tape.matmul(a, w)?);
                let zero = tape.leaf(Tensor::zeros(&[batch, h]));
                DecoderState {
                    h: vec![zero; self.spec.layers],
                    c: vec![zero; self.spec.layers],
                }
            }
            AttrPath::Mlp { enc, attention } => {
                let m = enc.encode(tape, bundles)?;
                let mut state = DecoderState {
                    h: Vec::new(),
                    c: Vec::new(),
                };
                for l in 0..self.spec.layers {
                    state.h.push(tape.slice_cols(m.fused, 2 * l * h, (2 * l + 1) * h)?);
                    state.c.push(tape.slice_cols(m.fused, (2 * l + 1) * h, (2 * l + 2) * h)?);
                }
                if let Some(att) = attention {
                    let w_x = tape.param(att.w_x);
                    cond.projected = Some(tape.matmul(m.grouped, w_x)?);
                    cond.grouped = Some(m.grouped);
                    cond.attributes = enc.num_attributes();
                }
                state
            }
        };
        Ok((cond, state))
    }

    fn maybe_dropout(&self, tape: &mut Tape<'_, F>, x: Var, reg: &mut Option<Regularizer<'_>>) -> Result<Var> {
        match reg {
            Some(r) if r.keep_prob < 1.0 => {
                let mask = dropout_mask(tape.value(x).len(), r.keep_prob, r.rng)?;
                tape.dropout_with_mask(x, mask)
            }
            _ => Ok(x),
        }
    }

    /// Advance every layer by one token per example.
    pub fn step(
        &self,
        tape: &mut Tape<'_, F>,
        cond: &Conditioning,
        state: &DecoderState,
        tokens: &[usize],
        reg: &mut Option<Regularizer<'_>>,
    ) -> Result<(StepOutput, DecoderState)> {
        if tokens.len() != cond.batch {
            return Err(Error::Dimension(format!(
                "{} tokens for a batch of {}",
                tokens.len(),
                cond.batch
            )));
        }
        if state.h.len() != self.spec.layers || state.c.len() != self.spec.layers {
            return Err(Error::Usage("decoder state was not initialised by `condition`".into()));
        }
        let w0 = tape.param(self.lstm[0].w_x);
        let mut contrib = match self.embed {
            None => tape.gather_rows(w0, tokens)?,
            Some(e) => {
                let table = tape.param(e);
                let x = tape.gather_rows(table, tokens)?;
                tape.matmul(x, w0)?
            }
        };
        if let Some(g) = cond.gcn_contrib {
            contrib = tape.add(contrib, g)?;
        }
        let mut next = DecoderState {
            h: Vec::with_capacity(self.spec.layers),
            c: Vec::with_capacity(self.spec.layers),
        };
        let mut below = None;
        for (l, p) in self.lstm.iter().enumerate() {
            if let Some(x) = below {
                let w = tape.param(p.w_x);
                contrib = tape.matmul(x, w)?;
            }
            let (h, c) = lstm_gates(tape, contrib, state.h[l], state.c[l], p.w_h, p.b)?;
            next.h.push(h);
            next.c.push(c);
            below = Some(self.maybe_dropout(tape, h, reg)?);
        }
        let top = below.expect("at least one layer");
        let out = match (self.attention_params(), cond.grouped, cond.projected) {
            (Some(att), Some(grouped), Some(projected)) => {
                let (ctx, alpha) = attend(tape, top, grouped, projected, cond.attributes, &att)?;
                StepOutput {
                    features: tape.concat_cols(&[top, ctx])?,
                    attention: Some(alpha),
                    top_hidden: top,
                }
            }
            (Some(_), ..) => return Err(Error::Usage("attention model conditioned without attributes".into())),
            _ => StepOutput {
                features: top,
                attention: None,
                top_hidden: top,
            },
        };
        Ok((out, next))
    }

    /// Output-layer logits for stacked features.
    pub fn logits(&self, tape: &mut Tape<'_, F>, features: Var) -> Result<Var> {
        let w = tape.param(self.out_w);
        let b = tape.param(self.out_b);
        let z = tape.matmul(features, w)?;
        tape.add_row(z, b)
    }

    /// Output distribution `softmax(W·features + b)`.
    pub fn distribution(&self, tape: &mut Tape<'_, F>, features: Var) -> Result<Var> {
        let z = self.logits(tape, features)?;
        Ok(tape.softmax_rows(z))
    }

    /// Teacher-forced mean cross-entropy over a batch of framed sequences.
    ///
    /// Step `t` reads token `t` and predicts token `t + 1`; positions past a
    /// sequence's end are padding and excluded. Returns the loss node and the
    /// number of scored tokens.
    pub fn batch_loss(
        &self,
        tape: &mut Tape<'_, F>,
        bundles: &[AttributeBundle],
        sequences: &[Vec<usize>],
        mut reg: Option<Regularizer<'_>>,
    ) -> Result<(Var, usize)> {
        if bundles.len() != sequences.len() {
            return Err(Error::Dimension(format!(
                "{} bundles for {} sequences",
                bundles.len(),
                sequences.len()
            )));
        }
        let steps = sequences.iter().map(|s| s.len()).max().unwrap_or(0).saturating_sub(1);
        if steps == 0 {
            return Err(Error::Usage("sequences need at least two symbols".into()));
        }
        if let Some(&bad) = sequences.iter().flatten().find(|&&t| t >= self.spec.vocab_size) {
            return Err(Error::Index {
                index: bad,
                size: self.spec.vocab_size,
            });
        }
        let (cond, mut state) = self.condition(tape, bundles)?;
        let mut features = Vec::with_capacity(steps);
        let mut targets = Vec::with_capacity(steps * bundles.len());
        for t in 0..steps {
            let tokens: Vec<usize> = sequences.iter().map(|s| s.get(t).copied().unwrap_or(PAD)).collect();
            targets.extend(sequences.iter().map(|s| s.get(t + 1).copied()));
            let (out, next) = self.step(tape, &cond, &state, &tokens, &mut reg)?;
            features.push(out.features);
            state = next;
        }
        let stacked = tape.concat_rows(&features)?;
        let logits = self.logits(tape, stacked)?;
        let count = targets.iter().flatten().count();
        Ok((tape.softmax_cross_entropy(logits, &targets)?, count))
    }

    /// `Σ_t log p(y_t | y_<t, a)` for `tokens` following the start symbol.
    pub fn sequence_log_likelihood(&self, bundle: &AttributeBundle, tokens: &[usize]) -> Result<f64> {
        if tokens.is_empty() {
            return Ok(0.0);
        }
        let mut seq = Vec::with_capacity(tokens.len() + 1);
        seq.push(START);
        seq.extend_from_slice(tokens);
        let mut tape = Tape::with_params(&self.params);
        let (loss, count) = self.batch_loss(&mut tape, std::slice::from_ref(bundle), &[seq], None)?;
        Ok(-(count as f64) * tape.value(loss).values()[0].as_f64())
    }

    /// Greedy decoding of a batch in lockstep; ties go to the lowest index.
    pub fn greedy_decode_batch(
        &self,
        bundles: &[AttributeBundle],
        max_len: usize,
        decode: impl Fn(&[usize]) -> String,
    ) -> Result<Vec<GenerationSample>> {
        if max_len < 1 {
            return Err(Error::Config("max_len must be at least 1".into()));
        }
        let mut tape = Tape::with_params(&self.params);
        let (cond, mut state) = self.condition(&mut tape, bundles)?;
        let n = bundles.len();
        let mut tokens = vec![START; n];
        let mut emitted: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut ll = vec![0.0f64; n];
        let mut done = vec![false; n];
        for _ in 0..max_len {
            let (out, next) = self.step(&mut tape, &cond, &state, &tokens, &mut None)?;
            let logits = self.logits(&mut tape, out.features)?;
            let z = tape.value(logits);
            for b in 0..n {
                if done[b] {
                    tokens[b] = END;
                    continue;
                }
                let row = z.row(b);
                let k = argmax_lowest(row);
                ll[b] += log_softmax(row)[k];
                emitted[b].push(k);
                tokens[b] = k;
                done[b] = k == END;
            }
            state = next;
            if done.iter().all(|&d| d) {
                break;
            }
        }
        Ok(bundles
            .iter()
            .zip(emitted)
            .zip(ll)
            .map(|((bundle, token_indices), log_likelihood)| GenerationSample {
                bundle: *bundle,
                text: decode(&token_indices),
                token_indices,
                log_likelihood,
            })
            .collect())
    }

    pub fn greedy_decode(
        &self,
        bundle: &AttributeBundle,
        max_len: usize,
        decode: impl Fn(&[usize]) -> String,
    ) -> Result<GenerationSample> {
        Ok(self
            .greedy_decode_batch(std::slice::from_ref(bundle), max_len, decode)?
            .remove(0))
    }

    /// Decode many bundles, fanning chunks out across workers.
    pub fn greedy_decode_all(
        &self,
        bundles: &[AttributeBundle],
        max_len: usize,
        chunk: usize,
        decode: impl Fn(&[usize]) -> String + Sync + Send,
    ) -> Result<Vec<GenerationSample>> {
        let chunks: Vec<&[AttributeBundle]> = bundles.chunks(chunk.max(1)).collect();
        let parts = par::map(&chunks, |c| self.greedy_decode_batch(c, max_len, &decode));
        let mut out = Vec::with_capacity(bundles.len());
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    }

    /// Output distributions along a teacher-forced sequence, one row per step.
    pub fn step_distributions(&self, bundle: &AttributeBundle, inputs: &[usize]) -> Result<Vec<Vec<F>>> {
        let mut tape = Tape::with_params(&self.params);
        let (cond, mut state) = self.condition(&mut tape, std::slice::from_ref(bundle))?;
        let mut rows = Vec::with_capacity(inputs.len());
        for &tok in inputs {
            let (out, next) = self.step(&mut tape, &cond, &state, &[tok], &mut None)?;
            let p = self.distribution(&mut tape, out.features)?;
            rows.push(tape.value(p).values().to_vec());
            state = next;
        }
        Ok(rows)
    }
}
