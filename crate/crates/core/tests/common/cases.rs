//! Seeded gradient-check instances shared by the integration and acceptance tests.

#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use revgen::encoding::{AttributeBundle, EncoderConfig, Level, END, START};
use revgen::genmodels::{Architecture, Generator, ModelSpec};
use revgen::numeric::{ParamStore, Tape, Tensor, Var};
use revgen::recsys::{DeepConn, DeepConnConfig};

use super::gradcheck::{check_op, check_params, random_tensor};

pub type Build = Box<dyn Fn(&mut Tape<f64>, &[Var]) -> Var>;

pub struct OpCase {
    pub name: &'static str,
    pub inputs: Vec<Tensor<f64>>,
    pub build: Build,
}

impl OpCase {
    pub fn error(&self) -> f64 {
        check_op(&self.inputs, &*self.build, 99)
    }
}

pub fn rt(shape: &[usize], seed: u64) -> Tensor<f64> {
    random_tensor(shape, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn case(name: &'static str, inputs: Vec<Tensor<f64>>, build: impl Fn(&mut Tape<f64>, &[Var]) -> Var + 'static) -> OpCase {
    OpCase {
        name,
        inputs,
        build: Box::new(build),
    }
}

/// One instance per differentiable tape operation.
pub fn op_cases() -> Vec<OpCase> {
    let e = || vec![rt(&[3, 5], 3), rt(&[3, 5], 4)];
    let b = || vec![rt(&[3, 4], 9)];
    vec![
        case("matmul", vec![rt(&[3, 4], 1), rt(&[4, 2], 2)], |t, v| t.matmul(v[0], v[1]).unwrap()),
        case("add", e(), |t, v| t.add(v[0], v[1]).unwrap()),
        case("sub", e(), |t, v| t.sub(v[0], v[1]).unwrap()),
        case("mul", e(), |t, v| t.mul(v[0], v[1]).unwrap()),
        case("mul_self", vec![rt(&[3, 5], 3)], |t, v| t.mul(v[0], v[0]).unwrap()),
        case("scale", vec![rt(&[3, 5], 3)], |t, v| t.scale(v[0], -2.5)),
        case("tanh", vec![rt(&[3, 5], 3)], |t, v| t.tanh(v[0])),
        case("sigmoid", vec![rt(&[3, 5], 3)], |t, v| t.sigmoid(v[0])),
        case("relu", vec![rt(&[3, 5], 3)], |t, v| t.relu(v[0])),
        case("add_row", vec![rt(&[4, 3], 5), rt(&[1, 3], 6)], |t, v| t.add_row(v[0], v[1]).unwrap()),
        case("softmax_rows", vec![rt(&[3, 6], 7)], |t, v| t.softmax_rows(v[0])),
        case("concat_cols", vec![rt(&[3, 2], 8), rt(&[3, 4], 9)], |t, v| t.concat_cols(&[v[0], v[1], v[0]]).unwrap()),
        case("concat_rows", vec![rt(&[2, 4], 10), rt(&[3, 4], 9)], |t, v| t.concat_rows(&[v[0], v[1]]).unwrap()),
        case("slice_cols", b(), |t, v| t.slice_cols(v[0], 1, 3).unwrap()),
        case("slice_rows", b(), |t, v| t.slice_rows(v[0], 1, 3).unwrap()),
        case("gather_rows", b(), |t, v| t.gather_rows(v[0], &[2, 0, 2, 1]).unwrap()),
        case("dropout", b(), |t, v| {
            t.dropout_with_mask(v[0], (0..12).map(|i| (i % 3) as f64 * 0.5).collect()).unwrap()
        }),
        case("sum_all", b(), |t, v| t.sum_all(v[0])),
        case("mean_all", b(), |t, v| t.mean_all(v[0])),
        case("sum_cols", b(), |t, v| t.sum_cols(v[0])),
        case("reshape", b(), |t, v| t.reshape(v[0], vec![6, 2]).unwrap()),
        case("group_add_broadcast", vec![rt(&[6, 3], 11), rt(&[2, 3], 12)], |t, v| {
            t.group_add_broadcast(v[0], v[1], 3).unwrap()
        }),
        case("group_weighted_sum", vec![rt(&[2, 3], 13), rt(&[6, 4], 14)], |t, v| {
            t.group_weighted_sum(v[0], v[1]).unwrap()
        }),
        case("unfold_rows", vec![rt(&[10, 2], 15)], |t, v| t.unfold_rows(v[0], 5, 3).unwrap()),
        case("group_max_rows", vec![rt(&[8, 3], 16)], |t, v| t.group_max_rows(v[0], 4).unwrap()),
        case("softmax_cross_entropy", vec![rt(&[4, 5], 17)], |t, v| {
            t.softmax_cross_entropy(v[0], &[Some(1), None, Some(4), Some(0)]).unwrap()
        }),
        case("cross_entropy", vec![rt(&[3, 4], 18)], |t, v| {
            let p = t.softmax_rows(v[0]);
            t.cross_entropy(p, &[3, 0, 2]).unwrap()
        }),
    ]
}

pub fn small_spec(arch: Architecture, level: Level, use_helpful: bool, hidden: usize, attr: usize) -> ModelSpec {
    let enc = EncoderConfig {
        word_embedding_dim: 5,
        attr_embedding_dim: attr,
        helpful_bins: 4,
        ..EncoderConfig::default()
    };
    let mut s = ModelSpec::new(arch, level, use_helpful, &enc, 10, 3, 3).with_hidden_dim(hidden);
    if level == Level::Char {
        s.token_dim = 12;
    }
    s
}

pub fn bundles() -> Vec<AttributeBundle> {
    vec![
        AttributeBundle { user: 2, item: 0, rating: 4, helpful_ratio: 0.6 },
        AttributeBundle { user: 0, item: 1, rating: 1, helpful_ratio: 1.0 },
    ]
}

pub fn combos() -> Vec<(Architecture, Level, bool)> {
    let mut v = Vec::new();
    for arch in Architecture::ALL {
        for level in [Level::Char, Level::Word] {
            for h in [false, true] {
                v.push((arch, level, h));
            }
        }
    }
    v
}

fn analytic_grads(store: &ParamStore<f64>, loss: &dyn Fn(&mut Tape<f64>) -> Var) -> ParamStore<f64> {
    let mut out = store.clone();
    let grads = {
        let mut t = Tape::with_params(store);
        let l = loss(&mut t);
        t.backward(l).unwrap()
    };
    grads.accumulate_into(&mut out).unwrap();
    out
}

/// Worst relative error through a five-step unrolled generator, per combination.
pub fn unrolled_errors() -> Vec<(String, f64)> {
    combos()
        .into_iter()
        .map(|(arch, level, helpful)| {
            let spec = small_spec(arch, level, helpful, 3, 2);
            let g = Generator::<f64>::new(spec.clone(), 31).unwrap();
            let seqs = vec![vec![START, 4, 6, 8, 5, END], vec![START, 7, 9, END]];
            let bs = bundles();
            let value = |s: &ParamStore<f64>| {
                let m = Generator::from_params(spec.clone(), s.clone()).unwrap();
                let mut t = Tape::with_params(&m.params);
                let (l, _) = m.batch_loss(&mut t, &bs, &seqs, None).unwrap();
                t.value(l).values()[0]
            };
            let analytic = |s: &ParamStore<f64>| {
                let m = Generator::from_params(spec.clone(), s.clone()).unwrap();
                analytic_grads(s, &|t| m.batch_loss(t, &bs, &seqs, None).unwrap().0)
            };
            (spec.label(), check_params(&g.params, &analytic, &value, 12, 3))
        })
        .collect()
}

pub fn tiny_deepconn() -> DeepConnConfig {
    DeepConnConfig {
        embedding_dim: 3,
        filter_count: 4,
        kernel_width: 2,
        latent_dim: 3,
        document_length: 6,
        fm_factor_dim: 2,
        ..Default::default()
    }
}

/// Worst relative error of the MSE loss through both towers and the
/// factorization machine.
pub fn deepconn_error() -> f64 {
    let mut m = DeepConn::<f64>::new(tiny_deepconn(), 9).unwrap();
    // Larger weights keep the ReLUs and max-pool winners away from ties.
    for p in m.params.iter_mut() {
        p.tensor.values_mut().iter_mut().for_each(|v| *v *= 10.0);
    }
    let users = vec![vec![1, 2, 3, 4, 0, 0], vec![5, 6, 7, 8, 8, 1]];
    let items = vec![vec![2, 2, 5, 0, 0, 0], vec![3, 1, 4, 1, 5, 6]];
    let targets = [4.0, 2.0];
    let cfg = m.config().clone();
    let value = |s: &ParamStore<f64>| {
        let mut mm = DeepConn::<f64>::new(cfg.clone(), 9).unwrap();
        mm.params = s.clone();
        let mut t = Tape::with_params(&mm.params);
        let l = mm.loss(&mut t, &users, &items, &targets).unwrap();
        t.value(l).values()[0]
    };
    let analytic = |s: &ParamStore<f64>| {
        let mut mm = DeepConn::<f64>::new(cfg.clone(), 9).unwrap();
        mm.params = s.clone();
        analytic_grads(s, &|t| mm.loss(t, &users, &items, &targets).unwrap())
    };
    check_params(&m.params, &analytic, &value, 20, 5)
}

/// Largest deviation of a softmax row sum from 1.
pub fn softmax_row_sum_error() -> f64 {
    let mut tape = Tape::new();
    let x = tape.leaf(rt(&[20, 9], 20));
    let scaled = tape.scale(x, 30.0);
    let y = tape.softmax_rows(scaled);
    (0..20)
        .map(|r| (tape.value(y).row(r).iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max)
}
