//! Central finite-difference oracle.
//!
//! Only forward evaluations are used here, so the check is independent of the
//! tape's backward rules.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use revgen::numeric::{ParamStore, Tape, Tensor, Var};

pub const STEP: f64 = 1e-6;

/// Relative error with a small floor so near-zero gradients compare absolutely.
pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

pub fn central_difference(f: &dyn Fn(&[f64]) -> f64, x: &[f64], i: usize) -> f64 {
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[i] += STEP;
    xm[i] -= STEP;
    (f(&xp) - f(&xm)) / (2.0 * STEP)
}

pub fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Check `build` (inputs → output) by contracting its output with random
/// weights. Returns the largest relative error over all input entries.
pub fn check_op(
    inputs: &[Tensor<f64>],
    build: &dyn Fn(&mut Tape<f64>, &[Var]) -> Var,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probe = {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = build(&mut tape, &vars);
        random_tensor(tape.value(out).shape(), &mut rng)
    };
    let scalar = |tape: &mut Tape<f64>, vars: &[Var]| {
        let out = build(tape, vars);
        let w = tape.leaf(probe.clone());
        let prod = tape.mul(out, w).unwrap();
        tape.sum_all(prod)
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let loss = scalar(&mut tape, &vars);
    let grads = tape.backward(loss).unwrap();

    let mut worst = 0.0f64;
    for (k, input) in inputs.iter().enumerate() {
        let analytic: Vec<f64> = grads
            .wrt(vars[k])
            .map(|g| g.to_vec())
            .unwrap_or_else(|| vec![0.0; input.len()]);
        let eval = |x: &[f64]| {
            let mut tape = Tape::new();
            let vars: Vec<Var> = inputs
                .iter()
                .enumerate()
                .map(|(j, t)| {
                    if j == k {
                        tape.leaf(Tensor::new(t.shape().to_vec(), x.to_vec()).unwrap())
                    } else {
                        tape.leaf(t.clone())
                    }
                })
                .collect();
            let l = scalar(&mut tape, &vars);
            tape.value(l).values()[0]
        };
        for (i, &a) in analytic.iter().enumerate().take(input.len()) {
            let n = central_difference(&eval, input.values(), i);
            worst = worst.max(rel_err(a, n));
        }
    }
    worst
}

/// Check analytic parameter gradients against finite differences of `loss`.
/// At most `per_param` entries of each parameter are probed.
pub fn check_params(
    store: &ParamStore<f64>,
    analytic: &dyn Fn(&ParamStore<f64>) -> ParamStore<f64>,
    loss: &dyn Fn(&ParamStore<f64>) -> f64,
    per_param: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let with_grads = analytic(store);
    let mut worst = 0.0f64;
    for id in store.ids() {
        let p = store.get(id);
        let g = with_grads
            .get(id)
            .tensor
            .grad()
            .expect("analytic gradient populated")
            .to_vec();
        let n = p.tensor.len();
        let picks: Vec<usize> = if n <= per_param {
            (0..n).collect()
        } else {
            (0..per_param).map(|_| rng.gen_range(0..n)).collect()
        };
        for i in picks {
            let eval = |x: &[f64]| {
                let mut s = store.clone();
                s.get_mut(id).tensor.values_mut()[i] = x[0];
                loss(&s)
            };
            let fd = central_difference(&eval, &[p.tensor.values()[i]], 0);
            let e = rel_err(g[i], fd);
            if e > worst {
                worst = e;
            }
        }
    }
    worst
}
