//! Plain-loop forward pass of the generators, written against parameter
//! names only. Used to check the tape-based implementation.

#![allow(dead_code)]

use revgen::encoding::{AttributeBundle, Level};
use revgen::genmodels::{Architecture, ModelSpec};
use revgen::numeric::ParamStore;

fn sig(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn row(store: &ParamStore<f64>, name: &str, r: usize) -> Vec<f64> {
    store.by_name(name).unwrap().tensor.row(r).to_vec()
}

/// `x · W` for the named matrix.
fn vecmat(store: &ParamStore<f64>, x: &[f64], name: &str) -> Vec<f64> {
    let w = &store.by_name(name).unwrap().tensor;
    assert_eq!(w.rows(), x.len(), "{name}");
    (0..w.cols())
        .map(|j| x.iter().enumerate().map(|(i, xi)| xi * w.at(i, j)).sum())
        .collect()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Per-step output distributions for `inputs` fed one at a time.
pub fn distributions(spec: &ModelSpec, store: &ParamStore<f64>, b: &AttributeBundle, inputs: &[usize]) -> Vec<Vec<f64>> {
    let h = spec.hidden_dim;
    let mut hs = vec![vec![0.0; h]; spec.layers];
    let mut cs = vec![vec![0.0; h]; spec.layers];
    let mut attr_contrib = None;
    let mut xs: Vec<Vec<f64>> = Vec::new();
    let rating = b.rating as usize - 1;
    match spec.architecture {
        Architecture::Gcn => {
            let mut a = row(store, "attr.user", b.user);
            a.extend(row(store, "attr.item", b.item));
            let mut onehot = vec![0.0; 5];
            onehot[rating] = 1.0;
            a.extend(onehot);
            if spec.use_helpful {
                a.push(b.helpful_ratio);
            }
            attr_contrib = Some(vecmat(store, &a, "lstm0.w_attr"));
        }
        _ => {
            xs.push(row(store, "attr.user", b.user));
            xs.push(row(store, "attr.item", b.item));
            xs.push(row(store, "attr.rating", rating));
            if spec.use_helpful {
                let bins = spec.helpful_bins;
                let bin = ((b.helpful_ratio * bins as f64) as usize).min(bins - 1);
                xs.push(row(store, "attr.helpful", bin));
            }
            let cat: Vec<f64> = xs.concat();
            let pre = add(&vecmat(store, &cat, "attr.fuse.w"), &row(store, "attr.fuse.b", 0));
            let a: Vec<f64> = pre.iter().map(|v| v.tanh()).collect();
            for l in 0..spec.layers {
                hs[l] = a[2 * l * h..(2 * l + 1) * h].to_vec();
                cs[l] = a[(2 * l + 1) * h..(2 * l + 2) * h].to_vec();
            }
        }
    }
    let mut out = Vec::new();
    for &tok in inputs {
        let mut contrib = match spec.level {
            Level::Char => row(store, "lstm0.w_x", tok),
            Level::Word => vecmat(store, &row(store, "embed", tok), "lstm0.w_x"),
        };
        if let Some(a) = &attr_contrib {
            contrib = add(&contrib, a);
        }
        for l in 0..spec.layers {
            if l > 0 {
                contrib = vecmat(store, &hs[l - 1], &format!("lstm{l}.w_x"));
            }
            let pre = add(
                &add(&contrib, &vecmat(store, &hs[l], &format!("lstm{l}.w_h"))),
                &row(store, &format!("lstm{l}.b"), 0),
            );
            for u in 0..h {
                let cand = pre[u].tanh();
                let f = sig(pre[h + u]);
                let i = sig(pre[2 * h + u]);
                let o = sig(pre[3 * h + u]);
                cs[l][u] = f * cs[l][u] + i * cand;
                hs[l][u] = o * cs[l][u].tanh();
            }
        }
        let top = hs[spec.layers - 1].clone();
        let mut feat = top.clone();
        if spec.architecture == Architecture::Attention {
            let hp = vecmat(store, &top, "att.w_h");
            let v = &store.by_name("att.v").unwrap().tensor;
            let scores: Vec<f64> = xs
                .iter()
                .map(|x| {
                    let e = add(&hp, &vecmat(store, x, "att.w_x"));
                    e.iter().enumerate().map(|(j, ej)| ej.tanh() * v.at(j, 0)).sum()
                })
                .collect();
            let alpha = softmax(&scores);
            let mut ctx = vec![0.0; spec.attr_dim];
            for (a, x) in alpha.iter().zip(&xs) {
                for (c, xv) in ctx.iter_mut().zip(x) {
                    *c += a * xv;
                }
            }
            feat.extend(ctx);
        }
        let z = add(&vecmat(store, &feat, "out.w"), &row(store, "out.b", 0));
        out.push(softmax(&z));
    }
    out
}
