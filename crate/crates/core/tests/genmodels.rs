mod common;

use common::cases::{bundles, combos, small_spec, unrolled_errors};
use common::oracle;
use revgen::encoding::{Level, END, START};
use revgen::genmodels::{attend, AttentionParams, Architecture, Generator};
use revgen::numeric::{cross_entropy, ParamStore, Tape, Tensor};

#[test]
fn tape_matches_plain_loop_forward() {
    for (arch, level, helpful) in combos() {
        let spec = small_spec(arch, level, helpful, 3, 2);
        let g = Generator::<f64>::new(spec.clone(), 21).unwrap();
        let inputs = [START, 4, 9, 5, 7];
        for b in bundles() {
            let got = g.step_distributions(&b, &inputs).unwrap();
            let want = oracle::distributions(&spec, &g.params, &b, &inputs);
            for (gr, wr) in got.iter().zip(&want) {
                for (x, y) in gr.iter().zip(wr) {
                    assert!((x - y).abs() < 1e-12, "{}: {x} vs {y}", spec.label());
                }
            }
        }
    }
}

#[test]
fn two_dim_context_first_step_matches_hand_chain() {
    let spec = small_spec(Architecture::Context, Level::Char, false, 2, 2);
    let g = Generator::<f64>::new(spec.clone(), 5).unwrap();
    let b = bundles()[0];
    let got = g.step_distributions(&b, &[START]).unwrap();
    let want = oracle::distributions(&spec, &g.params, &b, &[START]);
    for (x, y) in got[0].iter().zip(&want[0]) {
        assert!((x - y).abs() < 1e-14);
    }
}

#[test]
fn two_attribute_attention_by_hand() {
    let mut store = ParamStore::<f64>::new();
    let p = AttentionParams {
        w_h: store.add("w_h", Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()).unwrap(),
        w_x: store.add("w_x", Tensor::from_rows(&[vec![0.5, -0.5], vec![0.25, 1.0]]).unwrap()).unwrap(),
        v: store.add("v", Tensor::from_rows(&[vec![2.0], vec![-1.0]]).unwrap()).unwrap(),
    };
    let hv = [0.3, -0.2];
    let x1 = [1.0, 0.0];
    let x2 = [0.0, 2.0];
    // W_x x_j: x1 → [0.5, -0.5]; x2 → [0.5, 2.0].
    let s1 = 2.0 * (0.3f64 + 0.5).tanh() - (-0.2f64 - 0.5).tanh();
    let s2 = 2.0 * (0.3f64 + 0.5).tanh() - (-0.2f64 + 2.0).tanh();
    let a1 = s1.exp() / (s1.exp() + s2.exp());
    let a2 = 1.0 - a1;
    let ctx = [a1 * x1[0] + a2 * x2[0], a1 * x1[1] + a2 * x2[1]];

    let mut t = Tape::with_params(&store);
    let h = t.leaf(Tensor::from_rows(&[hv.to_vec()]).unwrap());
    let xs = t.leaf(Tensor::from_rows(&[x1.to_vec(), x2.to_vec()]).unwrap());
    let w_x = t.param(p.w_x);
    let proj = t.matmul(xs, w_x).unwrap();
    let (c, alpha) = attend(&mut t, h, xs, proj, 2, &p).unwrap();
    let al = t.value(alpha).values();
    assert!((al[0] - a1).abs() < 1e-14 && (al[1] - a2).abs() < 1e-14);
    for (g, e) in t.value(c).values().iter().zip(ctx) {
        assert!((g - e).abs() < 1e-14);
    }
}

#[test]
fn five_step_unrolled_gradients() {
    for (label, err) in unrolled_errors() {
        assert!(err < 1e-3, "{label}: relative error {err:e}");
    }
}

#[test]
fn log_likelihood_is_negative_length_times_cross_entropy() {
    for (arch, level, helpful) in combos() {
        let spec = small_spec(arch, level, helpful, 4, 3);
        let g = Generator::<f64>::new(spec, 41).unwrap();
        let b = bundles()[1];
        let targets = [6usize, 4, 9, 9, END];
        let ll = g.sequence_log_likelihood(&b, &targets).unwrap();
        let mut inputs = vec![START];
        inputs.extend_from_slice(&targets[..targets.len() - 1]);
        let rows = g.step_distributions(&b, &inputs).unwrap();
        let probs = Tensor::from_rows(&rows).unwrap();
        let ce = cross_entropy(&probs, &targets).unwrap();
        assert!((ll + targets.len() as f64 * ce).abs() < 1e-5);
    }
}

#[test]
fn greedy_output_is_argmax_consistent() {
    for (arch, level, helpful) in combos() {
        let spec = small_spec(arch, level, helpful, 4, 3);
        let g = Generator::<f64>::new(spec, 51).unwrap();
        for b in bundles() {
            let s = g.greedy_decode(&b, 15, |t| format!("{t:?}")).unwrap();
            let mut inputs = vec![START];
            inputs.extend_from_slice(&s.token_indices[..s.token_indices.len() - 1]);
            let rows = g.step_distributions(&b, &inputs).unwrap();
            for (row, &k) in rows.iter().zip(&s.token_indices) {
                assert!(row.iter().all(|&p| p <= row[k]));
                // Swapping the emitted token for any other cannot raise the likelihood.
                assert!(row.iter().all(|&p| p.ln() <= row[k].ln()));
            }
            let ll = g.sequence_log_likelihood(&b, &s.token_indices).unwrap();
            assert!((ll - s.log_likelihood).abs() < 1e-9);
            assert!(s.token_indices.last() == Some(&END) || s.token_indices.len() == 15);
        }
    }
}
