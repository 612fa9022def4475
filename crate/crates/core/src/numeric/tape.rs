//! Reverse-mode differentiation over rank-2 tensors.
//!
//! A [`Tape`] records every operation in evaluation order; [`Tape::backward`]
//! walks it in reverse, accumulating adjoints. Parameters are borrowed from a
//! [`ParamStore`] rather than copied, and their gradients come back in a
//! [`Gradients`] value that can be folded into the store once the tape is gone.

use std::collections::HashMap;

use super::tensor::{gemm_nn, sigmoid, softmax_row_in_place};
use super::{ParamId, ParamStore, Real, Tensor, LOG_FLOOR};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Value<F> {
    Owned(Tensor<F>),
    Param(ParamId),
}

enum Op<F> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, F),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    SoftmaxRows(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    GatherRows(Var, Vec<usize>),
    Dropout(Var, Vec<F>),
    SumAll(Var),
    MeanAll(Var),
    SumCols(Var),
    Reshape(Var),
    GroupAddBroadcast(Var, Var, usize),
    GroupWeightedSum(Var, Var),
    UnfoldRows(Var, usize, usize),
    GroupMaxRows(Var, Vec<usize>),
    SoftmaxCrossEntropy {
        logits: Var,
        targets: Vec<Option<usize>>,
        probs: Vec<F>,
        count: usize,
    },
    CrossEntropy(Var, Vec<usize>),
}

struct Node<F> {
    value: Value<F>,
    op: Op<F>,
}

pub struct Tape<'p, F: Real = f32> {
    store: Option<&'p ParamStore<F>>,
    nodes: Vec<Node<F>>,
    params: HashMap<ParamId, Var>,
}

impl<'p, F: Real> Default for Tape<'p, F> {
    fn default() -> Self {
        Self::new()
    }
}

fn dims<F: Real>(t: &Tensor<F>) -> (usize, usize) {
    (t.rows(), t.cols())
}

fn mismatch<F: Real>(op: &str, a: &Tensor<F>, b: &Tensor<F>) -> Error {
    Error::Dimension(format!("{op} {:?} and {:?}", a.shape(), b.shape()))
}

impl<'p, F: Real> Tape<'p, F> {
    pub fn new() -> Self {
        Tape {
            store: None,
            nodes: Vec::new(),
            params: HashMap::new(),
        }
    }

    pub fn with_params(store: &'p ParamStore<F>) -> Self {
        Tape {
            store: Some(store),
            nodes: Vec::new(),
            params: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<F> {
        match &self.nodes[v.0].value {
            Value::Owned(t) => t,
            Value::Param(id) => self
                .store
                .expect("param node without a store")
                .tensor(*id),
        }
    }

    fn push(&mut self, value: Tensor<F>, op: Op<F>) -> Var {
        self.nodes.push(Node {
            value: Value::Owned(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    /// An input or constant. Gradients are still tracked for it.
    pub fn leaf(&mut self, t: Tensor<F>) -> Var {
        self.push(t, Op::Leaf)
    }

    /// Reference a stored parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        assert!(self.store.is_some(), "tape was built without a parameter store");
        self.nodes.push(Node {
            value: Value::Param(id),
            op: Op::Leaf,
        });
        let v = Var(self.nodes.len() - 1);
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let ((m, k), (k2, n)) = (dims(ta), dims(tb));
        if k != k2 {
            return Err(mismatch("matmul", ta, tb));
        }
        let out = gemm_nn(ta.values(), tb.values(), m, k, n);
        Ok(self.push(Tensor::from_parts(vec![m, n], out), Op::MatMul(a, b)))
    }

    fn zip(&mut self, a: Var, b: Var, name: &str, f: impl Fn(F, F) -> F, op: Op<F>) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(mismatch(name, ta, tb));
        }
        let out = ta
            .values()
            .iter()
            .zip(tb.values())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = ta.shape().to_vec();
        Ok(self.push(Tensor::from_parts(shape, out), op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    /// `a + bias` with a `1×n` bias broadcast over rows.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(bias));
        let (_, n) = dims(ta);
        if tb.len() != n {
            return Err(mismatch("add_row", ta, tb));
        }
        let mut out = ta.values().to_vec();
        for row in out.chunks_mut(n) {
            row.iter_mut().zip(tb.values()).for_each(|(o, &b)| *o = *o + b);
        }
        let shape = ta.shape().to_vec();
        Ok(self.push(Tensor::from_parts(shape, out), Op::AddRow(a, bias)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let s = F::from_f64(s);
        let t = self.value(a);
        let out = t.values().iter().map(|&x| x * s).collect();
        let shape = t.shape().to_vec();
        self.push(Tensor::from_parts(shape, out), Op::Scale(a, s))
    }

    fn map(&mut self, a: Var, f: impl Fn(F) -> F, op: Op<F>) -> Var {
        let t = self.value(a);
        let out = t.values().iter().map(|&x| f(x)).collect();
        let shape = t.shape().to_vec();
        self.push(Tensor::from_parts(shape, out), op)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, |x| x.tanh(), Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.map(a, |x| x.max(F::zero()), Op::Relu(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let (_, c) = dims(t);
        let mut out = t.values().to_vec();
        out.chunks_mut(c).for_each(softmax_row_in_place);
        let shape = t.shape().to_vec();
        self.push(Tensor::from_parts(shape, out), Op::SoftmaxRows(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.value(parts[0]).rows();
        let mut width = 0;
        for &p in parts {
            let t = self.value(p);
            if t.rows() != rows {
                return Err(mismatch("concat_cols", self.value(parts[0]), t));
            }
            width += t.cols();
        }
        let mut out = Vec::with_capacity(rows * width);
        for r in 0..rows {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(r));
            }
        }
        Ok(self.push(
            Tensor::from_parts(vec![rows, width], out),
            Op::ConcatCols(parts.to_vec()),
        ))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = self.value(parts[0]).cols();
        let mut out = Vec::new();
        for &p in parts {
            let t = self.value(p);
            if t.cols() != cols {
                return Err(mismatch("concat_rows", self.value(parts[0]), t));
            }
            out.extend_from_slice(t.values());
        }
        let rows = out.len() / cols;
        Ok(self.push(
            Tensor::from_parts(vec![rows, cols], out),
            Op::ConcatRows(parts.to_vec()),
        ))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let t = self.value(a);
        let (r, c) = dims(t);
        if start >= end || end > c {
            return Err(Error::Dimension(format!(
                "column slice {start}..{end} of {:?}",
                t.shape()
            )));
        }
        let mut out = Vec::with_capacity(r * (end - start));
        for row in 0..r {
            out.extend_from_slice(&t.row(row)[start..end]);
        }
        Ok(self.push(
            Tensor::from_parts(vec![r, end - start], out),
            Op::SliceCols(a, start),
        ))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let t = self.value(a);
        let (r, c) = dims(t);
        if start >= end || end > r {
            return Err(Error::Dimension(format!(
                "row slice {start}..{end} of {:?}",
                t.shape()
            )));
        }
        let out = t.values()[start * c..end * c].to_vec();
        Ok(self.push(
            Tensor::from_parts(vec![end - start, c], out),
            Op::SliceRows(a, start),
        ))
    }

    /// Row lookup; equivalent to a one-hot matrix times `table`.
    pub fn gather_rows(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        let t = self.value(table);
        let (r, c) = dims(t);
        let mut out = Vec::with_capacity(indices.len() * c);
        for &i in indices {
            if i >= r {
                return Err(Error::Index { index: i, size: r });
            }
            out.extend_from_slice(t.row(i));
        }
        if indices.is_empty() {
            return Err(Error::Dimension("gather of zero rows".into()));
        }
        Ok(self.push(
            Tensor::from_parts(vec![indices.len(), c], out),
            Op::GatherRows(table, indices.to_vec()),
        ))
    }

    /// Multiply by a precomputed (already rescaled) dropout mask.
    pub fn dropout_with_mask(&mut self, a: Var, mask: Vec<F>) -> Result<Var> {
        let t = self.value(a);
        if mask.len() != t.len() {
            return Err(Error::Dimension(format!(
                "dropout mask of length {} for {:?}",
                mask.len(),
                t.shape()
            )));
        }
        let out = t.values().iter().zip(&mask).map(|(&x, &m)| x * m).collect();
        let shape = t.shape().to_vec();
        Ok(self.push(Tensor::from_parts(shape, out), Op::Dropout(a, mask)))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s = self.value(a).values().iter().copied().sum();
        self.push(Tensor::from_parts(vec![1, 1], vec![s]), Op::SumAll(a))
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let s: F = t.values().iter().copied().sum();
        let m = s / F::from_f64(t.len() as f64);
        self.push(Tensor::from_parts(vec![1, 1], vec![m]), Op::MeanAll(a))
    }

    /// Row sums as an `m×1` column.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let (r, c) = dims(t);
        let out = t.values().chunks(c).map(|row| row.iter().copied().sum()).collect();
        self.push(Tensor::from_parts(vec![r, 1], out), Op::SumCols(a))
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        let t = self.value(a).clone().reshape(shape)?;
        Ok(self.push(t, Op::Reshape(a)))
    }

    /// Row `r` of `a` (shape `(B·group)×d`) plus row `r / group` of `b` (`B×d`).
    pub fn group_add_broadcast(&mut self, a: Var, b: Var, group: usize) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let ((ra, ca), (rb, cb)) = (dims(ta), dims(tb));
        if ca != cb || ra != rb * group {
            return Err(mismatch("group_add_broadcast", ta, tb));
        }
        let mut out = ta.values().to_vec();
        for (r, row) in out.chunks_mut(ca).enumerate() {
            row.iter_mut()
                .zip(tb.row(r / group))
                .for_each(|(o, &y)| *o = *o + y);
        }
        Ok(self.push(
            Tensor::from_parts(vec![ra, ca], out),
            Op::GroupAddBroadcast(a, b, group),
        ))
    }

    /// `out[b] = Σ_j weights[b, j] · x[b·n + j]` for weights `B×n`, x `(B·n)×m`.
    pub fn group_weighted_sum(&mut self, weights: Var, x: Var) -> Result<Var> {
        let (tw, tx) = (self.value(weights), self.value(x));
        let ((bsz, n), (rx, m)) = (dims(tw), dims(tx));
        if rx != bsz * n {
            return Err(mismatch("group_weighted_sum", tw, tx));
        }
        let mut out = vec![F::zero(); bsz * m];
        for b in 0..bsz {
            let dst = &mut out[b * m..(b + 1) * m];
            for j in 0..n {
                let w = tw.at(b, j);
                dst.iter_mut()
                    .zip(tx.row(b * n + j))
                    .for_each(|(o, &v)| *o = *o + w * v);
            }
        }
        Ok(self.push(
            Tensor::from_parts(vec![bsz, m], out),
            Op::GroupWeightedSum(weights, x),
        ))
    }

    /// Sliding windows of `width` consecutive rows inside each group of `group` rows,
    /// flattened into one row per window.
    pub fn unfold_rows(&mut self, x: Var, group: usize, width: usize) -> Result<Var> {
        let t = self.value(x);
        let (r, c) = dims(t);
        if group == 0 || width == 0 || width > group || r % group != 0 {
            return Err(Error::Dimension(format!(
                "unfold width {width} over groups of {group} rows in {:?}",
                t.shape()
            )));
        }
        let groups = r / group;
        let per = group - width + 1;
        let mut out = Vec::with_capacity(groups * per * width * c);
        for g in 0..groups {
            for p in 0..per {
                let start = (g * group + p) * c;
                out.extend_from_slice(&t.values()[start..start + width * c]);
            }
        }
        Ok(self.push(
            Tensor::from_parts(vec![groups * per, width * c], out),
            Op::UnfoldRows(x, group, width),
        ))
    }

    /// Column-wise max over each block of `group` rows.
    pub fn group_max_rows(&mut self, x: Var, group: usize) -> Result<Var> {
        let t = self.value(x);
        let (r, c) = dims(t);
        if group == 0 || r % group != 0 {
            return Err(Error::Dimension(format!(
                "max over groups of {group} rows in {:?}",
                t.shape()
            )));
        }
        let groups = r / group;
        let mut out = vec![F::neg_infinity(); groups * c];
        let mut arg = vec![0usize; groups * c];
        for g in 0..groups {
            for p in 0..group {
                let row = g * group + p;
                for (j, &v) in t.row(row).iter().enumerate() {
                    if v > out[g * c + j] {
                        out[g * c + j] = v;
                        arg[g * c + j] = row * c + j;
                    }
                }
            }
        }
        Ok(self.push(
            Tensor::from_parts(vec![groups, c], out),
            Op::GroupMaxRows(x, arg),
        ))
    }

    /// Mean negative log-likelihood of row-wise softmax over `logits`.
    ///
    /// Rows whose target is `None` are padding and excluded from the mean.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[Option<usize>]) -> Result<Var> {
        let t = self.value(logits);
        let (r, v) = dims(t);
        if targets.len() != r {
            return Err(Error::Dimension(format!(
                "{} targets for {r} logit rows",
                targets.len()
            )));
        }
        let mut probs = t.values().to_vec();
        probs.chunks_mut(v).for_each(softmax_row_in_place);
        let mut total = 0.0f64;
        let mut count = 0usize;
        for (row, target) in targets.iter().enumerate() {
            if let Some(k) = *target {
                if k >= v {
                    return Err(Error::Index { index: k, size: v });
                }
                total -= probs[row * v + k].as_f64().max(LOG_FLOOR).ln();
                count += 1;
            }
        }
        let loss = if count == 0 { 0.0 } else { total / count as f64 };
        Ok(self.push(
            Tensor::from_parts(vec![1, 1], vec![F::from_f64(loss)]),
            Op::SoftmaxCrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
                count,
            },
        ))
    }

    /// Mean negative log-probability of `targets` under probability rows.
    pub fn cross_entropy(&mut self, probs: Var, targets: &[usize]) -> Result<Var> {
        let loss = super::cross_entropy(self.value(probs), targets)?;
        Ok(self.push(
            Tensor::from_parts(vec![1, 1], vec![F::from_f64(loss)]),
            Op::CrossEntropy(probs, targets.to_vec()),
        ))
    }

    /// Adjoints of a scalar `loss` with respect to every leaf.
    pub fn backward(&self, loss: Var) -> Result<Gradients<F>> {
        if self.value(loss).len() != 1 {
            return Err(Error::Dimension(format!(
                "backward needs a scalar, got {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<F>>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        grads[loss.0] = Some(vec![F::one()]);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.backprop_node(idx, &g, &mut grads);
        }

        let params = self.params.iter().map(|(&id, &v)| (id, v)).collect();
        Ok(Gradients { grads, params })
    }

    fn backprop_node(&self, idx: usize, g: &[F], grads: &mut [Option<Vec<F>>]) {
        let out = self.value(Var(idx));
        macro_rules! acc {
            ($v:expr) => {{
                let v: Var = $v;
                slot(grads, v, self.value(v).len())
            }};
        }
        match &self.nodes[idx].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let ((m, k), (_, n)) = (dims(ta), dims(tb));
                let da = acc!(*a);
                F::gemm(
                    m, n, k, F::one(), g, n as isize, 1, tb.values(), 1, n as isize, F::one(),
                    da, k as isize, 1,
                );
                let db = acc!(*b);
                F::gemm(
                    k, m, n, F::one(), ta.values(), 1, k as isize, g, n as isize, 1, F::one(),
                    db, n as isize, 1,
                );
            }
            Op::Add(a, b) => {
                add_into(acc!(*a), g);
                add_into(acc!(*b), g);
            }
            Op::Sub(a, b) => {
                add_into(acc!(*a), g);
                acc!(*b).iter_mut().zip(g).for_each(|(d, &x)| *d = *d - x);
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let da = acc!(*a);
                for ((d, &x), &y) in da.iter_mut().zip(g).zip(tb.values()) {
                    *d = *d + x * y;
                }
                let db = acc!(*b);
                for ((d, &x), &y) in db.iter_mut().zip(g).zip(ta.values()) {
                    *d = *d + x * y;
                }
            }
            Op::AddRow(a, bias) => {
                add_into(acc!(*a), g);
                let n = out.cols();
                let db = acc!(*bias);
                for row in g.chunks(n) {
                    add_into(db, row);
                }
            }
            Op::Scale(a, s) => {
                acc!(*a).iter_mut().zip(g).for_each(|(d, &x)| *d = *d + x * *s);
            }
            Op::Tanh(a) => {
                let da = acc!(*a);
                for ((d, &x), &y) in da.iter_mut().zip(g).zip(out.values()) {
                    *d = *d + x * (F::one() - y * y);
                }
            }
            Op::Sigmoid(a) => {
                let da = acc!(*a);
                for ((d, &x), &y) in da.iter_mut().zip(g).zip(out.values()) {
                    *d = *d + x * y * (F::one() - y);
                }
            }
            Op::Relu(a) => {
                let ta = self.value(*a);
                let da = acc!(*a);
                for ((d, &x), &v) in da.iter_mut().zip(g).zip(ta.values()) {
                    if v > F::zero() {
                        *d = *d + x;
                    }
                }
            }
            Op::SoftmaxRows(a) => {
                let c = out.cols();
                let da = acc!(*a);
                for ((drow, grow), yrow) in da.chunks_mut(c).zip(g.chunks(c)).zip(out.values().chunks(c)) {
                    let dot: F = grow.iter().zip(yrow).map(|(&x, &y)| x * y).sum();
                    for ((d, &x), &y) in drow.iter_mut().zip(grow).zip(yrow) {
                        *d = *d + y * (x - dot);
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let width = out.cols();
                let mut offset = 0;
                for &p in parts {
                    let c = self.value(p).cols();
                    let dp = acc!(p);
                    for (r, drow) in dp.chunks_mut(c).enumerate() {
                        add_into(drow, &g[r * width + offset..r * width + offset + c]);
                    }
                    offset += c;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.value(p).len();
                    add_into(acc!(p), &g[offset..offset + len]);
                    offset += len;
                }
            }
            Op::SliceCols(a, start) => {
                let c = self.value(*a).cols();
                let w = out.cols();
                let da = acc!(*a);
                for (r, grow) in g.chunks(w).enumerate() {
                    add_into(&mut da[r * c + start..r * c + start + w], grow);
                }
            }
            Op::SliceRows(a, start) => {
                let c = out.cols();
                let da = acc!(*a);
                add_into(&mut da[start * c..start * c + g.len()], g);
            }
            Op::GatherRows(table, indices) => {
                let c = out.cols();
                let dt = acc!(*table);
                for (grow, &i) in g.chunks(c).zip(indices) {
                    add_into(&mut dt[i * c..(i + 1) * c], grow);
                }
            }
            Op::Dropout(a, mask) => {
                let da = acc!(*a);
                for ((d, &x), &m) in da.iter_mut().zip(g).zip(mask) {
                    *d = *d + x * m;
                }
            }
            Op::SumAll(a) => {
                let s = g[0];
                acc!(*a).iter_mut().for_each(|d| *d = *d + s);
            }
            Op::MeanAll(a) => {
                let da = acc!(*a);
                let s = g[0] / F::from_f64(da.len() as f64);
                da.iter_mut().for_each(|d| *d = *d + s);
            }
            Op::SumCols(a) => {
                let c = self.value(*a).cols();
                let da = acc!(*a);
                for (drow, &x) in da.chunks_mut(c).zip(g) {
                    drow.iter_mut().for_each(|d| *d = *d + x);
                }
            }
            Op::Reshape(a) => add_into(acc!(*a), g),
            Op::GroupAddBroadcast(a, b, group) => {
                add_into(acc!(*a), g);
                let c = out.cols();
                let db = acc!(*b);
                for (r, grow) in g.chunks(c).enumerate() {
                    let dst = &mut db[(r / group) * c..(r / group + 1) * c];
                    add_into(dst, grow);
                }
            }
            Op::GroupWeightedSum(w, x) => {
                let (tw, tx) = (self.value(*w), self.value(*x));
                let ((bsz, n), (_, m)) = (dims(tw), dims(tx));
                let dw = acc!(*w);
                for b in 0..bsz {
                    let grow = &g[b * m..(b + 1) * m];
                    for j in 0..n {
                        let dot: F = grow.iter().zip(tx.row(b * n + j)).map(|(&p, &q)| p * q).sum();
                        dw[b * n + j] = dw[b * n + j] + dot;
                    }
                }
                let dx = acc!(*x);
                for b in 0..bsz {
                    let grow = &g[b * m..(b + 1) * m];
                    for j in 0..n {
                        let wv = tw.at(b, j);
                        let dst = &mut dx[(b * n + j) * m..(b * n + j + 1) * m];
                        dst.iter_mut().zip(grow).for_each(|(d, &q)| *d = *d + wv * q);
                    }
                }
            }
            Op::UnfoldRows(x, group, width) => {
                let c = self.value(*x).cols();
                let per = group - width + 1;
                let span = width * c;
                let dx = acc!(*x);
                for (w, grow) in g.chunks(span).enumerate() {
                    let (gi, p) = (w / per, w % per);
                    let start = (gi * group + p) * c;
                    add_into(&mut dx[start..start + span], grow);
                }
            }
            Op::GroupMaxRows(x, arg) => {
                let dx = acc!(*x);
                for (&src, &x) in arg.iter().zip(g) {
                    dx[src] = dx[src] + x;
                }
            }
            Op::SoftmaxCrossEntropy {
                logits,
                targets,
                probs,
                count,
            } => {
                if *count == 0 {
                    return;
                }
                let v = self.value(*logits).cols();
                let scale = g[0] / F::from_f64(*count as f64);
                let dl = acc!(*logits);
                for (row, target) in targets.iter().enumerate() {
                    let Some(k) = *target else { continue };
                    let drow = &mut dl[row * v..(row + 1) * v];
                    for (j, d) in drow.iter_mut().enumerate() {
                        let p = probs[row * v + j];
                        let y = if j == k { F::one() } else { F::zero() };
                        *d = *d + scale * (p - y);
                    }
                }
            }
            Op::CrossEntropy(p, targets) => {
                let tp = self.value(*p);
                let v = tp.cols();
                let t = F::from_f64(targets.len() as f64);
                let floor = F::from_f64(LOG_FLOOR);
                let dp = acc!(*p);
                for (row, &k) in targets.iter().enumerate() {
                    let prob = tp.values()[row * v + k];
                    if prob > floor {
                        let i = row * v + k;
                        dp[i] = dp[i] - g[0] / (t * prob);
                    }
                }
            }
        }
    }
}

fn slot<F: Real>(grads: &mut [Option<Vec<F>>], v: Var, len: usize) -> &mut Vec<F> {
    grads[v.0].get_or_insert_with(|| vec![F::zero(); len])
}

fn add_into<F: Real>(dst: &mut [F], src: &[F]) {
    dst.iter_mut().zip(src).for_each(|(d, &s)| *d = *d + s);
}

/// Adjoints of leaf nodes produced by [`Tape::backward`].
pub struct Gradients<F = f32> {
    grads: Vec<Option<Vec<F>>>,
    params: Vec<(ParamId, Var)>,
}

impl<F: Real> Gradients<F> {
    /// Gradient of a leaf, or `None` if the loss does not depend on it.
    pub fn wrt(&self, v: Var) -> Option<&[F]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    pub fn param(&self, id: ParamId) -> Option<&[F]> {
        self.params
            .iter()
            .find(|(p, _)| *p == id)
            .and_then(|(_, v)| self.wrt(*v))
    }

    /// Add parameter gradients into `store`. Every parameter ends with a
    /// populated gradient slot; unused ones receive zeros.
    pub fn accumulate_into(&self, store: &mut ParamStore<F>) -> Result<()> {
        let mut map: HashMap<ParamId, &[F]> = HashMap::new();
        for &(id, v) in &self.params {
            if let Some(g) = self.wrt(v) {
                map.insert(id, g);
            }
        }
        let ids: Vec<ParamId> = store.ids().collect();
        for id in ids {
            let p = store.get_mut(id);
            match map.get(&id) {
                Some(g) => p.tensor.accumulate_grad(g)?,
                None => {
                    if p.tensor.grad().is_none() {
                        let n = p.tensor.len();
                        p.tensor.set_grad(vec![F::zero(); n])?;
                    }
                }
            }
        }
        Ok(())
    }
}
