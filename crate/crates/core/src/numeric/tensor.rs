use serde::{Deserialize, Serialize};

use super::{Real, LOG_FLOOR};
use crate::error::{Error, Result};

/// Dense row-major tensor with an optional gradient slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor<F = f32> {
    shape: Vec<usize>,
    values: Vec<F>,
    grad: Option<Vec<F>>,
}

impl<F: Real> Tensor<F> {
    pub fn new(shape: Vec<usize>, values: Vec<F>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::Dimension(format!(
                "shape {shape:?} must be nonempty with positive dimensions"
            )));
        }
        let n: usize = shape.iter().product();
        if n != values.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} holds {n} values, got {}",
                values.len()
            )));
        }
        Ok(Tensor {
            shape,
            values,
            grad: None,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            values: vec![F::zero(); n],
            grad: None,
        }
    }

    pub fn filled(shape: &[usize], v: F) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            values: vec![v; n],
            grad: None,
        }
    }

    /// Rank-2 tensor from equally long rows.
    pub fn from_rows(rows: &[Vec<F>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::new(vec![r, c], rows.concat())
    }

    pub fn from_f64(shape: Vec<usize>, values: &[f64]) -> Result<Self> {
        Self::new(shape, values.iter().map(|&v| F::from_f64(v)).collect())
    }

    pub(crate) fn from_parts(shape: Vec<usize>, values: Vec<F>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        Tensor {
            shape,
            values,
            grad: None,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [F] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<F> {
        self.values
    }

    /// Rows of a rank-2 view; higher ranks fold leading dimensions.
    pub fn rows(&self) -> usize {
        self.values.len() / self.cols()
    }

    pub fn cols(&self) -> usize {
        *self.shape.last().unwrap_or(&1)
    }

    pub fn row(&self, r: usize) -> &[F] {
        let c = self.cols();
        &self.values[r * c..(r + 1) * c]
    }

    pub fn at(&self, r: usize, c: usize) -> F {
        self.values[r * self.cols() + c]
    }

    pub fn grad(&self) -> Option<&[F]> {
        self.grad.as_deref()
    }

    pub fn grad_mut(&mut self) -> Option<&mut [F]> {
        self.grad.as_deref_mut()
    }

    pub fn set_grad(&mut self, grad: Vec<F>) -> Result<()> {
        if grad.len() != self.values.len() {
            return Err(Error::Dimension(format!(
                "gradient of length {} for tensor of length {}",
                grad.len(),
                self.values.len()
            )));
        }
        self.grad = Some(grad);
        Ok(())
    }

    /// Add into the gradient slot, creating it if absent.
    pub fn accumulate_grad(&mut self, g: &[F]) -> Result<()> {
        match &mut self.grad {
            Some(existing) if existing.len() == g.len() => {
                existing.iter_mut().zip(g).for_each(|(e, &x)| *e = *e + x);
                Ok(())
            }
            Some(existing) => Err(Error::Dimension(format!(
                "gradient of length {} for slot of length {}",
                g.len(),
                existing.len()
            ))),
            None => self.set_grad(g.to_vec()),
        }
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.values.len() || shape.is_empty() {
            return Err(Error::Dimension(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn cast<G: Real>(&self) -> Tensor<G> {
        Tensor {
            shape: self.shape.clone(),
            values: self.values.iter().map(|v| G::from_f64(v.as_f64())).collect(),
            grad: self
                .grad
                .as_ref()
                .map(|g| g.iter().map(|v| G::from_f64(v.as_f64())).collect()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Sigmoid,
    SoftmaxRows,
}

#[inline]
pub(crate) fn sigmoid<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

pub(crate) fn softmax_row_in_place<F: Real>(row: &mut [F]) {
    let max = row.iter().copied().fold(F::neg_infinity(), F::max);
    let mut sum = F::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum = sum + *v;
    }
    for v in row.iter_mut() {
        *v = *v / sum;
    }
}

/// `c = a·b` for row-major `m×k` and `k×n` slices.
pub(crate) fn gemm_nn<F: Real>(a: &[F], b: &[F], m: usize, k: usize, n: usize) -> Vec<F> {
    let mut c = vec![F::zero(); m * n];
    F::gemm(
        m,
        k,
        n,
        F::one(),
        a,
        k as isize,
        1,
        b,
        n as isize,
        1,
        F::zero(),
        &mut c,
        n as isize,
        1,
    );
    c
}

fn rank2<F: Real>(t: &Tensor<F>, what: &str) -> Result<(usize, usize)> {
    match t.shape() {
        [r, c] => Ok((*r, *c)),
        s => Err(Error::Dimension(format!("{what} must be rank 2, got {s:?}"))),
    }
}

/// Matrix product of rank-2 tensors.
pub fn matmul<F: Real>(a: &Tensor<F>, b: &Tensor<F>) -> Result<Tensor<F>> {
    let (m, k) = rank2(a, "left operand")?;
    let (k2, n) = rank2(b, "right operand")?;
    if k != k2 {
        return Err(Error::Dimension(format!(
            "matmul {:?} × {:?}: inner dimensions differ",
            a.shape(),
            b.shape()
        )));
    }
    Ok(Tensor::from_parts(
        vec![m, n],
        gemm_nn(a.values(), b.values(), m, k, n),
    ))
}

pub fn activate<F: Real>(x: &Tensor<F>, kind: Activation) -> Result<Tensor<F>> {
    let mut out = x.values().to_vec();
    match kind {
        Activation::Tanh => out.iter_mut().for_each(|v| *v = v.tanh()),
        Activation::Sigmoid => out.iter_mut().for_each(|v| *v = sigmoid(*v)),
        Activation::SoftmaxRows => {
            let (_, c) = rank2(x, "softmax input")?;
            out.chunks_mut(c).for_each(softmax_row_in_place);
        }
    }
    Ok(Tensor::from_parts(x.shape().to_vec(), out))
}

/// Mean negative log-probability of `targets` under row distributions.
pub fn cross_entropy<F: Real>(probs: &Tensor<F>, targets: &[usize]) -> Result<f64> {
    let (t, v) = rank2(probs, "probability rows")?;
    if targets.len() != t {
        return Err(Error::Dimension(format!(
            "{} targets for {t} probability rows",
            targets.len()
        )));
    }
    let mut total = 0.0;
    for (r, &target) in targets.iter().enumerate() {
        if target >= v {
            return Err(Error::Index {
                index: target,
                size: v,
            });
        }
        total -= probs.at(r, target).as_f64().max(LOG_FLOOR).ln();
    }
    Ok(total / t as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn t(rows: &[&[f64]]) -> Tensor<f64> {
        Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn shape_must_match_values() {
        assert!(Tensor::<f32>::new(vec![2, 2], vec![0.0; 3]).is_err());
        assert!(Tensor::<f32>::new(vec![], vec![]).is_err());
        assert!(Tensor::<f32>::new(vec![2, 0], vec![]).is_err());
    }

    #[test]
    fn matmul_identity_and_dot() {
        let i = t(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let v = t(&[&[3.0], &[4.0]]);
        assert_eq!(matmul(&i, &v).unwrap().values(), &[3.0, 4.0]);
        let r = t(&[&[1.0, 2.0]]);
        assert_eq!(matmul(&r, &v).unwrap().values(), &[11.0]);
    }

    #[test]
    fn matmul_mismatch_names_shapes() {
        let a = Tensor::<f32>::zeros(&[2, 3]);
        let b = Tensor::<f32>::zeros(&[2, 3]);
        let msg = matmul(&a, &b).unwrap_err().to_string();
        assert!(msg.contains("[2, 3] × [2, 3]"), "{msg}");
    }

    #[test]
    fn activations_at_zero() {
        let z = t(&[&[0.0, 0.0, 0.0, 0.0]]);
        assert_eq!(activate(&z, Activation::Tanh).unwrap().values()[0], 0.0);
        assert_eq!(activate(&z, Activation::Sigmoid).unwrap().values()[0], 0.5);
        let s = activate(&z, Activation::SoftmaxRows).unwrap();
        assert_eq!(s.values(), &[0.25; 4]);
    }

    #[test]
    fn softmax_is_stable_for_large_logits() {
        let s = activate(&t(&[&[1000.0, 0.0]]), Activation::SoftmaxRows).unwrap();
        assert!(s.is_finite());
        assert_abs_diff_eq!(s.values()[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.values()[1], 0.0, epsilon = 1e-12);
        let s32 = activate(&t(&[&[1000.0, 0.0]]).cast::<f32>(), Activation::SoftmaxRows).unwrap();
        assert!(s32.is_finite());
    }

    #[test]
    fn sigmoid_saturates_without_nan() {
        assert_eq!(sigmoid(-1000.0f32), 0.0);
        assert_eq!(sigmoid(1000.0f32), 1.0);
    }

    #[test]
    fn cross_entropy_fixtures() {
        let onehot = t(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(cross_entropy(&onehot, &[0, 1]).unwrap(), 0.0);
        let uniform = t(&[&[0.25; 4], &[0.25; 4]]);
        assert_abs_diff_eq!(
            cross_entropy(&uniform, &[3, 1]).unwrap(),
            4f64.ln(),
            epsilon = 1e-12
        );
        let rows = t(&[&[0.7, 0.3], &[0.2, 0.8]]);
        let expected = -(0.7f64.ln() + 0.8f64.ln()) / 2.0;
        assert_abs_diff_eq!(cross_entropy(&rows, &[0, 1]).unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, 0.2899, epsilon = 1e-4);
    }

    #[test]
    fn cross_entropy_rejects_bad_target() {
        let rows = t(&[&[0.5, 0.5]]);
        assert!(matches!(
            cross_entropy(&rows, &[2]),
            Err(Error::Index { index: 2, size: 2 })
        ));
    }

    #[test]
    fn cross_entropy_floors_zero_probability() {
        let rows = t(&[&[1.0, 0.0]]);
        let ce = cross_entropy(&rows, &[1]).unwrap();
        assert!(ce.is_finite());
        assert_abs_diff_eq!(ce, -(LOG_FLOOR.ln()), epsilon = 1e-9);
    }
}
