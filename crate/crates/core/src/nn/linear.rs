use rand::Rng;

use super::ops::{matmul_a_bt, matmul_acc, matmul_at_b_acc};
use super::tensor::{Module, Real, Tensor};
use crate::error::{Error, Result};

/// Glorot-uniform initial values in `±√(6/(fan_in+fan_out))`.
pub fn glorot<T: Real, R: Rng>(rng: &mut R, n: usize, fan_in: usize, fan_out: usize) -> Vec<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| T::of(rng.gen_range(-limit..=limit))).collect()
}

/// Fully connected layer `y = xW + b` with `W` stored `[in × out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub w: Tensor<T>,
    pub b: Tensor<T>,
}

impl<T: Real> Linear<T> {
    pub fn new<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let w = Tensor::from_vec(&[inputs, outputs], glorot(rng, inputs * outputs, inputs, outputs)).unwrap();
        Linear { w, b: Tensor::zeros(&[outputs]) }
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Linear { w: Tensor::zeros(&[inputs, outputs]), b: Tensor::zeros(&[outputs]) }
    }

    pub fn inputs(&self) -> usize {
        self.w.shape()[0]
    }

    pub fn outputs(&self) -> usize {
        self.w.shape()[1]
    }

    fn rows(&self, x: &[T]) -> Result<usize> {
        let k = self.inputs();
        if x.len() % k != 0 {
            return Err(Error::ShapeMismatch(format!("input length {} is not a multiple of {k}", x.len())));
        }
        Ok(x.len() / k)
    }

    /// Forward pass over `rows` input vectors laid out row-major.
    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        let (k, n) = (self.inputs(), self.outputs());
        let m = self.rows(x)?;
        let mut y: Vec<T> = self.b.data.iter().copied().cycle().take(m * n).collect();
        matmul_acc(x, &self.w.data, &mut y, m, k, n);
        Ok(y)
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx` when asked.
    pub fn backward(&self, x: &[T], dy: &[T], grad: &mut Linear<T>, need_dx: bool) -> Result<Option<Vec<T>>> {
        let (k, n) = (self.inputs(), self.outputs());
        let m = self.rows(x)?;
        if dy.len() != m * n {
            return Err(Error::ShapeMismatch(format!("upstream gradient length {} != {}", dy.len(), m * n)));
        }
        matmul_at_b_acc(x, dy, &mut grad.w.data, m, k, n);
        for row in dy.chunks_exact(n) {
            for (g, &d) in grad.b.data.iter_mut().zip(row) {
                *g += d;
            }
        }
        Ok(need_dx.then(|| matmul_a_bt(dy, &self.w.data, m, n, k)))
    }
}

impl<T: Real> Module<T> for Linear<T> {
    fn tensors(&self) -> Vec<(String, &Tensor<T>)> {
        vec![("w".into(), &self.w), ("b".into(), &self.b)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![&mut self.w, &mut self.b]
    }
}

/// Prefixes child tensor names, `prefix.name`.
pub fn named<'a, T: Real, M: Module<T>>(prefix: &str, m: &'a M) -> Vec<(String, &'a Tensor<T>)> {
    m.tensors().into_iter().map(|(n, t)| (format!("{prefix}.{n}"), t)).collect()
}
