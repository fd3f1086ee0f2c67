//! Dense layers with explicit forward caches and backward passes.

use gravview_core::Real;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::config::Activation;
use crate::tensor::Matrix;

/// Named parameter tensors, visited in a fixed order.
pub trait ParamSet<T> {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Matrix<T>)>);
    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Matrix<T>)>);
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// `y = x·W + b` with `W` of shape `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub w: Matrix<T>,
    pub b: Matrix<T>,
}

impl<T: Real> Linear<T> {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self { w: Matrix::zeros(input, output), b: Matrix::zeros(1, output) }
    }

    /// Weights drawn from N(0, 1/input); zero bias.
    pub fn init(input: usize, output: usize, rng: &mut impl Rng) -> Self {
        let normal = Normal::new(0.0, 1.0 / (input.max(1) as f64).sqrt()).expect("finite std");
        let w = Matrix::from_fn(input, output, |_, _| T::lit(normal.sample(rng)));
        Self { w, b: Matrix::zeros(1, output) }
    }

    pub fn input_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn forward(&self, x: &Matrix<T>) -> Matrix<T> {
        let mut y = x.matmul(&self.w);
        y.add_row(&self.b);
        y
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: &Matrix<T>, dy: &Matrix<T>, grad: &mut Self) -> Matrix<T> {
        grad.w.add_assign(&x.t_matmul(dy));
        grad.b.add_assign(&dy.sum_rows());
        dy.matmul_t(&self.w)
    }
}

impl<T: Real> ParamSet<T> for Linear<T> {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Matrix<T>)>) {
        out.push((join(prefix, "w"), &self.w));
        out.push((join(prefix, "b"), &self.b));
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Matrix<T>)>) {
        out.push((join(prefix, "w"), &mut self.w));
        out.push((join(prefix, "b"), &mut self.b));
    }
}

const GELU_C: f64 = 0.7978845608028654; // √(2/π)
const GELU_A: f64 = 0.044715;

pub fn gelu<T: Real>(x: T) -> T {
    let u = T::lit(GELU_C) * (x + T::lit(GELU_A) * x * x * x);
    T::half() * x * (T::one() + u.tanh())
}

pub fn gelu_grad<T: Real>(x: T) -> T {
    let u = T::lit(GELU_C) * (x + T::lit(GELU_A) * x * x * x);
    let th = u.tanh();
    let du = T::lit(GELU_C) * (T::one() + T::lit(3.0 * GELU_A) * x * x);
    T::half() * (T::one() + th) + T::half() * x * (T::one() - th * th) * du
}

fn activate<T: Real>(act: Activation, x: &Matrix<T>) -> Matrix<T> {
    match act {
        Activation::Gelu => x.map(gelu),
        Activation::Identity => x.clone(),
    }
}

/// Two linear layers with an activation in between.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp2<T> {
    pub l1: Linear<T>,
    pub l2: Linear<T>,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct Mlp2Cache<T> {
    x: Matrix<T>,
    pre: Matrix<T>,
    hidden: Matrix<T>,
}

impl<T: Real> Mlp2<T> {
    pub fn zeros(input: usize, hidden: usize, output: usize, activation: Activation) -> Self {
        Self { l1: Linear::zeros(input, hidden), l2: Linear::zeros(hidden, output), activation }
    }

    pub fn init(input: usize, hidden: usize, output: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        Self { l1: Linear::init(input, hidden, rng), l2: Linear::init(hidden, output, rng), activation }
    }

    pub fn forward(&self, x: &Matrix<T>) -> Matrix<T> {
        self.forward_cached(x).0
    }

    pub fn forward_cached(&self, x: &Matrix<T>) -> (Matrix<T>, Mlp2Cache<T>) {
        let pre = self.l1.forward(x);
        let hidden = activate(self.activation, &pre);
        let y = self.l2.forward(&hidden);
        (y, Mlp2Cache { x: x.clone(), pre, hidden })
    }

    pub fn backward(&self, cache: &Mlp2Cache<T>, dy: &Matrix<T>, grad: &mut Self) -> Matrix<T> {
        let mut dh = self.l2.backward(&cache.hidden, dy, &mut grad.l2);
        if self.activation == Activation::Gelu {
            for (d, &p) in dh.data_mut().iter_mut().zip(cache.pre.data()) {
                *d *= gelu_grad(p);
            }
        }
        self.l1.backward(&cache.x, &dh, &mut grad.l1)
    }
}

impl<T: Real> ParamSet<T> for Mlp2<T> {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Matrix<T>)>) {
        self.l1.visit(&join(prefix, "l1"), out);
        self.l2.visit(&join(prefix, "l2"), out);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Matrix<T>)>) {
        self.l1.visit_mut(&join(prefix, "l1"), out);
        self.l2.visit_mut(&join(prefix, "l2"), out);
    }
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Per-row normalisation with learned gain and shift.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm<T> {
    pub gamma: Matrix<T>,
    pub beta: Matrix<T>,
}

#[derive(Debug, Clone)]
pub struct LayerNormCache<T> {
    xhat: Matrix<T>,
    inv_std: Vec<T>,
}

impl<T: Real> LayerNorm<T> {
    pub fn new(dim: usize) -> Self {
        Self { gamma: Matrix::from_fn(1, dim, |_, _| T::one()), beta: Matrix::zeros(1, dim) }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { gamma: Matrix::zeros(1, dim), beta: Matrix::zeros(1, dim) }
    }

    pub fn forward(&self, x: &Matrix<T>) -> Matrix<T> {
        self.forward_cached(x).0
    }

    pub fn forward_cached(&self, x: &Matrix<T>) -> (Matrix<T>, LayerNormCache<T>) {
        let n = T::from_usize_lossy(x.cols());
        let mut xhat = Matrix::zeros(x.rows(), x.cols());
        let mut y = Matrix::zeros(x.rows(), x.cols());
        let mut inv_std = Vec::with_capacity(x.rows());
        for i in 0..x.rows() {
            let row = x.row(i);
            let mean = row.iter().copied().sum::<T>() / n;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
            let inv = T::one() / (var + T::lit(LAYER_NORM_EPS)).sqrt();
            inv_std.push(inv);
            for j in 0..x.cols() {
                let h = (row[j] - mean) * inv;
                xhat.set(i, j, h);
                y.set(i, j, h * self.gamma.get(0, j) + self.beta.get(0, j));
            }
        }
        (y, LayerNormCache { xhat, inv_std })
    }

    pub fn backward(&self, cache: &LayerNormCache<T>, dy: &Matrix<T>, grad: &mut Self) -> Matrix<T> {
        let (rows, cols) = dy.shape();
        let n = T::from_usize_lossy(cols);
        let mut dx = Matrix::zeros(rows, cols);
        for i in 0..rows {
            let mut dxhat = vec![T::zero(); cols];
            for j in 0..cols {
                let g = dy.get(i, j);
                let h = cache.xhat.get(i, j);
                grad.gamma.data_mut()[j] += g * h;
                grad.beta.data_mut()[j] += g;
                dxhat[j] = g * self.gamma.get(0, j);
            }
            let mean_d = dxhat.iter().copied().sum::<T>() / n;
            let mean_dh = dxhat.iter().zip(cache.xhat.row(i)).map(|(&d, &h)| d * h).sum::<T>() / n;
            for j in 0..cols {
                let h = cache.xhat.get(i, j);
                dx.set(i, j, cache.inv_std[i] * (dxhat[j] - mean_d - h * mean_dh));
            }
        }
        dx
    }
}

impl<T: Real> ParamSet<T> for LayerNorm<T> {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Matrix<T>)>) {
        out.push((join(prefix, "gamma"), &self.gamma));
        out.push((join(prefix, "beta"), &self.beta));
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Matrix<T>)>) {
        out.push((join(prefix, "gamma"), &mut self.gamma));
        out.push((join(prefix, "beta"), &mut self.beta));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gelu_reference_values() {
        assert_eq!(gelu(0.0f64), 0.0);
        assert!((gelu(1.0f64) - 0.8411919906082768).abs() < 1e-12);
        assert!((gelu(-1.0f64) + 0.15880800939172324).abs() < 1e-12);
    }

    #[test]
    fn gelu_grad_matches_difference() {
        for x in [-3.0f64, -0.7, 0.0, 0.4, 2.5] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_grad(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn layer_norm_rows_are_standardised() {
        let ln = LayerNorm::<f64>::new(4);
        let x = Matrix::from_vec(2, 4, vec![1.0, 2.0, 3.0, 4.0, -5.0, 0.0, 5.0, 10.0]).unwrap();
        let y = ln.forward(&x);
        for i in 0..2 {
            let mean: f64 = y.row(i).iter().sum::<f64>() / 4.0;
            let var: f64 = y.row(i).iter().map(|v| v * v).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-4);
        }
    }
}
