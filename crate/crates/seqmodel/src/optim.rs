//! First-order optimisers over [`ModelParams`].

use gravview_core::Real;

use crate::model::ModelParams;
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub config: AdamConfig,
    m: Vec<Matrix<T>>,
    v: Vec<Matrix<T>>,
    step: i32,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig, params: &ModelParams<T>) -> Self {
        let zeros: Vec<Matrix<T>> = params.tensors().iter().map(|(_, m)| Matrix::zeros(m.rows(), m.cols())).collect();
        Self { config, m: zeros.clone(), v: zeros, step: 0 }
    }

    pub fn step(&mut self, params: &mut ModelParams<T>, grads: &ModelParams<T>) {
        self.step += 1;
        let c = self.config;
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let bias1 = T::one() - b1.powi(self.step);
        let bias2 = T::one() - b2.powi(self.step);
        let lr = T::lit(c.lr);
        let eps = T::lit(c.eps);
        let grads = grads.tensors();
        for (((_, p), (_, g)), (m, v)) in params.tensors_mut().into_iter().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for (((p, &g), m), v) in p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                let mh = *m / bias1;
                let vh = *v / bias2;
                *p -= lr * mh / (vh.sqrt() + eps);
            }
        }
    }
}

/// Plain gradient descent step `p ← p − lr·g`.
pub fn sgd_step<T: Real>(params: &mut ModelParams<T>, grads: &ModelParams<T>, lr: f64) {
    let lr = T::lit(lr);
    for ((_, p), (_, g)) in params.tensors_mut().into_iter().zip(grads.tensors()) {
        for (p, &g) in p.data_mut().iter_mut().zip(g.data()) {
            *p -= lr * g;
        }
    }
}
