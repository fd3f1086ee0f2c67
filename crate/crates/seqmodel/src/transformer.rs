//! Pre-norm encoder stack.

use gravview_core::Real;
use rand::Rng;

use crate::attention::{Attention, AttentionCache};
use crate::config::{Activation, ModelConfig};
use crate::nn::{join, LayerNorm, LayerNormCache, Mlp2, Mlp2Cache, ParamSet};
use crate::rope::rope_frequencies;
use crate::tensor::Matrix;
use crate::SeqError;

/// `x + Attn(LN(x))`, then `+ MLP(LN(·))`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayer<T> {
    pub ln1: LayerNorm<T>,
    pub attn: Attention<T>,
    pub ln2: LayerNorm<T>,
    pub mlp: Mlp2<T>,
}

#[derive(Debug, Clone)]
pub struct LayerCache<T> {
    ln1: LayerNormCache<T>,
    pub attn: AttentionCache<T>,
    ln2: LayerNormCache<T>,
    mlp: Mlp2Cache<T>,
}

impl<T: Real> EncoderLayer<T> {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        Self {
            ln1: LayerNorm::zeros(cfg.model_dim),
            attn: Attention::zeros(cfg.model_dim, cfg.heads),
            ln2: LayerNorm::zeros(cfg.model_dim),
            mlp: Mlp2::zeros(cfg.model_dim, cfg.mlp_hidden, cfg.model_dim, Activation::Gelu),
        }
    }

    pub fn init(cfg: &ModelConfig, rng: &mut impl Rng) -> Self {
        Self {
            ln1: LayerNorm::new(cfg.model_dim),
            attn: Attention::init(cfg.model_dim, cfg.heads, rng),
            ln2: LayerNorm::new(cfg.model_dim),
            mlp: Mlp2::init(cfg.model_dim, cfg.mlp_hidden, cfg.model_dim, Activation::Gelu, rng),
        }
    }

    pub fn forward(&self, x: &Matrix<T>, positions: &[i64], band: usize, freqs: &[T]) -> (Matrix<T>, LayerCache<T>) {
        let (h1, ln1) = self.ln1.forward_cached(x);
        let (a, attn) = self.attn.forward(&h1, positions, band, freqs);
        let mut x2 = x.clone();
        x2.add_assign(&a);
        let (h2, ln2) = self.ln2.forward_cached(&x2);
        let (m, mlp) = self.mlp.forward_cached(&h2);
        x2.add_assign(&m);
        (x2, LayerCache { ln1, attn, ln2, mlp })
    }

    pub fn backward(&self, cache: &LayerCache<T>, dy: &Matrix<T>, freqs: &[T], grad: &mut Self) -> Matrix<T> {
        let dh2 = self.mlp.backward(&cache.mlp, dy, &mut grad.mlp);
        let mut dx2 = dy.clone();
        dx2.add_assign(&self.ln2.backward(&cache.ln2, &dh2, &mut grad.ln2));
        let dh1 = self.attn.backward(&cache.attn, &dx2, freqs, &mut grad.attn);
        let mut dx = dx2;
        dx.add_assign(&self.ln1.backward(&cache.ln1, &dh1, &mut grad.ln1));
        dx
    }
}

impl<T: Real> ParamSet<T> for EncoderLayer<T> {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Matrix<T>)>) {
        self.ln1.visit(&join(prefix, "ln1"), out);
        self.attn.visit(&join(prefix, "attn"), out);
        self.ln2.visit(&join(prefix, "ln2"), out);
        self.mlp.visit(&join(prefix, "mlp"), out);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Matrix<T>)>) {
        self.ln1.visit_mut(&join(prefix, "ln1"), out);
        self.attn.visit_mut(&join(prefix, "attn"), out);
        self.ln2.visit_mut(&join(prefix, "ln2"), out);
        self.mlp.visit_mut(&join(prefix, "mlp"), out);
    }
}

pub type StackCache<T> = Vec<LayerCache<T>>;

fn check_positions(tokens: usize, positions: &[i64]) -> Result<(), SeqError> {
    if tokens == positions.len() {
        Ok(())
    } else {
        Err(SeqError::ShapeMismatch { what: "positions", expected: tokens, got: positions.len() })
    }
}

fn check_layers<T>(cfg: &ModelConfig, layers: &[EncoderLayer<T>]) -> Result<(), SeqError> {
    if layers.len() == cfg.layers {
        Ok(())
    } else {
        Err(SeqError::ShapeMismatch { what: "encoder layers", expected: cfg.layers, got: layers.len() })
    }
}

pub fn transformer_forward_cached<T: Real>(
    cfg: &ModelConfig,
    layers: &[EncoderLayer<T>],
    tokens: &Matrix<T>,
    positions: &[i64],
) -> Result<(Matrix<T>, StackCache<T>), SeqError> {
    check_layers(cfg, layers)?;
    check_positions(tokens.rows(), positions)?;
    if tokens.cols() != cfg.model_dim {
        return Err(SeqError::ShapeMismatch { what: "token width", expected: cfg.model_dim, got: tokens.cols() });
    }
    let freqs = rope_frequencies::<T>(cfg.head_dim(), cfg.rope_base);
    let mut x = tokens.clone();
    let mut caches = Vec::with_capacity(layers.len());
    for layer in layers {
        let (y, cache) = layer.forward(&x, positions, cfg.train_len, &freqs);
        x = y;
        caches.push(cache);
    }
    Ok((x, caches))
}

pub fn transformer_forward<T: Real>(
    cfg: &ModelConfig,
    layers: &[EncoderLayer<T>],
    tokens: &Matrix<T>,
    positions: &[i64],
) -> Result<Matrix<T>, SeqError> {
    Ok(transformer_forward_cached(cfg, layers, tokens, positions)?.0)
}

/// Accumulates parameter gradients and returns the gradient with respect
/// to the input tokens.
pub fn transformer_backward<T: Real>(
    cfg: &ModelConfig,
    layers: &[EncoderLayer<T>],
    caches: &StackCache<T>,
    d_out: &Matrix<T>,
    grads: &mut [EncoderLayer<T>],
) -> Matrix<T> {
    let freqs = rope_frequencies::<T>(cfg.head_dim(), cfg.rope_base);
    let mut d = d_out.clone();
    for ((layer, cache), grad) in layers.iter().zip(caches).zip(grads.iter_mut()).rev() {
        d = layer.backward(cache, &d, &freqs, grad);
    }
    d
}

/// Index range of the tokens that can influence output `t` through
/// `layers` band-masked layers on consecutive positions.
pub fn receptive_window(t: usize, len: usize, band: usize, layers: usize) -> (usize, usize) {
    let reach = layers * band.saturating_sub(1);
    (t.saturating_sub(reach), (t + reach + 1).min(len))
}
