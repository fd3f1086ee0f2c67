//! The full model: fusion, encoder stack and heads.

use gravview_core::kinematics::Skeleton;
use gravview_core::Real;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{LossWeights, ModelConfig};
use crate::fusion::{Fusion, FusionCache, SequenceInput};
use crate::heads::{Heads, HeadsCache, MultiTaskOutput};
use crate::loss::{losses_and_gradients, LossTargets, LossTerms};
use crate::nn::ParamSet;
use crate::tensor::Matrix;
use crate::transformer::{transformer_backward, transformer_forward_cached, EncoderLayer, StackCache};
use crate::SeqError;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub fusion: Fusion<T>,
    pub layers: Vec<EncoderLayer<T>>,
    pub heads: Heads<T>,
}

impl<T: Real> ModelParams<T> {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        Self {
            fusion: Fusion::zeros(cfg),
            layers: (0..cfg.layers).map(|_| EncoderLayer::zeros(cfg)).collect(),
            heads: Heads::zeros(cfg),
        }
    }

    /// Seeded initialisation (ChaCha8).
    pub fn init(cfg: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            fusion: Fusion::init(cfg, &mut rng),
            layers: (0..cfg.layers).map(|_| EncoderLayer::init(cfg, &mut rng)).collect(),
            heads: Heads::init(cfg, &mut rng),
        }
    }

    pub fn tensors(&self) -> Vec<(String, &Matrix<T>)> {
        let mut out = Vec::new();
        self.visit("", &mut out);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix<T>)> {
        let mut out = Vec::new();
        self.visit_mut("", &mut out);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, m)| m.data().len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, m)| m.is_finite())
    }

    /// `self += s · other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &Self, s: T) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, &y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += s * y;
            }
        }
    }
}

impl<T: Real> ParamSet<T> for ModelParams<T> {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Matrix<T>)>) {
        self.fusion.visit(&crate::nn::join(prefix, "fusion"), out);
        for (i, l) in self.layers.iter().enumerate() {
            l.visit(&crate::nn::join(prefix, &format!("layers.{i}")), out);
        }
        self.heads.visit(&crate::nn::join(prefix, "heads"), out);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Matrix<T>)>) {
        self.fusion.visit_mut(&crate::nn::join(prefix, "fusion"), out);
        for (i, l) in self.layers.iter_mut().enumerate() {
            l.visit_mut(&crate::nn::join(prefix, &format!("layers.{i}")), out);
        }
        self.heads.visit_mut(&crate::nn::join(prefix, "heads"), out);
    }
}

#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    fusion: FusionCache<T>,
    stack: StackCache<T>,
    heads: HeadsCache<T>,
    /// Fused input tokens.
    pub tokens: Matrix<T>,
    /// Encoder output tokens.
    pub encoded: Matrix<T>,
}

/// Gradients of one backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub params: ModelParams<T>,
    /// With respect to the fused input tokens.
    pub tokens: Matrix<T>,
    /// With respect to the raw inputs, in fusion group order
    /// (bbox, keypoints, image, camera rotation).
    pub inputs: [Matrix<T>; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub params: ModelParams<T>,
}

impl<T: Real> Model<T> {
    pub fn new(config: ModelConfig, params: ModelParams<T>) -> Result<Self, SeqError> {
        config.validate()?;
        let reference = ModelParams::<T>::zeros(&config);
        let expected = reference.tensors();
        let got = params.tensors();
        if expected.len() != got.len() {
            return Err(SeqError::ShapeMismatch { what: "parameter tensors", expected: expected.len(), got: got.len() });
        }
        for ((name, a), (_, b)) in expected.iter().zip(&got) {
            if a.shape() != b.shape() {
                return Err(SeqError::InvalidConfig(format!("tensor {name} has shape {:?}, expected {:?}", b.shape(), a.shape())));
            }
        }
        Ok(Self { config, params })
    }

    pub fn seeded(config: ModelConfig, seed: u64) -> Result<Self, SeqError> {
        config.validate()?;
        let params = ModelParams::init(&config, seed);
        Ok(Self { config, params })
    }

    pub fn forward(&self, input: &SequenceInput<T>, positions: &[i64]) -> Result<(MultiTaskOutput<T>, ForwardCache<T>), SeqError> {
        input.validate(&self.config)?;
        let (tokens, fusion) = self.params.fusion.forward(input);
        let (encoded, stack) = transformer_forward_cached(&self.config, &self.params.layers, &tokens, positions)?;
        let (out, heads) = self.params.heads.forward(&encoded);
        Ok((out, ForwardCache { fusion, stack, heads, tokens, encoded }))
    }

    /// Back-propagates gradients of the raw head outputs.
    pub fn backward(&self, cache: &ForwardCache<T>, d_raw: &[Matrix<T>]) -> Gradients<T> {
        let mut params = ModelParams::zeros(&self.config);
        let d_encoded = self.params.heads.backward(&cache.heads, d_raw, &mut params.heads);
        let d_tokens = transformer_backward(&self.config, &self.params.layers, &cache.stack, &d_encoded, &mut params.layers);
        let inputs = self.params.fusion.backward(&cache.fusion, &d_tokens, &mut params.fusion);
        Gradients { params, tokens: d_tokens, inputs }
    }

    pub fn loss(
        &self,
        skel: &Skeleton<T>,
        input: &SequenceInput<T>,
        positions: &[i64],
        targets: &LossTargets<T>,
        weights: &LossWeights,
    ) -> Result<LossTerms<T>, SeqError> {
        let (out, _) = self.forward(input, positions)?;
        Ok(losses_and_gradients(&self.config, skel, &out, targets, weights)?.0)
    }

    pub fn loss_and_grad(
        &self,
        skel: &Skeleton<T>,
        input: &SequenceInput<T>,
        positions: &[i64],
        targets: &LossTargets<T>,
        weights: &LossWeights,
    ) -> Result<(LossTerms<T>, Gradients<T>), SeqError> {
        let (out, cache) = self.forward(input, positions)?;
        let (terms, d_raw) = losses_and_gradients(&self.config, skel, &out, targets, weights)?;
        Ok((terms, self.backward(&cache, &d_raw)))
    }
}

/// Consecutive positions `0..n`.
pub fn positions(n: usize) -> Vec<i64> {
    (0..n as i64).collect()
}
