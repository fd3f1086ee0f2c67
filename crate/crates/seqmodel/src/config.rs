use serde::{Deserialize, Serialize};

use crate::SeqError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// tanh approximation of GELU.
    Gelu,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub layers: usize,
    pub heads: usize,
    pub model_dim: usize,
    pub mlp_hidden: usize,
    /// Attention band: token t attends to s only when |t − s| < train_len.
    pub train_len: usize,
    pub rope_base: f64,
    /// 2D keypoints per frame (x, y, confidence each).
    pub keypoints: usize,
    pub image_feature_dim: usize,
    /// Hidden width of the per-group fusion MLPs.
    pub fusion_hidden: usize,
    pub fusion_activation: Activation,
    /// Hidden width of the per-task head MLPs.
    pub head_hidden: usize,
    /// Skeleton joints including the root; θ has `joints − 1` entries.
    pub joints: usize,
    pub stationary: usize,
    pub betas: usize,
}

impl ModelConfig {
    /// Small configuration used by tests and demos.
    pub fn desk() -> Self {
        Self {
            layers: 2,
            heads: 4,
            model_dim: 64,
            mlp_hidden: 128,
            train_len: 16,
            rope_base: 10000.0,
            keypoints: 24,
            image_feature_dim: 32,
            fusion_hidden: 64,
            fusion_activation: Activation::Gelu,
            head_hidden: 64,
            joints: 24,
            stationary: 6,
            betas: 10,
        }
    }

    /// The full-size configuration (12 layers, 8 heads, 512 wide, L = 120).
    pub fn paper_scale() -> Self {
        Self {
            layers: 12,
            heads: 8,
            model_dim: 512,
            mlp_hidden: 1024,
            train_len: 120,
            image_feature_dim: 1024,
            fusion_hidden: 512,
            head_hidden: 512,
            ..Self::desk()
        }
    }

    pub fn head_dim(&self) -> usize {
        self.model_dim / self.heads.max(1)
    }

    pub fn validate(&self) -> Result<(), SeqError> {
        let bad = |m: &str| Err(SeqError::InvalidConfig(m.to_string()));
        if self.layers == 0 || self.heads == 0 || self.model_dim == 0 {
            return bad("layers, heads and model_dim must be positive");
        }
        if !self.model_dim.is_multiple_of(self.heads) {
            return bad("model_dim must be divisible by heads");
        }
        if !self.head_dim().is_multiple_of(2) {
            return bad("per-head dimension must be even");
        }
        if self.train_len == 0 {
            return bad("train_len must be at least 1");
        }
        if !(self.rope_base > 1.0) {
            return bad("rope_base must exceed 1");
        }
        if self.joints < 2 {
            return bad("skeleton needs at least two joints");
        }
        if self.mlp_hidden == 0 || self.fusion_hidden == 0 || self.head_hidden == 0 {
            return bad("hidden widths must be positive");
        }
        Ok(())
    }

    /// Output width of each head, in head order.
    pub fn head_widths(&self) -> [usize; 7] {
        [3, 6, 6 * (self.joints - 1), self.betas, self.stationary, 6, 3]
    }
}

/// Per-term loss weights; the total is the weighted sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub v_root: f64,
    pub gamma_gv: f64,
    pub smpl: f64,
    pub j3d: f64,
    pub j2d: f64,
    pub v3d: f64,
    pub stationary: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { v_root: 1.0, gamma_gv: 1.0, smpl: 1.0, j3d: 1.0, j2d: 1e-4, v3d: 1.0, stationary: 1.0 }
    }
}

impl LossWeights {
    pub fn zero() -> Self {
        Self { v_root: 0.0, gamma_gv: 0.0, smpl: 0.0, j3d: 0.0, j2d: 0.0, v3d: 0.0, stationary: 0.0 }
    }
}
