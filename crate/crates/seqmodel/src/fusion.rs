//! Early fusion: each input group goes through its own MLP and the results
//! are summed per frame.

use gravview_core::Real;
use rand::Rng;

use crate::config::ModelConfig;
use crate::nn::{join, Mlp2, Mlp2Cache, ParamSet};
use crate::tensor::Matrix;
use crate::SeqError;

/// Inputs of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFeatures<T> {
    /// Normalised box center x, center y and size.
    pub bbox: [T; 3],
    /// `(x, y, confidence)` per keypoint, coordinates in [−1, 1].
    pub keypoints: Vec<[T; 3]>,
    /// Image feature vector; zeros when unavailable.
    pub image: Vec<T>,
    /// Relative camera rotation as its first two columns.
    pub cam_rot: [T; 6],
}

/// A whole sequence of inputs, one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceInput<T> {
    pub bbox: Matrix<T>,
    pub keypoints: Matrix<T>,
    pub image: Matrix<T>,
    pub cam_rot: Matrix<T>,
}

impl<T: Real> SequenceInput<T> {
    pub fn zeros(cfg: &ModelConfig, frames: usize) -> Self {
        Self {
            bbox: Matrix::zeros(frames, 3),
            keypoints: Matrix::zeros(frames, 3 * cfg.keypoints),
            image: Matrix::zeros(frames, cfg.image_feature_dim),
            cam_rot: Matrix::zeros(frames, 6),
        }
    }

    pub fn from_frames(cfg: &ModelConfig, frames: &[FrameFeatures<T>]) -> Result<Self, SeqError> {
        let mut out = Self::zeros(cfg, frames.len());
        for (t, f) in frames.iter().enumerate() {
            if f.keypoints.len() != cfg.keypoints {
                return Err(SeqError::ShapeMismatch { what: "keypoints", expected: cfg.keypoints, got: f.keypoints.len() });
            }
            if f.image.len() != cfg.image_feature_dim {
                return Err(SeqError::ShapeMismatch {
                    what: "image feature",
                    expected: cfg.image_feature_dim,
                    got: f.image.len(),
                });
            }
            out.bbox.row_mut(t).copy_from_slice(&f.bbox);
            out.keypoints.row_mut(t).copy_from_slice(&f.keypoints.concat());
            out.image.row_mut(t).copy_from_slice(&f.image);
            out.cam_rot.row_mut(t).copy_from_slice(&f.cam_rot);
        }
        Ok(out)
    }

    pub fn frames(&self) -> usize {
        self.bbox.rows()
    }

    pub fn validate(&self, cfg: &ModelConfig) -> Result<(), SeqError> {
        let n = self.frames();
        for (what, m, cols) in [
            ("bbox", &self.bbox, 3),
            ("keypoints", &self.keypoints, 3 * cfg.keypoints),
            ("image feature", &self.image, cfg.image_feature_dim),
            ("camera rotation", &self.cam_rot, 6),
        ] {
            if m.rows() != n {
                return Err(SeqError::ShapeMismatch { what, expected: n, got: m.rows() });
            }
            if m.cols() != cols {
                return Err(SeqError::ShapeMismatch { what, expected: cols, got: m.cols() });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fusion<T> {
    pub bbox: Mlp2<T>,
    pub keypoints: Mlp2<T>,
    pub image: Mlp2<T>,
    pub cam_rot: Mlp2<T>,
}

#[derive(Debug, Clone)]
pub struct FusionCache<T> {
    caches: [Mlp2Cache<T>; 4],
}

impl<T: Real> Fusion<T> {
    fn widths(cfg: &ModelConfig) -> [usize; 4] {
        [3, 3 * cfg.keypoints, cfg.image_feature_dim, 6]
    }

    pub fn zeros(cfg: &ModelConfig) -> Self {
        let [a, b, c, d] = Self::widths(cfg).map(|w| Mlp2::zeros(w, cfg.fusion_hidden, cfg.model_dim, cfg.fusion_activation));
        Self { bbox: a, keypoints: b, image: c, cam_rot: d }
    }

    pub fn init(cfg: &ModelConfig, rng: &mut impl Rng) -> Self {
        let [a, b, c, d] = Self::widths(cfg).map(|w| Mlp2::init(w, cfg.fusion_hidden, cfg.model_dim, cfg.fusion_activation, rng));
        Self { bbox: a, keypoints: b, image: c, cam_rot: d }
    }

    fn groups(&self) -> [&Mlp2<T>; 4] {
        [&self.bbox, &self.keypoints, &self.image, &self.cam_rot]
    }

    pub fn forward(&self, input: &SequenceInput<T>) -> (Matrix<T>, FusionCache<T>) {
        let xs = [&input.bbox, &input.keypoints, &input.image, &input.cam_rot];
        let mut tokens: Option<Matrix<T>> = None;
        let caches = std::array::from_fn(|g| {
            let (y, cache) = self.groups()[g].forward_cached(xs[g]);
            match tokens.as_mut() {
                Some(acc) => acc.add_assign(&y),
                None => tokens = Some(y),
            }
            cache
        });
        (tokens.expect("four groups"), FusionCache { caches })
    }

    /// Returns the input gradients in group order.
    pub fn backward(&self, cache: &FusionCache<T>, d_tokens: &Matrix<T>, grad: &mut Self) -> [Matrix<T>; 4] {
        [
            self.bbox.backward(&cache.caches[0], d_tokens, &mut grad.bbox),
            self.keypoints.backward(&cache.caches[1], d_tokens, &mut grad.keypoints),
            self.image.backward(&cache.caches[2], d_tokens, &mut grad.image),
            self.cam_rot.backward(&cache.caches[3], d_tokens, &mut grad.cam_rot),
        ]
    }
}

impl<T: Real> ParamSet<T> for Fusion<T> {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Matrix<T>)>) {
        self.bbox.visit(&join(prefix, "bbox"), out);
        self.keypoints.visit(&join(prefix, "keypoints"), out);
        self.image.visit(&join(prefix, "image"), out);
        self.cam_rot.visit(&join(prefix, "cam_rot"), out);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Matrix<T>)>) {
        self.bbox.visit_mut(&join(prefix, "bbox"), out);
        self.keypoints.visit_mut(&join(prefix, "keypoints"), out);
        self.image.visit_mut(&join(prefix, "image"), out);
        self.cam_rot.visit_mut(&join(prefix, "cam_rot"), out);
    }
}

/// Tokens from the early-fusion stage.
pub fn early_fuse<T: Real>(cfg: &ModelConfig, fusion: &Fusion<T>, input: &SequenceInput<T>) -> Result<Matrix<T>, SeqError> {
    input.validate(cfg)?;
    Ok(fusion.forward(input).0)
}
