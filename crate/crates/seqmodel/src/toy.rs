//! Seeded toy problems: a denoising fit and an encoder checksum.

use gravview_core::kinematics::Skeleton;
use gravview_core::rotmath::{Rotation3, Vector3};
use gravview_core::Real;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::{LossWeights, ModelConfig};
use crate::fusion::SequenceInput;
use crate::loss::{LossTargets, LossTerms};
use crate::model::{positions, Model, ModelParams};
use crate::optim::{Adam, AdamConfig};
use crate::tensor::Matrix;
use crate::transformer::transformer_forward;
use crate::SeqError;

/// One toy sequence: noisy Γ_GV (6D) and v_root in the image features,
/// the clean values as targets.
#[derive(Debug, Clone)]
pub struct ToyExample<T> {
    pub input: SequenceInput<T>,
    pub targets: LossTargets<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyNoise {
    /// Standard deviation added to each 6D entry.
    pub rotation: f64,
    /// Standard deviation added to each v_root component, meters.
    pub velocity: f64,
}

impl Default for ToyNoise {
    fn default() -> Self {
        Self { rotation: 0.1, velocity: 0.02 }
    }
}

fn random_rotation(rng: &mut impl Rng) -> Rotation3<f64> {
    let v = Vector3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
    Rotation3::from_axis_angle(v)
}

/// Needs `image_feature_dim ≥ 9`.
pub fn toy_problem<T: Real>(cfg: &ModelConfig, sequences: usize, frames: usize, noise: ToyNoise, seed: u64) -> Result<Vec<ToyExample<T>>, SeqError> {
    if cfg.image_feature_dim < 9 {
        return Err(SeqError::ShapeMismatch { what: "toy image feature width (at least)", expected: 9, got: cfg.image_feature_dim });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rot_noise = Normal::new(0.0, noise.rotation).map_err(|e| SeqError::InvalidConfig(e.to_string()))?;
    let vel_noise = Normal::new(0.0, noise.velocity).map_err(|e| SeqError::InvalidConfig(e.to_string()))?;
    let identity6 = Rotation3::<T>::identity().to_two_columns();
    let mut out = Vec::with_capacity(sequences);
    for _ in 0..sequences {
        let start = random_rotation(&mut rng);
        let spin = Vector3::new(0.0, rng.random_range(-0.05..0.05), 0.0);
        let speed = rng.random_range(0.01..0.05);
        let mut input = SequenceInput::zeros(cfg, frames);
        let mut gammas = Vec::with_capacity(frames);
        let mut vels = Vec::with_capacity(frames);
        for t in 0..frames {
            let g = Rotation3::from_axis_angle(spin * t as f64).compose(&start);
            let v = Vector3::new(0.0, 0.0, speed);
            let row = input.image.row_mut(t);
            for (k, x) in g.to_two_columns().into_iter().enumerate() {
                row[k] = T::lit(x + rot_noise.sample(&mut rng));
            }
            for k in 0..3 {
                row[6 + k] = T::lit(v.to_array()[k] + vel_noise.sample(&mut rng));
            }
            input.cam_rot.row_mut(t).copy_from_slice(&identity6);
            gammas.push(g.cast());
            vels.push(v.cast());
        }
        let targets = LossTargets { v_root: Some(vels), gamma_gv: Some(gammas), ..Default::default() };
        out.push(ToyExample { input, targets });
    }
    Ok(out)
}

/// Only the two terms the toy problem supervises.
pub fn toy_weights() -> LossWeights {
    LossWeights { v_root: 1.0, gamma_gv: 1.0, ..LossWeights::zero() }
}

/// Mean loss terms and mean parameter gradient over a batch.
pub fn batch_loss_and_grad<T: Real>(
    model: &Model<T>,
    skel: &Skeleton<T>,
    batch: &[ToyExample<T>],
    weights: &LossWeights,
) -> Result<(T, ModelParams<T>), SeqError> {
    let mut grad = ModelParams::zeros(&model.config);
    let mut total = T::zero();
    let inv = T::one() / T::from_usize_lossy(batch.len().max(1));
    for ex in batch {
        let pos = positions(ex.input.frames());
        let (terms, g): (LossTerms<T>, _) = model.loss_and_grad(skel, &ex.input, &pos, &ex.targets, weights)?;
        total += terms.total * inv;
        grad.add_scaled(&g.params, inv);
    }
    Ok((total, grad))
}

/// Full-batch Adam; returns the loss before every step and after the last.
pub fn fit<T: Real>(
    model: &mut Model<T>,
    skel: &Skeleton<T>,
    batch: &[ToyExample<T>],
    weights: &LossWeights,
    steps: usize,
    adam: AdamConfig,
) -> Result<Vec<T>, SeqError> {
    let mut opt = Adam::new(adam, &model.params);
    let mut history = Vec::with_capacity(steps + 1);
    for _ in 0..steps {
        let (loss, grad) = batch_loss_and_grad(model, skel, batch, weights)?;
        history.push(loss);
        opt.step(&mut model.params, &grad);
    }
    history.push(batch_loss_and_grad(model, skel, batch, weights)?.0);
    Ok(history)
}

/// Seeded random tokens, `frames × model_dim`, standard normal.
pub fn seeded_tokens<T: Real>(cfg: &ModelConfig, frames: usize, seed: u64) -> Matrix<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(frames, cfg.model_dim, |_, _| T::lit(rng.sample(StandardNormal)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checksums {
    pub sum: f64,
    pub sum_squares: f64,
    /// `Σ_i x_i · sin(i + 1)` over the row-major entries.
    pub weighted: f64,
}

impl Checksums {
    pub fn of(m: &Matrix<f64>) -> Self {
        let mut c = Self { sum: 0.0, sum_squares: 0.0, weighted: 0.0 };
        for (i, &x) in m.data().iter().enumerate() {
            c.sum += x;
            c.sum_squares += x * x;
            c.weighted += x * ((i + 1) as f64).sin();
        }
        c
    }

    /// Largest difference relative to `max(1, |reference|)`.
    pub fn max_rel_diff(&self, reference: &Self) -> f64 {
        [(self.sum, reference.sum), (self.sum_squares, reference.sum_squares), (self.weighted, reference.weighted)]
            .iter()
            .map(|&(a, b)| (a - b).abs() / b.abs().max(1.0))
            .fold(0.0, f64::max)
    }
}

/// Encoder output checksums for seeded parameters and seeded tokens.
pub fn encoder_checksums(cfg: &ModelConfig, frames: usize, param_seed: u64, input_seed: u64) -> Result<Checksums, SeqError> {
    let params = ModelParams::<f64>::init(cfg, param_seed);
    let tokens = seeded_tokens(cfg, frames, input_seed);
    let out = transformer_forward(cfg, &params.layers, &tokens, &positions(frames))?;
    Ok(Checksums::of(&out))
}
