//! Fixtures shared by the model tests: a tiny model with every loss term
//! supervised, and a central finite-difference gradient oracle.

#![allow(dead_code)]

use gravview_core::kinematics::{Joint, Skeleton};
use gravview_core::rotmath::{Rotation3, Vector3};
use gravview_seqmodel::heads::Intrinsics;
use gravview_seqmodel::loss::{Keypoints2d, LossTargets, PointTarget, SmplTarget};
use gravview_seqmodel::model::positions;
use gravview_seqmodel::{Activation, LossWeights, Matrix, Model, ModelConfig};
use gravview_seqmodel::fusion::SequenceInput;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        layers: 2,
        heads: 2,
        model_dim: 16,
        mlp_hidden: 24,
        train_len: 3,
        rope_base: 10000.0,
        keypoints: 3,
        image_feature_dim: 5,
        fusion_hidden: 8,
        fusion_activation: Activation::Gelu,
        head_hidden: 8,
        joints: 4,
        stationary: 2,
        betas: 2,
    }
}

/// Root with a two-link branch and a one-link branch.
pub fn tiny_skeleton() -> Skeleton<f64> {
    let joint = |name: &str, parent, offset: [f64; 3]| Joint { name: name.into(), parent, offset: Vector3::from_array(offset) };
    Skeleton::new(
        "tiny",
        vec![
            joint("root", None, [0.0, 0.0, 0.0]),
            joint("hip", Some(0), [0.1, -0.2, 0.05]),
            joint("knee", Some(1), [0.0, -0.4, 0.1]),
            joint("spine", Some(0), [0.0, 0.3, -0.05]),
        ],
        vec![2, 3],
    )
    .unwrap()
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn vec3(rng: &mut impl Rng, scale: f64) -> Vector3<f64> {
    Vector3::new(normal(rng), normal(rng), normal(rng)) * scale
}

fn rotation(rng: &mut impl Rng) -> Rotation3<f64> {
    Rotation3::from_axis_angle(vec3(rng, 1.0))
}

pub fn random_input(cfg: &ModelConfig, frames: usize, rng: &mut impl Rng) -> SequenceInput<f64> {
    let mut input = SequenceInput::zeros(cfg, frames);
    for m in [&mut input.bbox, &mut input.keypoints, &mut input.image, &mut input.cam_rot] {
        for x in m.data_mut() {
            *x = normal(rng);
        }
    }
    input
}

/// Targets for all seven terms.
pub fn full_targets(cfg: &ModelConfig, frames: usize, rng: &mut impl Rng) -> LossTargets<f64> {
    let j = cfg.joints;
    let intrinsics = Intrinsics { f: 500.0, px: 320.0, py: 240.0 };
    LossTargets {
        v_root: Some((0..frames).map(|_| vec3(rng, 0.1)).collect()),
        gamma_gv: Some((0..frames).map(|_| rotation(rng)).collect()),
        smpl: Some(SmplTarget {
            gamma_c: (0..frames).map(|_| rotation(rng)).collect(),
            theta: (0..frames).map(|_| (0..j - 1).map(|_| rotation(rng)).collect()).collect(),
            beta: Matrix::from_fn(frames, cfg.betas, |_, _| normal(rng)),
        }),
        joints3d: Some((0..frames).map(|_| (0..j).map(|_| vec3(rng, 0.3)).collect()).collect()),
        joints2d: Some(Keypoints2d {
            pixels: (0..frames).map(|_| (0..j).map(|_| [320.0 + 40.0 * normal(rng), 240.0 + 40.0 * normal(rng)]).collect()).collect(),
            bbox_px: (0..frames).map(|_| [300.0 + 20.0 * normal(rng), 250.0 + 20.0 * normal(rng), 150.0]).collect(),
            intrinsics,
        }),
        points3d: Some(PointTarget {
            anchors: vec![(1, Vector3::new(0.05, 0.0, 0.0)), (2, Vector3::new(0.0, -0.05, 0.02)), (3, Vector3::new(0.0, 0.1, 0.0))],
            points: (0..frames).map(|_| (0..3).map(|_| vec3(rng, 0.3)).collect()).collect(),
        }),
        stationary: Some(Matrix::from_fn(frames, cfg.stationary, |_, _| if rng.random_bool(0.5) { 1.0 } else { 0.0 })),
    }
}

pub struct Fixture {
    pub model: Model<f64>,
    pub skel: Skeleton<f64>,
    pub input: SequenceInput<f64>,
    pub positions: Vec<i64>,
    pub targets: LossTargets<f64>,
    pub weights: LossWeights,
}

pub fn all_terms_fixture(frames: usize, seed: u64) -> Fixture {
    let cfg = tiny_config();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = Model::seeded(cfg.clone(), seed).unwrap();
    Fixture {
        input: random_input(&cfg, frames, &mut rng),
        targets: full_targets(&cfg, frames, &mut rng),
        positions: positions(frames),
        skel: tiny_skeleton(),
        weights: LossWeights { j2d: 1e-3, ..LossWeights::default() },
        model,
    }
}

impl Fixture {
    pub fn loss(&self, model: &Model<f64>) -> f64 {
        model.loss(&self.skel, &self.input, &self.positions, &self.targets, &self.weights).unwrap().total
    }
}

pub const FD_STEP: f64 = 1e-5;
/// Denominator floor for the relative error: gradients smaller than this
/// are compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct GradcheckReport {
    pub checked: usize,
    pub worst_rel: f64,
    pub worst_name: String,
    pub worst_pair: (f64, f64),
    /// Worst plain relative error among entries with |gradient| ≥ 1e-3.
    pub worst_rel_large: f64,
}

pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR)
}

/// Compares every parameter entry's analytic gradient to a central
/// difference of the total loss.
pub fn gradcheck(fx: &Fixture) -> GradcheckReport {
    let (_, grads) = fx.model.loss_and_grad(&fx.skel, &fx.input, &fx.positions, &fx.targets, &fx.weights).unwrap();
    let analytic: Vec<(String, Vec<f64>)> = grads.params.tensors().into_iter().map(|(n, m)| (n, m.data().to_vec())).collect();
    let mut model = fx.model.clone();
    let mut report = GradcheckReport { checked: 0, worst_rel: 0.0, worst_name: String::new(), worst_pair: (0.0, 0.0), worst_rel_large: 0.0 };
    for (ti, (name, a)) in analytic.iter().enumerate() {
        for (k, &ga) in a.iter().enumerate() {
            let original = fx.model.params.tensors()[ti].1.data()[k];
            let set = |model: &mut Model<f64>, v: f64| model.params.tensors_mut()[ti].1.data_mut()[k] = v;
            set(&mut model, original + FD_STEP);
            let up = fx.loss(&model);
            set(&mut model, original - FD_STEP);
            let down = fx.loss(&model);
            set(&mut model, original);
            let gn = (up - down) / (2.0 * FD_STEP);
            let rel = relative_error(ga, gn);
            report.checked += 1;
            if ga.abs().max(gn.abs()) >= 1e-3 {
                report.worst_rel_large = report.worst_rel_large.max((ga - gn).abs() / ga.abs().max(gn.abs()));
            }
            if rel > report.worst_rel {
                report.worst_rel = rel;
                report.worst_name = format!("{name}[{k}]");
                report.worst_pair = (ga, gn);
            }
        }
    }
    report
}
