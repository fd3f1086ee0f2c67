mod support;

use gravview_core::kinematics::Skeleton;
use gravview_core::rotmath::{Rotation3, Vector3};
use gravview_seqmodel::attention::Attention;
use gravview_seqmodel::config::LossWeights;
use gravview_seqmodel::fusion::{early_fuse, Fusion, SequenceInput};
use gravview_seqmodel::heads::{Intrinsics, MultiTaskOutput, HEAD_NAMES};
use gravview_seqmodel::loss::{compute_losses, Keypoints2d, LossTargets, SmplTarget};
use gravview_seqmodel::model::{positions, ModelParams};
use gravview_seqmodel::rope::rope_frequencies;
use gravview_seqmodel::toy::seeded_tokens;
use gravview_seqmodel::transformer::{receptive_window, transformer_backward, transformer_forward, transformer_forward_cached};
use gravview_seqmodel::{Activation, Matrix, Model, ModelConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{all_terms_fixture, random_input, tiny_config};

fn desk(layers: usize) -> ModelConfig {
    ModelConfig { layers, ..ModelConfig::desk() }
}

fn perturb_rows(m: &Matrix<f64>, rows: impl Iterator<Item = usize>, rng: &mut impl Rng) -> Matrix<f64> {
    let mut out = m.clone();
    for t in rows {
        for x in out.row_mut(t) {
            *x += rng.random_range(-3.0..3.0);
        }
    }
    out
}

#[test]
fn single_attention_is_local_bit_for_bit() {
    let cfg = desk(1);
    let l = cfg.train_len;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let attn = Attention::<f64>::init(cfg.model_dim, cfg.heads, &mut rng);
    let freqs = rope_frequencies(cfg.head_dim(), cfg.rope_base);
    let n = 4 * l;
    let x = seeded_tokens(&cfg, n, 2);
    let pos = positions(n);
    let (base, _) = attn.forward(&x, &pos, l, &freqs);
    for t in [0, l - 1, 2 * l, n - 1] {
        let far = (0..n).filter(|&s| t.abs_diff(s) >= l);
        let xp = perturb_rows(&x, far, &mut rng);
        let (out, _) = attn.forward(&xp, &pos, l, &freqs);
        assert_eq!(out.row(t), base.row(t), "frame {t}");
    }
}

#[test]
fn stack_is_local_outside_its_receptive_window() {
    let cfg = desk(2);
    let params = ModelParams::<f64>::init(&cfg, 3);
    let n = 4 * cfg.train_len;
    let x = seeded_tokens(&cfg, n, 4);
    let pos = positions(n);
    let base = transformer_forward(&cfg, &params.layers, &x, &pos).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for t in [0, 17, 40, n - 1] {
        let (lo, hi) = receptive_window(t, n, cfg.train_len, cfg.layers);
        let xp = perturb_rows(&x, (0..n).filter(|&s| s < lo || s >= hi), &mut rng);
        let out = transformer_forward(&cfg, &params.layers, &xp, &pos).unwrap();
        assert_eq!(out.row(t), base.row(t), "frame {t}");
    }
}

#[test]
fn input_gradient_vanishes_outside_receptive_window() {
    let cfg = desk(2);
    let params = ModelParams::<f64>::init(&cfg, 6);
    let n = 4 * cfg.train_len;
    let x = seeded_tokens(&cfg, n, 7);
    let pos = positions(n);
    let (_, caches) = transformer_forward_cached(&cfg, &params.layers, &x, &pos).unwrap();
    let t = 2 * cfg.train_len;
    let mut d_out = Matrix::zeros(n, cfg.model_dim);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for x in d_out.row_mut(t) {
        *x = rng.random_range(-1.0..1.0);
    }
    let mut grads = ModelParams::zeros(&cfg).layers;
    let dx = transformer_backward(&cfg, &params.layers, &caches, &d_out, &mut grads);
    let (lo, hi) = receptive_window(t, n, cfg.train_len, cfg.layers);
    for s in 0..n {
        let norm: f64 = dx.row(s).iter().map(|v| v.abs()).sum();
        if s < lo || s >= hi {
            assert_eq!(norm, 0.0, "token {s}");
        }
    }
    assert!(dx.row(t).iter().any(|&v| v != 0.0));
}

fn windowed_max_error(cfg: &ModelConfig, reach_layers: usize) -> f64 {
    let params = ModelParams::<f64>::init(cfg, 9);
    let n = 4 * cfg.train_len;
    let x = seeded_tokens(cfg, n, 10);
    let full = transformer_forward(cfg, &params.layers, &x, &positions(n)).unwrap();
    let mut worst = 0.0f64;
    for t in 0..n {
        let (lo, hi) = receptive_window(t, n, cfg.train_len, reach_layers);
        let sub = Matrix::from_fn(hi - lo, cfg.model_dim, |i, j| x.get(lo + i, j));
        let out = transformer_forward(cfg, &params.layers, &sub, &positions(hi - lo)).unwrap();
        for (a, b) in out.row(t - lo).iter().zip(full.row(t)) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

#[test]
fn windowed_recomputation_matches_full_sequence() {
    assert!(windowed_max_error(&desk(1), 1) < 1e-9);
    assert!(windowed_max_error(&desk(2), 2) < 1e-9);
}

#[test]
fn global_index_shift_changes_nothing() {
    let cfg = desk(2);
    let params = ModelParams::<f64>::init(&cfg, 12);
    let n = 40;
    let x = seeded_tokens(&cfg, n, 13);
    let shifted: Vec<i64> = positions(n).iter().map(|p| p + 1000).collect();
    let freqs = rope_frequencies(cfg.head_dim(), cfg.rope_base);
    let attn = &params.layers[0].attn;
    for h in 0..cfg.heads {
        let a = attn.logits(&x, &positions(n), &x, &positions(n), h, &freqs).unwrap();
        let b = attn.logits(&x, &shifted, &x, &shifted, h, &freqs).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-9);
    }
    let a = transformer_forward(&cfg, &params.layers, &x, &positions(n)).unwrap();
    let b = transformer_forward(&cfg, &params.layers, &x, &shifted).unwrap();
    assert!(a.max_abs_diff(&b) < 1e-9);
}

#[test]
fn output_length_equals_input_length() {
    let cfg = ModelConfig::desk();
    let model = Model::<f64>::seeded(cfg.clone(), 14).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for n in [1, 7, 1430] {
        let input = random_input(&cfg, n, &mut rng);
        let (out, cache) = model.forward(&input, &positions(n)).unwrap();
        assert_eq!(cache.encoded.shape(), (n, cfg.model_dim));
        assert_eq!(out.gamma_gv.len(), n);
        assert_eq!(out.theta.len(), n);
        for (raw, width) in out.raw.iter().zip(cfg.head_widths()) {
            assert_eq!(raw.shape(), (n, width));
        }
    }
}

#[test]
fn zero_parameters_and_tokens_give_zero_output() {
    let cfg = ModelConfig::desk();
    let params = ModelParams::<f64>::zeros(&cfg);
    let x = Matrix::zeros(9, cfg.model_dim);
    let out = transformer_forward(&cfg, &params.layers, &x, &positions(9)).unwrap();
    assert!(out.data().iter().all(|&v| v == 0.0));
}

#[test]
fn identity_fusion_is_linear_in_each_group() {
    let cfg = ModelConfig { fusion_activation: Activation::Identity, ..tiny_config() };
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let fusion = Fusion::<f64>::init(&cfg, &mut rng);
    let a = random_input(&cfg, 5, &mut rng);
    let b = random_input(&cfg, 5, &mut rng);
    let (alpha, beta) = (0.7, -1.3);
    let mix = |p: &Matrix<f64>, q: &Matrix<f64>| Matrix::from_fn(p.rows(), p.cols(), |i, j| alpha * p.get(i, j) + beta * q.get(i, j));
    let c = SequenceInput { bbox: mix(&a.bbox, &b.bbox), keypoints: mix(&a.keypoints, &b.keypoints), image: mix(&a.image, &b.image), cam_rot: mix(&a.cam_rot, &b.cam_rot) };
    let fa = early_fuse(&cfg, &fusion, &a).unwrap();
    let fb = early_fuse(&cfg, &fusion, &b).unwrap();
    let fc = early_fuse(&cfg, &fusion, &c).unwrap();
    // affine: f(αa + βb) = αf(a) + βf(b) + (1 − α − β) f(0)
    let f0 = early_fuse(&cfg, &fusion, &SequenceInput::zeros(&cfg, 5)).unwrap();
    let expect = Matrix::from_fn(5, cfg.model_dim, |i, j| alpha * fa.get(i, j) + beta * fb.get(i, j) + (1.0 - alpha - beta) * f0.get(i, j));
    assert!(fc.max_abs_diff(&expect) < 1e-12);
}

#[test]
fn losses_are_nonnegative_and_additive() {
    let fx = all_terms_fixture(5, 17);
    let terms = fx.model.loss(&fx.skel, &fx.input, &fx.positions, &fx.targets, &fx.weights).unwrap();
    let w = fx.weights;
    let parts = [
        (terms.v_root, w.v_root),
        (terms.gamma_gv, w.gamma_gv),
        (terms.smpl, w.smpl),
        (terms.j3d, w.j3d),
        (terms.j2d, w.j2d),
        (terms.v3d, w.v3d),
        (terms.stationary, w.stationary),
    ];
    assert!(parts.iter().all(|(v, _)| *v >= 0.0));
    let sum: f64 = parts.iter().map(|(v, w)| v * w).sum();
    assert!((terms.total - sum).abs() < 1e-12 * sum);
    let without = LossWeights { smpl: 0.0, ..w };
    let reduced = fx.model.loss(&fx.skel, &fx.input, &fx.positions, &fx.targets, &without).unwrap();
    assert!((terms.total - reduced.total - terms.smpl * w.smpl).abs() < 1e-12 * terms.total);
}

/// A prediction built directly from per-frame values, for a root-only
/// skeleton.
fn hand_prediction(frames: usize, cw: [f64; 3], gamma: Rotation3<f64>, logits: &[f64]) -> MultiTaskOutput<f64> {
    let widths = [3, 6, 0, 1, logits.len(), 6, 3];
    let mut raw: Vec<Matrix<f64>> = widths.iter().map(|&w| Matrix::zeros(frames, w)).collect();
    for t in 0..frames {
        raw[1].row_mut(t).copy_from_slice(&gamma.to_two_columns());
        raw[5].row_mut(t).copy_from_slice(&gamma.to_two_columns());
        raw[4].row_mut(t).copy_from_slice(logits);
    }
    assert_eq!(raw.len(), HEAD_NAMES.len());
    MultiTaskOutput {
        cw: vec![cw; frames],
        gamma_c: vec![gamma; frames],
        theta: vec![Vec::new(); frames],
        beta: Matrix::zeros(frames, 1),
        stationary_logits: Matrix::from_fn(frames, logits.len(), |_, k| logits[k]),
        gamma_gv: vec![gamma; frames],
        v_root: vec![Vector3::new(0.1, 0.0, 0.2); frames],
        raw,
    }
}

fn root_only_config(stationary: usize) -> ModelConfig {
    ModelConfig { joints: 1, stationary, betas: 1, ..tiny_config() }
}

#[test]
fn exact_prediction_zeroes_mse_terms_and_saturated_bce_is_small() {
    let cfg = root_only_config(2);
    let skel = Skeleton::chain(&[]).unwrap();
    let g = Rotation3::from_axis_angle(Vector3::new(0.3, -0.2, 0.5));
    let pred = hand_prediction(3, [1.0, 0.0, 0.0], g, &[10.0, -10.0]);
    let targets = LossTargets {
        v_root: Some(pred.v_root.clone()),
        gamma_gv: Some(vec![g; 3]),
        smpl: Some(SmplTarget { gamma_c: vec![g; 3], theta: vec![Vec::new(); 3], beta: Matrix::zeros(3, 1) }),
        joints3d: Some(vec![vec![Vector3::zeros()]; 3]),
        stationary: Some(Matrix::from_fn(3, 2, |_, k| if k == 0 { 1.0 } else { 0.0 })),
        ..Default::default()
    };
    let weights = LossWeights { j2d: 0.0, v3d: 0.0, ..LossWeights::default() };
    let terms = compute_losses(&cfg, &skel, &pred, &targets, &weights).unwrap();
    assert!(terms.v_root.abs() < 1e-24 && terms.gamma_gv < 1e-24 && terms.smpl < 1e-24 && terms.j3d == 0.0);
    assert!(terms.stationary > 0.0 && terms.stationary < 1e-3);
}

#[test]
fn projected_camera_center_costs_squared_pixel_offset() {
    let cfg = root_only_config(1);
    let skel = Skeleton::chain(&[]).unwrap();
    let k = Intrinsics { f: 800.0, px: 320.0, py: 240.0 };
    let pred = hand_prediction(1, [0.8, 0.0, 0.0], Rotation3::identity(), &[0.0]);
    let targets = LossTargets {
        joints2d: Some(Keypoints2d { pixels: vec![vec![[0.0, 0.0]]], bbox_px: vec![[320.0, 240.0, 100.0]], intrinsics: k }),
        ..Default::default()
    };
    let weights = LossWeights { j2d: 1.0, ..LossWeights::zero() };
    let terms = compute_losses(&cfg, &skel, &pred, &targets, &weights).unwrap();
    // mean over the two pixel coordinates of one joint
    assert!((terms.j2d - (320.0f64.powi(2) + 240.0f64.powi(2)) / 2.0).abs() < 1e-9);
}

#[test]
fn zero_loss_gives_zero_gradients() {
    let fx = all_terms_fixture(4, 18);
    let (pred, _) = fx.model.forward(&fx.input, &fx.positions).unwrap();
    let targets = LossTargets {
        v_root: Some(pred.v_root.clone()),
        gamma_gv: Some(pred.gamma_gv.clone()),
        smpl: Some(SmplTarget { gamma_c: pred.gamma_c.clone(), theta: pred.theta.clone(), beta: pred.beta.clone() }),
        ..Default::default()
    };
    let weights = LossWeights { v_root: 1.0, gamma_gv: 1.0, smpl: 1.0, ..LossWeights::zero() };
    let (terms, grads) = fx.model.loss_and_grad(&fx.skel, &fx.input, &fx.positions, &targets, &weights).unwrap();
    assert_eq!(terms.total, 0.0);
    for (name, m) in grads.params.tensors() {
        assert!(m.data().iter().all(|&g| g == 0.0), "{name}");
    }
}

#[test]
fn paper_scale_config_is_constructible() {
    let cfg = ModelConfig::paper_scale();
    let params = ModelParams::<f32>::zeros(&cfg);
    assert_eq!(params.layers.len(), 12);
    let model = Model::new(cfg.clone(), params).unwrap();
    assert!(model.params.parameter_count() > 12 * 4 * 512 * 512);
    let wrong = ModelParams::<f32>::zeros(&ModelConfig::desk());
    assert!(Model::new(cfg, wrong).is_err());
}
