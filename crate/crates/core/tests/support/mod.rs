//! Independent oracles and synthetic worlds shared by the integration
//! tests.

#![allow(dead_code)]

use gravview_core::gv::world_to_gv;
use gravview_core::rotmath::{Matrix3, Vector3};
use gravview_core::trajectory::TrajectoryInputs;
use gravview_core::{Rotation, Vec3};
use rand::Rng;

pub const GRAVITY_W: Vec3 = Vec3::new(0.0, -1.0, 0.0);

pub fn level_camera() -> Rotation {
    Rotation::from_matrix_unchecked(Matrix3::from_rows([[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]]))
}

pub fn camera(yaw: f64, pitch: f64, roll: f64) -> Rotation {
    Rotation::about_z(roll) * Rotation::about_x(pitch) * level_camera() * Rotation::about_y(-yaw)
}

pub fn random_rotation(rng: &mut impl Rng) -> Rotation {
    let axis = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    Rotation::from_axis_angle(axis.normalized() * rng.random_range(0.0..3.1))
}

pub fn random_cloud(rng: &mut impl Rng, n: usize) -> Vec<Vec3> {
    (0..n).map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

pub struct World {
    pub r_w2c: Vec<Rotation>,
    pub gamma_w: Vec<Rotation>,
    pub tau_w: Vec<Vec3>,
}

/// A wandering person and a drifting, tilting camera, `n + 1` frames.
pub fn random_world(rng: &mut impl Rng, n: usize) -> World {
    let (mut yaw, mut pitch, mut roll): (f64, f64, f64) = (rng.random_range(-3.0..3.0), 0.2, -0.1);
    let mut heading: f64 = rng.random_range(-3.0..3.0);
    let mut pos = Vec3::new(rng.random_range(-2.0..2.0), 0.9, rng.random_range(-2.0..2.0));
    let (mut r_w2c, mut gamma_w, mut tau_w) = (vec![], vec![], vec![]);
    for _ in 0..=n {
        yaw += rng.random_range(-0.05..0.05);
        pitch = (pitch + rng.random_range(-0.03..0.03)).clamp(-0.8, 0.8);
        roll = (roll + rng.random_range(-0.03..0.03)).clamp(-0.5, 0.5);
        heading += rng.random_range(-0.04..0.04);
        pos += Vec3::new(heading.sin(), rng.random_range(-0.1..0.1), heading.cos()) * 0.04;
        r_w2c.push(camera(yaw, pitch, roll));
        gamma_w.push(Rotation::about_y(heading) * Rotation::about_x(rng.random_range(-0.1..0.1)));
        tau_w.push(pos);
    }
    World { r_w2c, gamma_w, tau_w }
}

/// Exact per-frame network targets for the first `n` frames.
pub fn inputs_from(world: &World, n: usize) -> TrajectoryInputs<f64> {
    let mut inputs = TrajectoryInputs { gamma_gv: vec![], gamma_c: vec![], v_root: vec![], r_delta: vec![], fps: 30.0 };
    for t in 0..n {
        let r = world.r_w2c[t];
        inputs.gamma_gv.push(world_to_gv(&r, GRAVITY_W).unwrap() * world.gamma_w[t]);
        inputs.gamma_c.push(r * world.gamma_w[t]);
        inputs.v_root.push(world.gamma_w[t].inverse() * (world.tau_w[t + 1] - world.tau_w[t]));
        inputs.r_delta.push(if t == 0 { Rotation::identity() } else { r * world.r_w2c[t - 1].inverse() });
    }
    inputs
}

/// The rollout written as explicit loops over plain matrices:
/// `Γ_wᵗ = (∏_{i=1..t} R_ΔGVⁱ) Γ_GVᵗ` and `τ_wᵗ = Σ_{i<t} Γ_wⁱ vⁱ`.
pub fn brute_force_rollout(gamma_gv: &[Rotation], r_delta_gv: &[Rotation], v_root: &[Vec3]) -> (Vec<Matrix3<f64>>, Vec<Vec3>) {
    let n = gamma_gv.len();
    let mut orientations = Vec::with_capacity(n);
    for t in 0..n {
        let mut prod = Matrix3::identity();
        for d in &r_delta_gv[1..=t] {
            prod = prod * *d.matrix();
        }
        orientations.push(prod * *gamma_gv[t].matrix());
    }
    let mut translations = Vec::with_capacity(n);
    for t in 0..n {
        let mut sum = Vector3::zeros();
        for i in 0..t {
            sum += orientations[i] * v_root[i];
        }
        translations.push(sum);
    }
    (orientations, translations)
}

/// Least-squares residual `min Σ‖s·R·p + t − q‖²` found numerically: for a
/// fixed R the optimal t and s are closed form, and R is searched by random
/// restarts followed by axis-angle coordinate descent.
pub fn brute_force_residual(p: &[Vec3], q: &[Vec3], with_scale: bool, rng: &mut impl Rng) -> f64 {
    let n = p.len() as f64;
    let pc = p.iter().copied().sum::<Vec3>() / n;
    let qc = q.iter().copied().sum::<Vec3>() / n;
    let eval = |r: &Rotation| {
        let rp: Vec<Vec3> = p.iter().map(|x| *r * (*x - pc)).collect();
        let qq: Vec<Vec3> = q.iter().map(|x| *x - qc).collect();
        let s = if with_scale {
            let num: f64 = rp.iter().zip(&qq).map(|(a, b)| a.dot(*b)).sum();
            let den: f64 = rp.iter().map(|a| a.dot(*a)).sum();
            num / den
        } else {
            1.0
        };
        rp.iter().zip(&qq).map(|(a, b)| (*a * s - *b).norm_squared()).sum::<f64>()
    };
    let mut best = Rotation::identity();
    let mut best_val = eval(&best);
    for _ in 0..2000 {
        let r = random_rotation(rng);
        let v = eval(&r);
        if v < best_val {
            best = r;
            best_val = v;
        }
    }
    let mut step = 0.1;
    while step > 1e-10 {
        let mut improved = false;
        for axis in [Vec3::unit_x(), Vec3::unit_y(), Vec3::unit_z()] {
            for sign in [-1.0, 1.0] {
                let r = Rotation::from_axis_angle(axis * (sign * step)) * best;
                let v = eval(&r);
                if v < best_val {
                    best = r;
                    best_val = v;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best_val
}

/// Brute-force rigid transform minimising the residual, as
/// `(rotation, translation)` applied `R·p + t`.
pub fn brute_force_rigid(p: &[Vec3], q: &[Vec3], rng: &mut impl Rng) -> (Rotation, Vec3) {
    let n = p.len() as f64;
    let pc = p.iter().copied().sum::<Vec3>() / n;
    let qc = q.iter().copied().sum::<Vec3>() / n;
    let eval = |r: &Rotation| p.iter().zip(q).map(|(a, b)| (*r * (*a - pc) - (*b - qc)).norm_squared()).sum::<f64>();
    let mut best = Rotation::identity();
    let mut best_val = eval(&best);
    for _ in 0..2000 {
        let r = random_rotation(rng);
        let v = eval(&r);
        if v < best_val {
            best = r;
            best_val = v;
        }
    }
    let mut step = 0.1;
    while step > 1e-12 {
        let mut improved = false;
        for axis in [Vec3::unit_x(), Vec3::unit_y(), Vec3::unit_z()] {
            for sign in [-1.0, 1.0] {
                let r = Rotation::from_axis_angle(axis * (sign * step)) * best;
                let v = eval(&r);
                if v < best_val {
                    best = r;
                    best_val = v;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (best, qc - best * pc)
}

/// WA and W world MPJPE (mm) from per-segment brute-force rigid fits.
pub fn per_segment_world_mpjpe(pred: &[Vec<Vec3>], gt: &[Vec<Vec3>], segment: usize, rng: &mut impl Rng) -> (f64, f64) {
    let n = pred.len();
    let mut errs_wa = vec![];
    let mut errs_w = vec![];
    for start in (0..n).step_by(segment) {
        let end = (start + segment).min(n);
        if end - start < 2 {
            continue;
        }
        for (fit_end, errs) in [(end, &mut errs_wa), (start + 2, &mut errs_w)] {
            let p: Vec<Vec3> = pred[start..fit_end].concat();
            let q: Vec<Vec3> = gt[start..fit_end].concat();
            let (r, t) = brute_force_rigid(&p, &q, rng);
            for f in start..end {
                for (a, b) in pred[f].iter().zip(&gt[f]) {
                    errs.push((r * *a + t - *b).norm() * 1000.0);
                }
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    (mean(&errs_wa), mean(&errs_w))
}
