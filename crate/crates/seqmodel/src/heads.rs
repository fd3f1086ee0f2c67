//! Per-task output heads and their decoders.

use gravview_core::rotmath::{Matrix3, Rotation3, Vector3};
use gravview_core::Real;
use rand::Rng;

use crate::config::{Activation, ModelConfig};
use crate::nn::{join, Mlp2, Mlp2Cache, ParamSet};
use crate::tensor::Matrix;
use crate::SeqError;

pub const HEAD_NAMES: [&str; 7] = ["cw", "gamma_c", "theta", "beta", "stationary", "gamma_gv", "v_root"];
pub const CW: usize = 0;
pub const GAMMA_C: usize = 1;
pub const THETA: usize = 2;
pub const BETA: usize = 3;
pub const STATIONARY: usize = 4;
pub const GAMMA_GV: usize = 5;
pub const V_ROOT: usize = 6;

const NORM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Heads<T> {
    pub mlps: [Mlp2<T>; 7],
}

#[derive(Debug, Clone)]
pub struct HeadsCache<T> {
    caches: Vec<Mlp2Cache<T>>,
}

/// Decoded per-frame predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiTaskOutput<T> {
    /// Raw head outputs in [`HEAD_NAMES`] order.
    pub raw: Vec<Matrix<T>>,
    /// Weak-perspective camera `(s, tx, ty)` with `s = softplus(raw)`.
    pub cw: Vec<[T; 3]>,
    pub gamma_c: Vec<Rotation3<T>>,
    pub theta: Vec<Vec<Rotation3<T>>>,
    pub beta: Matrix<T>,
    pub stationary_logits: Matrix<T>,
    pub gamma_gv: Vec<Rotation3<T>>,
    pub v_root: Vec<Vector3<T>>,
}

impl<T: Real> MultiTaskOutput<T> {
    pub fn stationary_probs(&self) -> Matrix<T> {
        self.stationary_logits.map(gravview_core::kinematics::sigmoid)
    }
}

impl<T: Real> Heads<T> {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        Self { mlps: cfg.head_widths().map(|w| Mlp2::zeros(cfg.model_dim, cfg.head_hidden, w, Activation::Gelu)) }
    }

    pub fn init(cfg: &ModelConfig, rng: &mut impl Rng) -> Self {
        Self { mlps: cfg.head_widths().map(|w| Mlp2::init(cfg.model_dim, cfg.head_hidden, w, Activation::Gelu, rng)) }
    }

    pub fn forward(&self, tokens: &Matrix<T>) -> (MultiTaskOutput<T>, HeadsCache<T>) {
        let (raw, caches): (Vec<_>, Vec<_>) = self.mlps.iter().map(|m| m.forward_cached(tokens)).unzip();
        (decode_outputs(raw), HeadsCache { caches })
    }

    /// `d_raw` holds the gradient of each raw head output.
    pub fn backward(&self, cache: &HeadsCache<T>, d_raw: &[Matrix<T>], grad: &mut Self) -> Matrix<T> {
        let mut d_tokens: Option<Matrix<T>> = None;
        for ((mlp, c), (d, g)) in self.mlps.iter().zip(&cache.caches).zip(d_raw.iter().zip(grad.mlps.iter_mut())) {
            let dt = mlp.backward(c, d, g);
            match d_tokens.as_mut() {
                Some(acc) => acc.add_assign(&dt),
                None => d_tokens = Some(dt),
            }
        }
        d_tokens.expect("seven heads")
    }
}

impl<T: Real> ParamSet<T> for Heads<T> {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Matrix<T>)>) {
        for (m, name) in self.mlps.iter().zip(HEAD_NAMES) {
            m.visit(&join(prefix, name), out);
        }
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Matrix<T>)>) {
        for (m, name) in self.mlps.iter_mut().zip(HEAD_NAMES) {
            m.visit_mut(&join(prefix, name), out);
        }
    }
}

/// Numerically stable `ln(1 + eˣ)`.
pub fn softplus<T: Real>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

fn decode_outputs<T: Real>(raw: Vec<Matrix<T>>) -> MultiTaskOutput<T> {
    let n = raw[0].rows();
    let cw = (0..n).map(|t| {
        let r = raw[CW].row(t);
        [softplus(r[0]), r[1], r[2]]
    });
    let rot = |m: &Matrix<T>| -> Vec<Rotation3<T>> { (0..n).map(|t| decode_6d(m.row(t))).collect() };
    let theta = (0..n).map(|t| raw[THETA].row(t).chunks_exact(6).map(decode_6d).collect()).collect();
    MultiTaskOutput {
        cw: cw.collect(),
        gamma_c: rot(&raw[GAMMA_C]),
        theta,
        beta: raw[BETA].clone(),
        stationary_logits: raw[STATIONARY].clone(),
        gamma_gv: rot(&raw[GAMMA_GV]),
        v_root: (0..n).map(|t| Vector3::from_array([0, 1, 2].map(|j| raw[V_ROOT].get(t, j)))).collect(),
        raw,
    }
}

/// Multi-task predictions from transformer output tokens.
pub fn multitask_heads<T: Real>(cfg: &ModelConfig, heads: &Heads<T>, tokens: &Matrix<T>) -> Result<MultiTaskOutput<T>, SeqError> {
    if tokens.cols() != cfg.model_dim {
        return Err(SeqError::ShapeMismatch { what: "token width", expected: cfg.model_dim, got: tokens.cols() });
    }
    Ok(heads.forward(tokens).0)
}

fn col3<T: Real>(v: &[T]) -> Vector3<T> {
    Vector3::new(v[0], v[1], v[2])
}

/// Gram–Schmidt decode of two stacked columns `[a1, a2]` into a rotation
/// whose first two columns are `a1/‖a1‖` and the part of `a2` orthogonal
/// to it.
pub fn decode_6d<T: Real>(raw: &[T]) -> Rotation3<T> {
    let (b1, b2, _, _) = gram_schmidt(col3(&raw[0..3]), col3(&raw[3..6]));
    Rotation3::from_matrix_unchecked(Matrix3::from_column_vectors(b1, b2, b1.cross(b2)))
}

fn gram_schmidt<T: Real>(a1: Vector3<T>, a2: Vector3<T>) -> (Vector3<T>, Vector3<T>, T, T) {
    let n1 = a1.norm().max(T::lit(NORM_FLOOR));
    let b1 = a1 / n1;
    let u = a2 - b1 * b1.dot(a2);
    let n2 = u.norm().max(T::lit(NORM_FLOOR));
    (b1, u / n2, n1, n2)
}

/// Gradient of the raw 6D input given the gradient of the decoded matrix.
pub fn decode_6d_backward<T: Real>(raw: &[T], d_mat: &Matrix3<T>) -> [T; 6] {
    let (a1, a2) = (col3(&raw[0..3]), col3(&raw[3..6]));
    let (b1, b2, n1, n2) = gram_schmidt(a1, a2);
    let (mut db1, mut db2, db3) = (d_mat.col(0), d_mat.col(1), d_mat.col(2));
    // b3 = b1 × b2
    db1 += b2.cross(db3);
    db2 += db3.cross(b1);
    // b2 = u / ‖u‖
    let du = (db2 - b2 * b2.dot(db2)) / n2;
    // u = a2 − (b1·a2) b1
    let da2 = du - b1 * b1.dot(du);
    db1 -= du * b1.dot(a2) + a2 * b1.dot(du);
    // b1 = a1 / ‖a1‖
    let da1 = (db1 - b1 * b1.dot(db1)) / n1;
    [da1.x, da1.y, da1.z, da2.x, da2.y, da2.z]
}

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics<T> {
    pub f: T,
    pub px: T,
    pub py: T,
}

/// Full-image camera translation from a weak-perspective crop camera:
/// `t_z = 2f/(s·b)`, `t_x = tx + 2(cx − px)/(s·b)`, `t_y = ty + 2(cy − py)/(s·b)`.
pub fn restore_full_translation<T: Real>(cw: [T; 3], bbox_px: [T; 3], k: &Intrinsics<T>) -> Result<Vector3<T>, SeqError> {
    let [s, tx, ty] = cw;
    let [cx, cy, b] = bbox_px;
    if !(s > T::zero()) || !(b > T::zero()) || !(k.f > T::zero()) {
        return Err(SeqError::NonPositiveScale { s: s.as_f64(), box_size: b.as_f64(), focal: k.f.as_f64() });
    }
    let sb = s * b;
    Ok(Vector3::new(tx + T::two() * (cx - k.px) / sb, ty + T::two() * (cy - k.py) / sb, T::two() * k.f / sb))
}

/// Gradient of `(s, tx, ty)` given the gradient of the restored translation.
pub fn restore_full_translation_backward<T: Real>(cw: [T; 3], bbox_px: [T; 3], k: &Intrinsics<T>, d_tau: Vector3<T>) -> [T; 3] {
    let [s, _, _] = cw;
    let [cx, cy, b] = bbox_px;
    let ds_coeff = -T::two() / (s * s * b);
    let ds = ds_coeff * ((cx - k.px) * d_tau.x + (cy - k.py) * d_tau.y + k.f * d_tau.z);
    [ds, d_tau.x, d_tau.y]
}

/// Perspective projection of a camera-frame point to pixels.
pub fn project<T: Real>(p: Vector3<T>, k: &Intrinsics<T>) -> [T; 2] {
    [k.f * p.x / p.z + k.px, k.f * p.y / p.z + k.py]
}

/// Gradient of the point given the gradient of its pixel coordinates.
pub fn project_backward<T: Real>(p: Vector3<T>, k: &Intrinsics<T>, d_uv: [T; 2]) -> Vector3<T> {
    let iz = T::one() / p.z;
    Vector3::new(k.f * iz * d_uv[0], k.f * iz * d_uv[1], -k.f * iz * iz * (p.x * d_uv[0] + p.y * d_uv[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn canonical_6d_is_identity() {
        assert_eq!(decode_6d(&[1.0f64, 0.0, 0.0, 0.0, 1.0, 0.0]), Rotation3::identity());
    }

    #[test]
    fn random_6d_decodes_to_rotations() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let raw: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
            let r = decode_6d(&raw);
            assert!(r.orthonormality_error() < 1e-9);
            assert!((r.matrix().determinant() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn decode_backward_matches_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let raw: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
            let g = Matrix3::from_rows(std::array::from_fn(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0))));
            let f = |r: &[f64]| -> f64 {
                let m = decode_6d(r);
                (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| m.matrix().m[i][j] * g.m[i][j]).sum()
            };
            let analytic = decode_6d_backward(&raw, &g);
            for k in 0..6 {
                let (mut p, mut m) = (raw.clone(), raw.clone());
                p[k] += 1e-6;
                m[k] -= 1e-6;
                let fd = (f(&p) - f(&m)) / 2e-6;
                assert!((fd - analytic[k]).abs() < 1e-7, "{k}: {fd} vs {}", analytic[k]);
            }
        }
    }

    #[test]
    fn restore_centered_crop() {
        let k = Intrinsics { f: 1000.0, px: 500.0, py: 400.0 };
        let tau = restore_full_translation([1.0, 0.0, 0.0], [500.0, 400.0, 200.0], &k).unwrap();
        assert_eq!(tau, Vector3::new(0.0, 0.0, 10.0));
        let tau = restore_full_translation([0.7, 0.3, -0.2], [500.0, 400.0, 123.0], &k).unwrap();
        assert_eq!((tau.x, tau.y), (0.3, -0.2));
        let a = restore_full_translation([0.5, 0.1, 0.1], [620.0, 300.0, 150.0], &k).unwrap();
        let b = restore_full_translation([1.0, 0.1, 0.1], [620.0, 300.0, 150.0], &k).unwrap();
        assert!(f64::abs(a.z - 2.0 * b.z) < 1e-12);
        assert!(restore_full_translation([0.0, 0.0, 0.0], [1.0, 1.0, 1.0], &k).is_err());
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0f64) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(1000.0f64), 1000.0);
        assert!(softplus(-1000.0f64) >= 0.0);
    }
}
