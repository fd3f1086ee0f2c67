//! Training losses and their gradients with respect to the raw head outputs.
//!
//! Every term is a mean over its elements:
//! - `v_root`: squared error of the root displacement.
//! - `gamma_gv`: squared error of the GV orientation matrix.
//! - `smpl`: squared error over Γ_c and θ matrices and β.
//! - `j3d`: root-relative camera-frame joints `Γ_c · FK(θ)`.
//! - `j2d`: pixel error of those joints placed at the restored camera
//!   translation and projected.
//! - `v3d`: points rigidly attached to joints, camera frame, root-relative.
//! - `stationary`: binary cross-entropy on the stationary logits.

use gravview_core::kinematics::{forward_kinematics_full, sigmoid, Skeleton};
use gravview_core::rotmath::{Matrix3, Rotation3, Vector3};
use gravview_core::Real;

use crate::config::{LossWeights, ModelConfig};
use crate::heads::{
    decode_6d_backward, project, project_backward, restore_full_translation, restore_full_translation_backward, softplus,
    Intrinsics, MultiTaskOutput, BETA, CW, GAMMA_C, GAMMA_GV, STATIONARY, THETA, V_ROOT,
};
use crate::tensor::Matrix;
use crate::SeqError;

/// Ground truth for each loss term. A term whose target is `None` is
/// skipped; a nonzero weight on a missing target is an error.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossTargets<T> {
    pub v_root: Option<Vec<Vector3<T>>>,
    pub gamma_gv: Option<Vec<Rotation3<T>>>,
    pub smpl: Option<SmplTarget<T>>,
    /// Root-relative camera-frame joints, `frames × joints`.
    pub joints3d: Option<Vec<Vec<Vector3<T>>>>,
    pub joints2d: Option<Keypoints2d<T>>,
    pub points3d: Option<PointTarget<T>>,
    /// Stationary labels in [0, 1], `frames × candidates`.
    pub stationary: Option<Matrix<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmplTarget<T> {
    pub gamma_c: Vec<Rotation3<T>>,
    pub theta: Vec<Vec<Rotation3<T>>>,
    pub beta: Matrix<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Keypoints2d<T> {
    /// Pixel coordinates, `frames × joints`.
    pub pixels: Vec<Vec<[T; 2]>>,
    /// Crop center and size in pixels per frame.
    pub bbox_px: Vec<[T; 3]>,
    pub intrinsics: Intrinsics<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointTarget<T> {
    /// `(joint, offset in the joint frame)` per point.
    pub anchors: Vec<(usize, Vector3<T>)>,
    /// Root-relative camera-frame positions, `frames × points`.
    pub points: Vec<Vec<Vector3<T>>>,
}

/// Unweighted term values and the weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossTerms<T> {
    pub v_root: T,
    pub gamma_gv: T,
    pub smpl: T,
    pub j3d: T,
    pub j2d: T,
    pub v3d: T,
    pub stationary: T,
    pub total: T,
}

fn check(what: &'static str, expected: usize, got: usize) -> Result<(), SeqError> {
    if expected == got {
        Ok(())
    } else {
        Err(SeqError::ShapeMismatch { what, expected, got })
    }
}

fn require<'a, X>(target: &'a Option<X>, weight: f64, name: &'static str) -> Result<Option<&'a X>, SeqError> {
    match target {
        Some(x) => Ok(Some(x)),
        None if weight != 0.0 => Err(SeqError::MissingTarget(name)),
        None => Ok(None),
    }
}

fn mat_sq<T: Real>(a: &Matrix3<T>, b: &Matrix3<T>) -> T {
    let d = *a - *b;
    d.m.iter().flatten().map(|&x| x * x).sum()
}

fn set_row6<T: Real>(m: &mut Matrix<T>, t: usize, offset: usize, g: [T; 6]) {
    for (k, v) in g.into_iter().enumerate() {
        let cur = m.get(t, offset + k);
        m.set(t, offset + k, cur + v);
    }
}

/// Loss values only.
pub fn compute_losses<T: Real>(
    cfg: &ModelConfig,
    skel: &Skeleton<T>,
    pred: &MultiTaskOutput<T>,
    targets: &LossTargets<T>,
    weights: &LossWeights,
) -> Result<LossTerms<T>, SeqError> {
    Ok(losses_and_gradients(cfg, skel, pred, targets, weights)?.0)
}

/// Loss values and `dL_total/d raw` for each head.
pub fn losses_and_gradients<T: Real>(
    cfg: &ModelConfig,
    skel: &Skeleton<T>,
    pred: &MultiTaskOutput<T>,
    targets: &LossTargets<T>,
    weights: &LossWeights,
) -> Result<(LossTerms<T>, Vec<Matrix<T>>), SeqError> {
    let n = pred.gamma_c.len();
    check("skeleton joints", cfg.joints, skel.len())?;
    let mut d_raw: Vec<Matrix<T>> = pred.raw.iter().map(|m| Matrix::zeros(m.rows(), m.cols())).collect();
    let mut terms = LossTerms::default();
    let nf = T::from_usize_lossy(n.max(1));
    let two = T::two();

    if let Some(v) = require(&targets.v_root, weights.v_root, "v_root")? {
        check("v_root frames", n, v.len())?;
        let count = nf * T::lit(3.0);
        let w = T::lit(weights.v_root);
        for t in 0..n {
            let e = pred.v_root[t] - v[t];
            terms.v_root += e.norm_squared() / count;
            for k in 0..3 {
                d_raw[V_ROOT].set(t, k, w * two * e[k] / count);
            }
        }
    }

    if let Some(g) = require(&targets.gamma_gv, weights.gamma_gv, "gamma_gv")? {
        check("gamma_gv frames", n, g.len())?;
        let count = nf * T::lit(9.0);
        let w = T::lit(weights.gamma_gv);
        for t in 0..n {
            let (a, b) = (pred.gamma_gv[t].matrix(), g[t].matrix());
            terms.gamma_gv += mat_sq(a, b) / count;
            let dm = (*a - *b).scale(w * two / count);
            set_row6(&mut d_raw[GAMMA_GV], t, 0, decode_6d_backward(pred.raw[GAMMA_GV].row(t), &dm));
        }
    }

    if let Some(s) = require(&targets.smpl, weights.smpl, "smpl")? {
        check("smpl gamma_c frames", n, s.gamma_c.len())?;
        check("smpl theta frames", n, s.theta.len())?;
        check("smpl beta frames", n, s.beta.rows())?;
        check("smpl beta width", cfg.betas, s.beta.cols())?;
        let per_frame = 9 * cfg.joints + cfg.betas;
        let count = nf * T::from_usize_lossy(per_frame);
        let w = T::lit(weights.smpl);
        let scale = w * two / count;
        for t in 0..n {
            check("smpl theta joints", cfg.joints - 1, s.theta[t].len())?;
            let (a, b) = (pred.gamma_c[t].matrix(), s.gamma_c[t].matrix());
            terms.smpl += mat_sq(a, b) / count;
            set_row6(&mut d_raw[GAMMA_C], t, 0, decode_6d_backward(pred.raw[GAMMA_C].row(t), &(*a - *b).scale(scale)));
            for j in 0..cfg.joints - 1 {
                let (a, b) = (pred.theta[t][j].matrix(), s.theta[t][j].matrix());
                terms.smpl += mat_sq(a, b) / count;
                let raw = &pred.raw[THETA].row(t)[6 * j..6 * j + 6];
                let g = decode_6d_backward(raw, &(*a - *b).scale(scale));
                set_row6(&mut d_raw[THETA], t, 6 * j, g);
            }
            for k in 0..cfg.betas {
                let e = pred.beta.get(t, k) - s.beta.get(t, k);
                terms.smpl += e * e / count;
                d_raw[BETA].set(t, k, scale * e);
            }
        }
    }

    if let Some(y) = require(&targets.stationary, weights.stationary, "stationary")? {
        check("stationary frames", n, y.rows())?;
        check("stationary candidates", cfg.stationary, y.cols())?;
        let count = nf * T::from_usize_lossy(cfg.stationary.max(1));
        let w = T::lit(weights.stationary);
        for t in 0..n {
            for k in 0..cfg.stationary {
                let (z, label) = (pred.stationary_logits.get(t, k), y.get(t, k));
                terms.stationary += (softplus(z) - label * z) / count;
                d_raw[STATIONARY].set(t, k, w * (sigmoid(z) - label) / count);
            }
        }
    }

    let j3d = require(&targets.joints3d, weights.j3d, "joints3d")?;
    let j2d = require(&targets.joints2d, weights.j2d, "joints2d")?;
    let v3d = require(&targets.points3d, weights.v3d, "points3d")?;
    if j3d.is_some() || j2d.is_some() || v3d.is_some() {
        let jn = cfg.joints;
        if let Some(j) = j3d {
            check("joints3d frames", n, j.len())?;
        }
        if let Some(k) = j2d {
            check("joints2d frames", n, k.pixels.len())?;
            check("bbox frames", n, k.bbox_px.len())?;
        }
        if let Some(p) = v3d {
            check("points3d frames", n, p.points.len())?;
            if let Some(&(bad, _)) = p.anchors.iter().find(|(j, _)| *j >= jn) {
                return Err(SeqError::ShapeMismatch { what: "point anchor joint", expected: jn, got: bad });
            }
        }
        let c3 = nf * T::from_usize_lossy(jn * 3);
        let c2 = nf * T::from_usize_lossy(jn * 2);
        let cv = nf * T::from_usize_lossy(v3d.map_or(0, |p| p.anchors.len()).max(1) * 3);
        let (w3, w2, wv) = (T::lit(weights.j3d), T::lit(weights.j2d), T::lit(weights.v3d));

        for t in 0..n {
            let fk = forward_kinematics_full(skel, &Rotation3::identity(), Vector3::zeros(), &pred.theta[t])
                .map_err(|e| SeqError::Kinematics(e.to_string()))?;
            let gc = *pred.gamma_c[t].matrix();
            let gct = gc.transpose();
            let mut dgc = Matrix3::zeros();
            let mut dq = vec![Vector3::zeros(); jn];
            let mut dg = vec![Matrix3::zeros(); jn];
            let cam: Vec<Vector3<T>> = fk.positions.iter().map(|q| gc * *q).collect();

            if let Some(j) = j3d {
                check("joints3d joints", jn, j[t].len())?;
                for (k, (p, g)) in cam.iter().zip(&j[t]).enumerate() {
                    let e = *p - *g;
                    terms.j3d += e.norm_squared() / c3;
                    let dp = e * (w3 * two / c3);
                    dgc = dgc + Matrix3::outer(dp, fk.positions[k]);
                    dq[k] += gct * dp;
                }
            }

            if let Some(kp) = j2d {
                check("joints2d joints", jn, kp.pixels[t].len())?;
                let cw = pred.cw[t];
                let tau = restore_full_translation(cw, kp.bbox_px[t], &kp.intrinsics)?;
                let mut dtau = Vector3::zeros();
                for (k, (p, g)) in cam.iter().zip(&kp.pixels[t]).enumerate() {
                    let x = *p + tau;
                    let uv = project(x, &kp.intrinsics);
                    let e = [uv[0] - g[0], uv[1] - g[1]];
                    terms.j2d += (e[0] * e[0] + e[1] * e[1]) / c2;
                    let s = w2 * two / c2;
                    let dx = project_backward(x, &kp.intrinsics, [e[0] * s, e[1] * s]);
                    dtau += dx;
                    dgc = dgc + Matrix3::outer(dx, fk.positions[k]);
                    dq[k] += gct * dx;
                }
                let [ds, dtx, dty] = restore_full_translation_backward(cw, kp.bbox_px[t], &kp.intrinsics, dtau);
                let raw_s = pred.raw[CW].get(t, 0);
                let row = d_raw[CW].row_mut(t);
                row[0] += ds * sigmoid(raw_s);
                row[1] += dtx;
                row[2] += dty;
            }

            if let Some(pt) = v3d {
                check("points3d points", pt.anchors.len(), pt.points[t].len())?;
                for (&(j, offset), g) in pt.anchors.iter().zip(&pt.points[t]) {
                    let local = fk.positions[j] + fk.rotations[j].apply(offset);
                    let e = gc * local - *g;
                    terms.v3d += e.norm_squared() / cv;
                    let dv = e * (wv * two / cv);
                    dgc = dgc + Matrix3::outer(dv, local);
                    let dl = gct * dv;
                    dq[j] += dl;
                    dg[j] = dg[j] + Matrix3::outer(dl, offset);
                }
            }

            // Forward kinematics backward pass, leaves first.
            let mut dtheta = vec![Matrix3::zeros(); jn - 1];
            for j in (1..jn).rev() {
                let p = skel.parent(j).expect("non-root joint");
                let offset = skel.joints()[j].offset;
                let dqj = dq[j];
                dq[p] += dqj;
                let gp = *fk.rotations[p].matrix();
                let th = *pred.theta[t][j - 1].matrix();
                dg[p] = dg[p] + Matrix3::outer(dqj, offset) + dg[j] * th.transpose();
                dtheta[j - 1] = gp.transpose() * dg[j];
            }
            for (j, d) in dtheta.iter().enumerate() {
                let raw = &pred.raw[THETA].row(t)[6 * j..6 * j + 6];
                set_row6(&mut d_raw[THETA], t, 6 * j, decode_6d_backward(raw, d));
            }
            set_row6(&mut d_raw[GAMMA_C], t, 0, decode_6d_backward(pred.raw[GAMMA_C].row(t), &dgc));
        }
    }

    let w = |x: f64| T::lit(x);
    terms.total = w(weights.v_root) * terms.v_root
        + w(weights.gamma_gv) * terms.gamma_gv
        + w(weights.smpl) * terms.smpl
        + w(weights.j3d) * terms.j3d
        + w(weights.j2d) * terms.j2d
        + w(weights.v3d) * terms.v3d
        + w(weights.stationary) * terms.stationary;
    Ok((terms, d_raw))
}
