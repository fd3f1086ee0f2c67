use crate::kinematics::{
    ccd_ik_solve, check_shape, logit, sigmoid, FramePose, IkOptions, KinematicsError, Skeleton,
};
use crate::motion::MotionSequence;
use crate::rotmath::Vector3;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostprocessParams<T> {
    /// A candidate joint is treated as stationary above this probability.
    pub contact_threshold: T,
    pub ik: IkOptions<T>,
}

impl<T: Real> Default for PostprocessParams<T> {
    fn default() -> Self {
        Self { contact_threshold: T::half(), ik: IkOptions::default() }
    }
}

fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().fold(T::neg_infinity(), |m, &s| m.max(s));
    let exp: Vec<T> = logits.iter().map(|&s| (s - max).exp()).collect();
    let total: T = exp.iter().copied().sum();
    exp.into_iter().map(|e| e / total).collect()
}

fn check_tracks<T: Real>(
    tau: &[Vector3<T>],
    joint_positions: &[Vec<Vector3<T>>],
    logits: &[Vec<T>],
) -> Result<usize, KinematicsError> {
    check_shape("joint position frames", tau.len(), joint_positions.len())?;
    check_shape("logit frames", tau.len(), logits.len())?;
    let n = joint_positions.first().map_or(0, Vec::len);
    for (p, s) in joint_positions.iter().zip(logits) {
        check_shape("candidate joints", n, p.len())?;
        check_shape("candidate logits", n, s.len())?;
    }
    Ok(n)
}

/// Global translation refinement.
///
/// For every frame i ≥ 1, `d_i = Σ_j (p_i^j − p_{i−1}^j) · softmax_j(s_i^j)`
/// is subtracted from the translation of frame i and every later frame, so
/// the most stationary joints stop drifting.
pub fn refine_global_translation<T: Real>(
    tau: &[Vector3<T>],
    joint_positions: &[Vec<Vector3<T>>],
    logits: &[Vec<T>],
) -> Result<Vec<Vector3<T>>, KinematicsError> {
    refine_impl(tau, joint_positions, logits, None)
}

/// [`refine_global_translation`] that skips frames where no candidate's
/// stationary probability reaches `min_prob`.
pub fn refine_global_translation_gated<T: Real>(
    tau: &[Vector3<T>],
    joint_positions: &[Vec<Vector3<T>>],
    logits: &[Vec<T>],
    min_prob: T,
) -> Result<Vec<Vector3<T>>, KinematicsError> {
    refine_impl(tau, joint_positions, logits, Some(min_prob))
}

fn refine_impl<T: Real>(
    tau: &[Vector3<T>],
    joint_positions: &[Vec<Vector3<T>>],
    logits: &[Vec<T>],
    gate: Option<T>,
) -> Result<Vec<Vector3<T>>, KinematicsError> {
    let n = check_tracks(tau, joint_positions, logits)?;
    let mut out = tau.to_vec();
    if n == 0 {
        return Ok(out);
    }
    let mut correction = Vector3::zeros();
    for i in 1..tau.len() {
        let active = gate.is_none_or(|g| logits[i].iter().any(|&s| sigmoid(s) >= g));
        if active {
            let w = softmax(&logits[i]);
            let d: Vector3<T> = (0..n)
                .map(|j| (joint_positions[i][j] - joint_positions[i - 1][j]) * w[j])
                .sum();
            correction += d;
        }
        out[i] -= correction;
    }
    Ok(out)
}

/// Stationary position adjustment: `p*_1 = p_1`,
/// `p*_i = p_i·(1 − c_i) + p*_{i−1}·c_i`.
pub fn adjust_stationary_positions<T: Real>(positions: &[Vector3<T>], probs: &[T]) -> Result<Vec<Vector3<T>>, KinematicsError> {
    check_shape("stationary probabilities", positions.len(), probs.len())?;
    if let Some((frame, &value)) = probs.iter().enumerate().find(|(_, c)| !(T::zero()..=T::one()).contains(*c)) {
        return Err(KinematicsError::ProbabilityOutOfRange { frame, value: value.as_f64() });
    }
    let mut out: Vec<Vector3<T>> = Vec::with_capacity(positions.len());
    for (i, (&p, &c)) in positions.iter().zip(probs).enumerate() {
        let adjusted = match i {
            0 => p,
            _ => p * (T::one() - c) + out[i - 1] * c,
        };
        out.push(adjusted);
    }
    Ok(out)
}

/// Translation refinement, then stationary position adjustment per
/// candidate joint, then per-frame CCD IK toward the adjusted positions of
/// the joints whose probability exceeds the contact threshold.
pub fn postprocess_motion<T: Real>(
    motion: &MotionSequence<T>,
    skel: &Skeleton<T>,
    params: &PostprocessParams<T>,
) -> Result<MotionSequence<T>, KinematicsError> {
    motion.validate(skel)?;
    let probs = motion.stationary_probs.as_ref().ok_or(KinematicsError::MissingStationary)?;
    let candidates = skel.stationary_joints();
    let joints = motion.compute_joint_positions(skel)?;

    let cand_pos: Vec<Vec<Vector3<T>>> = joints.iter().map(|f| candidates.iter().map(|&j| f[j]).collect()).collect();
    let logits: Vec<Vec<T>> = probs.iter().map(|f| f.iter().map(|&p| logit(p)).collect()).collect();
    let tau = refine_global_translation_gated(&motion.root_translation, &cand_pos, &logits, params.contact_threshold)?;

    let shifted: Vec<Vec<Vector3<T>>> = cand_pos
        .iter()
        .zip(tau.iter().zip(&motion.root_translation))
        .map(|(f, (new, old))| f.iter().map(|p| *p + (*new - *old)).collect())
        .collect();
    let mut targets_per_joint = Vec::with_capacity(candidates.len());
    for k in 0..candidates.len() {
        let track: Vec<Vector3<T>> = shifted.iter().map(|f| f[k]).collect();
        let c: Vec<T> = probs.iter().map(|f| f[k]).collect();
        targets_per_joint.push(adjust_stationary_positions(&track, &c)?);
    }

    let mut local_rotations = Vec::with_capacity(motion.len());
    for t in 0..motion.len() {
        let targets: Vec<(usize, Vector3<T>)> = candidates
            .iter()
            .enumerate()
            .filter(|(k, _)| probs[t][*k] > params.contact_threshold)
            .map(|(k, &j)| (j, targets_per_joint[k][t]))
            .collect();
        let pose = FramePose {
            root_rot: motion.root_orientation[t],
            root_pos: tau[t],
            theta: motion.local_rotations[t].clone(),
        };
        if targets.is_empty() {
            local_rotations.push(pose.theta);
            continue;
        }
        let ik = IkOptions { include_root: false, ..params.ik };
        local_rotations.push(ccd_ik_solve(skel, &pose, &targets, &ik)?.pose.theta);
    }

    let out = MotionSequence {
        fps: motion.fps,
        root_orientation: motion.root_orientation.clone(),
        root_translation: tau,
        local_rotations,
        joint_positions: None,
        stationary_probs: motion.stationary_probs.clone(),
    };
    out.with_joint_positions(skel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotmath::Rotation3;

    type V = Vector3<f64>;

    #[test]
    fn no_displacement_means_no_change() {
        let tau: Vec<V> = (0..5).map(|i| V::new(i as f64, 0.0, 0.0)).collect();
        let joints = vec![vec![V::new(1.0, 2.0, 3.0), V::new(0.0, 1.0, 0.0)]; 5];
        let logits = vec![vec![0.3, -1.0]; 5];
        assert_eq!(refine_global_translation(&tau, &joints, &logits).unwrap(), tau);
    }

    #[test]
    fn dominant_stationary_joint_is_pinned() {
        let n = 30;
        let tau: Vec<V> = (0..n).map(|i| V::new(0.0, 0.9, 0.02 * i as f64)).collect();
        // Joint 0 drifts 1 cm/frame in x; the others wander.
        let joints: Vec<Vec<V>> = (0..n)
            .map(|i| {
                let t = i as f64;
                vec![V::new(0.01 * t, 0.0, 0.5), V::new(t.sin(), 0.2, t.cos()), V::new(0.3 * t, -0.1, 0.0)]
            })
            .collect();
        let logits = vec![vec![100.0, -100.0, -100.0]; n];
        let refined = refine_global_translation(&tau, &joints, &logits).unwrap();
        // Frame-by-frame simulation: world position = joint + (τ* − τ).
        let world: Vec<V> = (0..n).map(|i| joints[i][0] + (refined[i] - tau[i])).collect();
        for w in &world {
            assert!((*w - world[0]).max_abs() < 1e-6);
        }
    }

    #[test]
    fn equal_logits_average_displacements() {
        let tau = vec![V::zeros(); 3];
        let d1 = V::new(0.01, 0.0, 0.0);
        let d2 = V::new(0.0, 0.0, 0.03);
        let joints: Vec<Vec<V>> = (0..3).map(|i| vec![d1 * i as f64, d2 * i as f64]).collect();
        let logits = vec![vec![0.7, 0.7]; 3];
        let refined = refine_global_translation(&tau, &joints, &logits).unwrap();
        let step = (d1 + d2) * 0.5;
        assert!((refined[1] + step).max_abs() < 1e-15);
        assert!((refined[2] + step * 2.0).max_abs() < 1e-15);
    }

    #[test]
    fn gating_skips_frames_without_contact() {
        let tau = vec![V::zeros(); 3];
        let joints: Vec<Vec<V>> = (0..3).map(|i| vec![V::new(i as f64, 0.0, 0.0)]).collect();
        let refined = refine_global_translation_gated(&tau, &joints, &vec![vec![-5.0]; 3], 0.5).unwrap();
        assert_eq!(refined, tau);
    }

    #[test]
    fn refine_shape_errors() {
        let err = refine_global_translation(&[V::zeros(); 2], &[vec![V::zeros()]], &[vec![0.0], vec![0.0]]).unwrap_err();
        assert!(matches!(err, KinematicsError::ShapeMismatch { .. }));
    }

    #[test]
    fn adjust_recurrence() {
        let p: Vec<V> = (0..3).map(|i| V::new(i as f64, 0.0, 0.0)).collect();
        assert_eq!(adjust_stationary_positions(&p, &[0.0; 3]).unwrap(), p);
        assert!(adjust_stationary_positions(&p, &[1.0; 3]).unwrap().iter().all(|q| *q == p[0]));
        let half = adjust_stationary_positions(&p, &[0.5; 3]).unwrap();
        let xs: Vec<f64> = half.iter().map(|q| q.x).collect();
        assert_eq!(xs, vec![0.0, 0.5, 1.25]);
    }

    #[test]
    fn adjust_output_in_convex_hull() {
        let p: Vec<V> = (0..20).map(|i| V::new((i as f64).sin(), (i as f64 * 0.3).cos(), i as f64)).collect();
        let c: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).fract()).collect();
        let out = adjust_stationary_positions(&p, &c).unwrap();
        for i in 1..20 {
            // out_i lies on the segment [p_i, out_{i−1}].
            let seg = out[i - 1] - p[i];
            let rel = out[i] - p[i];
            assert!(seg.cross(rel).norm() < 1e-12);
            assert!(rel.dot(seg) >= -1e-15 && rel.norm() <= seg.norm() + 1e-15);
        }
    }

    #[test]
    fn adjust_rejects_bad_probabilities() {
        let err = adjust_stationary_positions(&[V::zeros(); 2], &[0.5, 1.5]).unwrap_err();
        assert_eq!(err, KinematicsError::ProbabilityOutOfRange { frame: 1, value: 1.5 });
    }

    #[test]
    fn no_stationary_frames_leaves_motion_alone() {
        let skel = Skeleton::<f64>::smpl24();
        let n = 12;
        let motion = MotionSequence {
            fps: 30.0,
            root_orientation: (0..n).map(|i| Rotation3::about_y(0.05 * i as f64)).collect(),
            root_translation: (0..n).map(|i| V::new(0.0, 0.9, 0.03 * i as f64)).collect(),
            local_rotations: (0..n)
                .map(|i| {
                    let mut th = vec![Rotation3::identity(); 23];
                    th[0] = Rotation3::about_x(0.3 * (i as f64 * 0.4).sin());
                    th
                })
                .collect(),
            joint_positions: None,
            stationary_probs: Some(vec![vec![1e-6; 6]; n]),
        };
        let out = postprocess_motion(&motion, &skel, &PostprocessParams::default()).unwrap();
        let before = motion.compute_joint_positions(&skel).unwrap();
        let after = out.joint_positions.unwrap();
        for (a, b) in before.iter().flatten().zip(after.iter().flatten()) {
            assert!((*a - *b).max_abs() < 1e-6);
        }
    }

    #[test]
    fn missing_probabilities_is_an_error() {
        let skel = Skeleton::<f64>::smpl24();
        let motion = MotionSequence {
            fps: 30.0,
            root_orientation: vec![Rotation3::identity()],
            root_translation: vec![V::zeros()],
            local_rotations: vec![vec![Rotation3::identity(); 23]],
            joint_positions: None,
            stationary_probs: None,
        };
        assert_eq!(
            postprocess_motion(&motion, &skel, &PostprocessParams::default()).unwrap_err(),
            KinematicsError::MissingStationary
        );
    }
}
