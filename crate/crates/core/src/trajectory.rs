//! World trajectory rollout.
//!
//! The first frame's GV system is the world frame. Orientations are rolled
//! out with the prefix product of the yaw-only GV-to-GV rotations, and the
//! root translation is the cumulative sum of root displacements rotated
//! into that frame.

use thiserror::Error;

use crate::gv::{gv_orientation_track, GvError};
use crate::rotmath::{Rotation3, Vector3};
use crate::scalar::Real;

/// Prefix products are re-orthonormalized this often.
pub const REORTHONORMALIZE_EVERY: usize = 256;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryError {
    #[error("track `{track}` has {got} frames, expected {expected}")]
    LengthMismatch { track: &'static str, expected: usize, got: usize },
    #[error("trajectory inputs are empty")]
    Empty,
    #[error("frame {frame}: {source}")]
    Geometry { frame: usize, source: GvError },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryInputs<T> {
    pub gamma_gv: Vec<Rotation3<T>>,
    pub gamma_c: Vec<Rotation3<T>>,
    /// Root displacement from t to t+1 in the body frame, meters per frame.
    pub v_root: Vec<Vector3<T>>,
    /// Camera t−1 → camera t rotations; entry 0 is ignored.
    pub r_delta: Vec<Rotation3<T>>,
    pub fps: T,
}

impl<T: Real> TrajectoryInputs<T> {
    pub fn len(&self) -> usize {
        self.gamma_gv.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma_gv.is_empty()
    }

    pub fn validate(&self) -> Result<(), TrajectoryError> {
        let n = self.gamma_gv.len();
        if n == 0 {
            return Err(TrajectoryError::Empty);
        }
        check_len("gamma_c", n, self.gamma_c.len())?;
        check_len("v_root", n, self.v_root.len())?;
        check_len("r_delta", n, self.r_delta.len())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldTrajectory<T> {
    pub gamma_w: Vec<Rotation3<T>>,
    pub tau_w: Vec<Vector3<T>>,
}

fn check_len(track: &'static str, expected: usize, got: usize) -> Result<(), TrajectoryError> {
    if expected == got {
        Ok(())
    } else {
        Err(TrajectoryError::LengthMismatch { track, expected, got })
    }
}

/// `Γ_w⁰ = Γ_GV⁰`, `Γ_wᵗ = (∏_{i=1..t} R_ΔGVⁱ) · Γ_GVᵗ`.
pub fn recover_world_orientations<T: Real>(
    gamma_gv: &[Rotation3<T>],
    r_delta_gv: &[Rotation3<T>],
) -> Result<Vec<Rotation3<T>>, TrajectoryError> {
    check_len("r_delta_gv", gamma_gv.len(), r_delta_gv.len())?;
    let mut out = Vec::with_capacity(gamma_gv.len());
    let mut acc = Rotation3::identity();
    for (t, (g, d)) in gamma_gv.iter().zip(r_delta_gv).enumerate() {
        if t == 0 {
            out.push(*g);
            continue;
        }
        acc = acc.compose(d);
        if t % REORTHONORMALIZE_EVERY == 0 {
            acc = acc.reorthonormalize();
        }
        out.push(acc.compose(g));
    }
    Ok(out)
}

/// `τ_w⁰ = 0`, `τ_wᵗ = Σ_{i=0..t−1} Γ_wⁱ · v_rootⁱ`.
pub fn recover_world_translations<T: Real>(
    gamma_w: &[Rotation3<T>],
    v_root: &[Vector3<T>],
) -> Result<Vec<Vector3<T>>, TrajectoryError> {
    check_len("v_root", gamma_w.len(), v_root.len())?;
    let mut out = Vec::with_capacity(gamma_w.len());
    let mut tau = Vector3::zeros();
    for (g, v) in gamma_w.iter().zip(v_root) {
        out.push(tau);
        tau += g.apply(*v);
    }
    Ok(out)
}

pub fn recover_global_trajectory<T: Real>(inputs: &TrajectoryInputs<T>) -> Result<WorldTrajectory<T>, TrajectoryError> {
    inputs.validate()?;
    let track = gv_orientation_track(&inputs.gamma_c, &inputs.gamma_gv, &inputs.r_delta)
        .map_err(|(frame, source)| TrajectoryError::Geometry { frame, source })?;
    let gamma_w = recover_world_orientations(&track.gamma_gv, &track.r_delta_gv)?;
    let tau_w = recover_world_translations(&gamma_w, &inputs.v_root)?;
    Ok(WorldTrajectory { gamma_w, tau_w })
}

/// Camera → world (GV₀) rotations implied by the GV rollout:
/// `(∏ R_ΔGV) · R_c2gvᵗ` with `R_c2gvᵗ = Γ_GVᵗ · (Γ_cᵗ)⁻¹`.
pub fn gv_camera_to_world<T: Real>(inputs: &TrajectoryInputs<T>) -> Result<Vec<Rotation3<T>>, TrajectoryError> {
    inputs.validate()?;
    let track = gv_orientation_track(&inputs.gamma_c, &inputs.gamma_gv, &inputs.r_delta)
        .map_err(|(frame, source)| TrajectoryError::Geometry { frame, source })?;
    let mut acc = Rotation3::identity();
    let mut out = Vec::with_capacity(inputs.len());
    for t in 0..inputs.len() {
        if t > 0 {
            acc = acc.compose(&track.r_delta_gv[t]);
        }
        let r_c2gv = inputs.gamma_gv[t].compose(&inputs.gamma_c[t].inverse());
        out.push(acc.compose(&r_c2gv));
    }
    Ok(out)
}

/// Baseline that chains raw relative camera rotations from frame 0 and
/// anchors the result in GV₀: `R_c2gv⁰ · (R_Δᵗ ⋯ R_Δ¹)ᵀ`.
pub fn chained_camera_to_world<T: Real>(inputs: &TrajectoryInputs<T>) -> Result<Vec<Rotation3<T>>, TrajectoryError> {
    inputs.validate()?;
    let r_c2gv0 = inputs.gamma_gv[0].compose(&inputs.gamma_c[0].inverse());
    let mut cam_t_from_cam0 = Rotation3::identity();
    let mut out = Vec::with_capacity(inputs.len());
    for t in 0..inputs.len() {
        if t > 0 {
            cam_t_from_cam0 = inputs.r_delta[t].compose(&cam_t_from_cam0);
        }
        out.push(r_c2gv0.compose(&cam_t_from_cam0.inverse()));
    }
    Ok(out)
}

/// World orientations from the camera-chaining baseline.
pub fn chained_world_orientations<T: Real>(inputs: &TrajectoryInputs<T>) -> Result<Vec<Rotation3<T>>, TrajectoryError> {
    let c2w = chained_camera_to_world(inputs)?;
    Ok(c2w.iter().zip(&inputs.gamma_c).map(|(c, g)| c.compose(g)).collect())
}

/// Angle between the world gravity axis (+y) and gravity mapped from camera
/// coordinates through `camera_to_world`.
pub fn gravity_tilt<T: Real>(camera_to_world: &Rotation3<T>, gravity_c: Vector3<T>) -> T {
    let g = camera_to_world.apply(gravity_c.normalized());
    let cross = g.cross(Vector3::unit_y()).norm();
    cross.atan2(g.y)
}
