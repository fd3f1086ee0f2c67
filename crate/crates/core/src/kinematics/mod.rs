//! Skeletons, forward kinematics, CCD inverse kinematics and the
//! stationary-joint post-processing pipeline.

mod fk;
mod ik;
mod postprocess;
mod skeleton;

use thiserror::Error;

pub use fk::{forward_kinematics, forward_kinematics_full, FkResult};
pub use ik::{ccd_ik_solve, FramePose, IkOptions, IkReport};
pub use postprocess::{
    adjust_stationary_positions, postprocess_motion, refine_global_translation, refine_global_translation_gated,
    PostprocessParams,
};
pub use skeleton::{Joint, Skeleton, StationaryTrack, SMPL24_NAMES, SMPL24_PARENTS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("{what}: expected {expected}, got {got}")]
    ShapeMismatch { what: &'static str, expected: usize, got: usize },
    #[error("unknown joint index {0}")]
    UnknownJoint(usize),
    #[error("frame {frame}: stationary probability {value} outside [0, 1]")]
    ProbabilityOutOfRange { frame: usize, value: f64 },
    #[error("invalid skeleton: {0}")]
    InvalidSkeleton(String),
    #[error("motion has no stationary probabilities")]
    MissingStationary,
}

pub(crate) fn check_shape(what: &'static str, expected: usize, got: usize) -> Result<(), KinematicsError> {
    if expected == got {
        Ok(())
    } else {
        Err(KinematicsError::ShapeMismatch { what, expected, got })
    }
}

/// Logistic function.
pub fn sigmoid<T: crate::Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Inverse of [`sigmoid`], with `p` clamped away from 0 and 1.
pub fn logit<T: crate::Real>(p: T) -> T {
    let eps = T::lit(1e-12);
    let p = p.max(eps).min(T::one() - eps);
    (p / (T::one() - p)).ln()
}
