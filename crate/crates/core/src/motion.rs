//! Per-frame human motion in one coordinate frame.

use crate::kinematics::{forward_kinematics, KinematicsError, Skeleton};
use crate::rotmath::{Rotation3, Vector3};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence<T> {
    pub fps: T,
    pub root_orientation: Vec<Rotation3<T>>,
    /// Root (pelvis) position, meters.
    pub root_translation: Vec<Vector3<T>>,
    /// Per frame, one local rotation per non-root joint.
    pub local_rotations: Vec<Vec<Rotation3<T>>>,
    pub joint_positions: Option<Vec<Vec<Vector3<T>>>>,
    /// Per frame, one probability per stationary-candidate joint.
    pub stationary_probs: Option<Vec<Vec<T>>>,
}

impl<T: Real> MotionSequence<T> {
    pub fn len(&self) -> usize {
        self.root_orientation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.root_orientation.is_empty()
    }

    pub fn validate(&self, skel: &Skeleton<T>) -> Result<(), KinematicsError> {
        let n = self.len();
        super::kinematics::check_shape("root_translation frames", n, self.root_translation.len())?;
        super::kinematics::check_shape("local_rotations frames", n, self.local_rotations.len())?;
        for f in &self.local_rotations {
            super::kinematics::check_shape("local rotations per frame", skel.len() - 1, f.len())?;
        }
        if let Some(jp) = &self.joint_positions {
            super::kinematics::check_shape("joint_positions frames", n, jp.len())?;
            for f in jp {
                super::kinematics::check_shape("joints per frame", skel.len(), f.len())?;
            }
        }
        if let Some(sp) = &self.stationary_probs {
            super::kinematics::check_shape("stationary_probs frames", n, sp.len())?;
            for (frame, f) in sp.iter().enumerate() {
                super::kinematics::check_shape("stationary candidates", skel.stationary_joints().len(), f.len())?;
                if let Some(&value) = f.iter().find(|p| !(T::zero()..=T::one()).contains(*p)) {
                    return Err(KinematicsError::ProbabilityOutOfRange { frame, value: value.as_f64() });
                }
            }
        }
        Ok(())
    }

    /// Forward kinematics for every frame.
    pub fn compute_joint_positions(&self, skel: &Skeleton<T>) -> Result<Vec<Vec<Vector3<T>>>, KinematicsError> {
        (0..self.len())
            .map(|t| {
                forward_kinematics(skel, &self.root_orientation[t], self.root_translation[t], &self.local_rotations[t])
            })
            .collect()
    }

    /// Fills `joint_positions` from the skeleton.
    pub fn with_joint_positions(mut self, skel: &Skeleton<T>) -> Result<Self, KinematicsError> {
        self.joint_positions = Some(self.compute_joint_positions(skel)?);
        Ok(self)
    }
}
