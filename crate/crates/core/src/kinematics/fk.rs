use crate::kinematics::{check_shape, KinematicsError, Skeleton};
use crate::rotmath::{Rotation3, Vector3};
use crate::scalar::Real;

/// Global joint rotations and positions of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FkResult<T> {
    pub rotations: Vec<Rotation3<T>>,
    pub positions: Vec<Vector3<T>>,
}

/// Rigid-chain forward kinematics.
///
/// `theta[j - 1]` is the local rotation of joint `j`; the root uses
/// `root_rot`. A child sits at `p_parent + R_parent · offset_child`.
pub fn forward_kinematics_full<T: Real>(
    skel: &Skeleton<T>,
    root_rot: &Rotation3<T>,
    root_pos: Vector3<T>,
    theta: &[Rotation3<T>],
) -> Result<FkResult<T>, KinematicsError> {
    check_shape("local rotations", skel.len() - 1, theta.len())?;
    let mut rotations = Vec::with_capacity(skel.len());
    let mut positions = Vec::with_capacity(skel.len());
    rotations.push(*root_rot);
    positions.push(root_pos);
    for (j, joint) in skel.joints().iter().enumerate().skip(1) {
        let p = joint.parent.expect("validated skeleton");
        let parent_rot = rotations[p];
        positions.push(positions[p] + parent_rot.apply(joint.offset));
        rotations.push(parent_rot.compose(&theta[j - 1]));
    }
    Ok(FkResult { rotations, positions })
}

pub fn forward_kinematics<T: Real>(
    skel: &Skeleton<T>,
    root_rot: &Rotation3<T>,
    root_pos: Vector3<T>,
    theta: &[Rotation3<T>],
) -> Result<Vec<Vector3<T>>, KinematicsError> {
    forward_kinematics_full(skel, root_rot, root_pos, theta).map(|r| r.positions)
}
