use crate::kinematics::{check_shape, forward_kinematics_full, KinematicsError, Skeleton};
use crate::rotmath::{Rotation3, Vector3};
use crate::scalar::Real;

/// Root transform plus local rotations of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FramePose<T> {
    pub root_rot: Rotation3<T>,
    pub root_pos: Vector3<T>,
    pub theta: Vec<Rotation3<T>>,
}

impl<T: Real> FramePose<T> {
    pub fn rest(skel: &Skeleton<T>) -> Self {
        Self {
            root_rot: Rotation3::identity(),
            root_pos: Vector3::zeros(),
            theta: vec![Rotation3::identity(); skel.len() - 1],
        }
    }

    pub fn joint_positions(&self, skel: &Skeleton<T>) -> Result<Vec<Vector3<T>>, KinematicsError> {
        super::forward_kinematics(skel, &self.root_rot, self.root_pos, &self.theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkOptions<T> {
    pub max_iter: usize,
    /// Per-target distance below which a target counts as reached, meters.
    pub tol: T,
    /// Largest correction angle applied to one joint in one update, radians.
    pub max_step: T,
    /// Whether the root orientation is a free joint. The root position is
    /// never changed.
    pub include_root: bool,
}

impl<T: Real> Default for IkOptions<T> {
    fn default() -> Self {
        Self { max_iter: 50, tol: T::lit(1e-3), max_step: T::half(), include_root: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkReport<T> {
    pub pose: FramePose<T>,
    /// Outer iterations that were kept.
    pub iterations: usize,
    pub initial_error: T,
    pub final_error: T,
    /// Summed target error before the first and after each kept iteration.
    pub error_history: Vec<T>,
}

fn summed_error<T: Real>(positions: &[Vector3<T>], targets: &[(usize, Vector3<T>)]) -> (T, T) {
    targets.iter().fold((T::zero(), T::zero()), |(sum, max), (j, goal)| {
        let e = (positions[*j] - *goal).norm();
        (sum + e, max.max(e))
    })
}

/// Cyclic coordinate descent on position targets.
///
/// Each outer iteration makes one pass over the targets; for every target
/// the chain is walked from the target joint's parent toward the root, and
/// each joint is rotated (by at most `max_step`) so the target joint swings
/// toward its goal. An outer iteration that would increase the summed
/// error is discarded and the solve stops.
pub fn ccd_ik_solve<T: Real>(
    skel: &Skeleton<T>,
    pose: &FramePose<T>,
    targets: &[(usize, Vector3<T>)],
    opts: &IkOptions<T>,
) -> Result<IkReport<T>, KinematicsError> {
    check_shape("local rotations", skel.len() - 1, pose.theta.len())?;
    if let Some((j, _)) = targets.iter().find(|(j, _)| *j >= skel.len()) {
        return Err(KinematicsError::UnknownJoint(*j));
    }
    let mut current = pose.clone();
    let positions = current.joint_positions(skel)?;
    let (initial_error, initial_max) = summed_error(&positions, targets);
    let mut history = vec![initial_error];
    let mut best_error = initial_error;
    let mut max_error = initial_max;
    let mut iterations = 0;

    while iterations < opts.max_iter.max(1) && max_error >= opts.tol {
        let mut candidate = current.clone();
        for (target, goal) in targets {
            let mut joint = skel.parent(*target);
            while let Some(a) = joint {
                let is_root = skel.parent(a).is_none();
                if is_root && !opts.include_root {
                    break;
                }
                rotate_toward(skel, &mut candidate, a, *target, *goal, opts.max_step)?;
                joint = skel.parent(a);
            }
        }
        let positions = candidate.joint_positions(skel)?;
        let (err, max) = summed_error(&positions, targets);
        if err > best_error {
            break;
        }
        current = candidate;
        best_error = err;
        max_error = max;
        iterations += 1;
        history.push(err);
    }

    Ok(IkReport { pose: current, iterations, initial_error, final_error: best_error, error_history: history })
}

fn rotate_toward<T: Real>(
    skel: &Skeleton<T>,
    pose: &mut FramePose<T>,
    pivot: usize,
    effector: usize,
    goal: Vector3<T>,
    max_step: T,
) -> Result<(), KinematicsError> {
    let fk = forward_kinematics_full(skel, &pose.root_rot, pose.root_pos, &pose.theta)?;
    let to_effector = fk.positions[effector] - fk.positions[pivot];
    let to_goal = goal - fk.positions[pivot];
    let (ne, ng) = (to_effector.norm(), to_goal.norm());
    let tiny = T::lit(1e-12);
    if ne <= tiny || ng <= tiny {
        return Ok(());
    }
    let axis = to_effector.cross(to_goal);
    let sin = axis.norm() / (ne * ng);
    let cos = to_effector.dot(to_goal) / (ne * ng);
    let angle = sin.atan2(cos).min(max_step);
    if angle <= tiny || axis.norm() <= tiny {
        return Ok(());
    }
    let delta = Rotation3::from_axis_angle(axis.normalized() * angle);
    match skel.parent(pivot) {
        None => pose.root_rot = delta.compose(&pose.root_rot),
        Some(p) => {
            // New global = Δ·G_p·L = G_p·(G_pᵀ·Δ·G_p)·L.
            let gp = fk.rotations[p];
            let local = &mut pose.theta[pivot - 1];
            *local = gp.inverse().compose(&delta).compose(&gp).compose(local);
        }
    }
    Ok(())
}
