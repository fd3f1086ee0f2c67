use crate::kinematics::{sigmoid, KinematicsError};
use crate::rotmath::Vector3;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Joint<T> {
    pub name: String,
    pub parent: Option<usize>,
    /// Rest offset from the parent joint, meters.
    pub offset: Vector3<T>,
}

/// Joint tree, topologically sorted with the root at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton<T> {
    pub name: String,
    joints: Vec<Joint<T>>,
    /// Joints that may be stationary (hands, toes, heels).
    stationary: Vec<usize>,
}

pub const SMPL24_NAMES: [&str; 24] = [
    "pelvis",
    "left_hip",
    "right_hip",
    "spine1",
    "left_knee",
    "right_knee",
    "spine2",
    "left_ankle",
    "right_ankle",
    "spine3",
    "left_foot",
    "right_foot",
    "neck",
    "left_collar",
    "right_collar",
    "head",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hand",
    "right_hand",
];

pub const SMPL24_PARENTS: [i32; 24] = [-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21];

// Neutral rest pose, y up, facing +z, left = +x. Approximates the mean-shape
// SMPL joint regressor output (rounded to 0.1 mm).
const SMPL24_OFFSETS: [[f64; 3]; 24] = [
    [0.0, 0.0, 0.0],
    [0.0695, -0.0914, -0.0048],
    [-0.0677, -0.0905, -0.0043],
    [-0.0025, 0.1089, -0.0267],
    [0.0343, -0.3752, -0.0045],
    [-0.0383, -0.3826, -0.0089],
    [0.0055, 0.1352, 0.0011],
    [-0.0136, -0.3980, -0.0437],
    [0.0158, -0.3984, -0.0423],
    [0.0015, 0.0529, 0.0254],
    [0.0264, -0.0558, 0.1193],
    [-0.0254, -0.0481, 0.1233],
    [-0.0028, 0.2139, -0.0429],
    [0.0788, 0.1217, -0.0341],
    [-0.0818, 0.1188, -0.0386],
    [0.0052, 0.0650, 0.0513],
    [0.0910, 0.0305, -0.0089],
    [-0.0960, 0.0326, -0.0091],
    [0.2596, -0.0128, -0.0275],
    [-0.2537, -0.0134, -0.0215],
    [0.2492, 0.0090, -0.0012],
    [-0.2553, 0.0078, -0.0056],
    [0.0840, -0.0082, -0.0149],
    [-0.0847, -0.0061, -0.0103],
];

/// Stationary candidates of the SMPL layout: heels (ankles), toes, hands.
pub const SMPL24_STATIONARY: [usize; 6] = [7, 8, 10, 11, 22, 23];

impl<T: Real> Skeleton<T> {
    pub fn new(name: impl Into<String>, joints: Vec<Joint<T>>, stationary: Vec<usize>) -> Result<Self, KinematicsError> {
        let bad = |m: String| Err(KinematicsError::InvalidSkeleton(m));
        if joints.is_empty() {
            return bad("no joints".into());
        }
        if joints[0].parent.is_some() {
            return bad("joint 0 must be the root".into());
        }
        for (i, j) in joints.iter().enumerate().skip(1) {
            match j.parent {
                None => return bad(format!("joint {i} ({}) is a second root", j.name)),
                Some(p) if p >= i => return bad(format!("joint {i} ({}) has parent {p} >= its index", j.name)),
                _ => {}
            }
            if j.offset.norm() == T::zero() {
                return bad(format!("joint {i} ({}) has a zero rest offset", j.name));
            }
        }
        if let Some(&s) = stationary.iter().find(|&&s| s >= joints.len()) {
            return Err(KinematicsError::UnknownJoint(s));
        }
        Ok(Self { name: name.into(), joints, stationary })
    }

    /// The bundled 24-joint SMPL-layout skeleton.
    pub fn smpl24() -> Self {
        let joints = (0..24)
            .map(|i| Joint {
                name: SMPL24_NAMES[i].to_string(),
                parent: usize::try_from(SMPL24_PARENTS[i]).ok(),
                offset: Vector3::from_array(SMPL24_OFFSETS[i].map(T::lit)),
            })
            .collect();
        Self::new("smpl24", joints, SMPL24_STATIONARY.to_vec()).expect("bundled skeleton is valid")
    }

    /// Unbranched chain along +x with the given link lengths; the last
    /// joint is the end effector.
    pub fn chain(lengths: &[T]) -> Result<Self, KinematicsError> {
        let mut joints = vec![Joint { name: "root".into(), parent: None, offset: Vector3::zeros() }];
        for (i, &l) in lengths.iter().enumerate() {
            joints.push(Joint {
                name: format!("link{}", i + 1),
                parent: Some(i),
                offset: Vector3::new(l, T::zero(), T::zero()),
            });
        }
        let tip = joints.len() - 1;
        Self::new("chain", joints, vec![tip])
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn joints(&self) -> &[Joint<T>] {
        &self.joints
    }

    pub fn parent(&self, j: usize) -> Option<usize> {
        self.joints[j].parent
    }

    pub fn stationary_joints(&self) -> &[usize] {
        &self.stationary
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    /// Total rest length from `joint` up to the root.
    pub fn reach(&self, joint: usize) -> T {
        let mut total = T::zero();
        let mut j = joint;
        while let Some(p) = self.joints[j].parent {
            total += self.joints[j].offset.norm();
            j = p;
        }
        total
    }
}

/// Per-frame, per-candidate stationary logits and their probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryTrack<T> {
    pub logits: Vec<Vec<T>>,
    pub probs: Vec<Vec<T>>,
}

impl<T: Real> StationaryTrack<T> {
    pub fn from_logits(logits: Vec<Vec<T>>) -> Self {
        let probs = logits.iter().map(|f| f.iter().map(|&s| sigmoid(s)).collect()).collect();
        Self { logits, probs }
    }

    pub fn from_probs(probs: Vec<Vec<T>>) -> Self {
        let logits = probs.iter().map(|f| f.iter().map(|&p| super::logit(p)).collect()).collect();
        Self { logits, probs }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smpl24_is_valid_and_sorted() {
        let s = Skeleton::<f64>::smpl24();
        assert_eq!(s.len(), 24);
        for i in 1..24 {
            assert!(s.parent(i).unwrap() < i);
        }
        assert_eq!(s.find("left_ankle"), Some(7));
    }

    #[test]
    fn rejects_bad_trees() {
        let root = Joint { name: "r".into(), parent: None, offset: Vector3::<f64>::zeros() };
        let child = |p| Joint { name: "c".into(), parent: Some(p), offset: Vector3::unit_x() };
        assert!(Skeleton::new("s", vec![root.clone(), child(1)], vec![]).is_err());
        let zero = Joint { name: "z".into(), parent: Some(0), offset: Vector3::zeros() };
        assert!(Skeleton::new("s", vec![root.clone(), zero], vec![]).is_err());
        let second_root = Joint { name: "r2".into(), parent: None, offset: Vector3::unit_x() };
        assert!(Skeleton::new("s", vec![root.clone(), second_root], vec![]).is_err());
        assert_eq!(
            Skeleton::new("s", vec![root, child(0)], vec![5]).unwrap_err(),
            KinematicsError::UnknownJoint(5)
        );
    }

    #[test]
    fn stationary_probs_are_sigmoid_of_logits() {
        let t = StationaryTrack::from_logits(vec![vec![-800.0, -2.0, 0.0, 3.5, 800.0]]);
        for (&s, &p) in t.logits[0].iter().zip(&t.probs[0]) {
            assert!((0.0..=1.0).contains(&p));
            assert!((p - 1.0 / (1.0 + f64::exp(-s))).abs() < 1e-12);
        }
    }
}
