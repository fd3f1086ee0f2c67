//! Gravity-view coordinates, world trajectory recovery, skeletal kinematics
//! and motion metrics, generic over the floating-point scalar.

#![allow(clippy::needless_range_loop)]

pub mod gv;
pub mod kinematics;
pub mod metrics;
pub mod motion;
pub mod rotmath;
pub mod scalar;
pub mod trajectory;

pub use scalar::Real;

pub type Vec3 = rotmath::Vector3<f64>;
pub type Mat3 = rotmath::Matrix3<f64>;
pub type Rotation = rotmath::Rotation3<f64>;
pub type Quat = rotmath::Quaternion<f64>;
pub type Skeleton = kinematics::Skeleton<f64>;
pub type Motion = motion::MotionSequence<f64>;

pub type Vec3f = rotmath::Vector3<f32>;
pub type Mat3f = rotmath::Matrix3<f32>;
pub type Rotationf = rotmath::Rotation3<f32>;
pub type Quatf = rotmath::Quaternion<f32>;
pub type Skeletonf = kinematics::Skeleton<f32>;
pub type Motionf = motion::MotionSequence<f32>;
