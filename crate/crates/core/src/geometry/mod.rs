//! Quaternion algebra, the canonical body skeleton, forward kinematics and
//! the mean per-joint angle error (MPJAE) used by every evaluation.

mod pose;
mod quaternion;
mod skeleton;

pub use pose::{forward_kinematics, joint_space_interpolate, mpjae_deg, Pose};
pub use quaternion::{geodesic_angle_deg, UnitQuaternion};
pub use skeleton::{JointDef, Skeleton, SkeletonFile, BODY21_JSON};
