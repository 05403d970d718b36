use serde::{Deserialize, Serialize};

use super::{geodesic_angle_deg, Skeleton, UnitQuaternion};
use crate::{Error, Result};

/// One canonical unit quaternion per skeleton joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub skeleton_id: String,
    pub joints: Vec<UnitQuaternion>,
}

impl Pose {
    pub fn new(skeleton_id: impl Into<String>, joints: Vec<UnitQuaternion>) -> Self {
        Self {
            skeleton_id: skeleton_id.into(),
            joints,
        }
    }

    pub fn rest(skeleton: &Skeleton) -> Self {
        Self::new(skeleton.name(), vec![UnitQuaternion::IDENTITY; skeleton.joint_count()])
    }

    /// Build from raw 4-vectors, canonicalizing each.
    pub fn from_raw(skeleton_id: impl Into<String>, raw: &[[f64; 4]]) -> Result<Self> {
        let joints = raw
            .iter()
            .map(|v| UnitQuaternion::canonicalize(*v))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(skeleton_id, joints))
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    /// Row-major `(w, x, y, z)` per joint.
    pub fn flatten_into(&self, out: &mut [f64]) {
        for (chunk, q) in out.chunks_exact_mut(4).zip(&self.joints) {
            chunk.copy_from_slice(&q.to_array());
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = vec![0.0; 4 * self.len()];
        self.flatten_into(&mut out);
        out
    }

    /// Check every pose invariant against a skeleton.
    pub fn validate(&self, skeleton: &Skeleton) -> Result<()> {
        if self.skeleton_id != skeleton.name() {
            return Err(Error::SkeletonMismatch {
                expected: skeleton.name().into(),
                actual: self.skeleton_id.clone(),
            });
        }
        if self.joints.len() != skeleton.joint_count() {
            return Err(Error::InvalidPose(format!(
                "joint count {} != skeleton joint count {}",
                self.joints.len(),
                skeleton.joint_count()
            )));
        }
        for (j, q) in self.joints.iter().enumerate() {
            let v = q.to_array();
            let n2: f64 = v.iter().map(|c| c * c).sum();
            if !n2.is_finite() || (n2.sqrt() - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidPose(format!("joint {j} violates unit norm")));
            }
            if UnitQuaternion::canonicalize(v)?.to_array() != v {
                return Err(Error::InvalidPose(format!("joint {j} violates sign canonicality")));
            }
        }
        Ok(())
    }
}

fn check_same_skeleton(a: &Pose, b: &Pose) -> Result<()> {
    if a.skeleton_id != b.skeleton_id || a.len() != b.len() {
        return Err(Error::SkeletonMismatch {
            expected: format!("{} ({} joints)", a.skeleton_id, a.len()),
            actual: format!("{} ({} joints)", b.skeleton_id, b.len()),
        });
    }
    Ok(())
}

/// Mean per-joint geodesic angle in degrees.
pub fn mpjae_deg(a: &Pose, b: &Pose) -> Result<f64> {
    check_same_skeleton(a, b)?;
    if a.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = a
        .joints
        .iter()
        .zip(&b.joints)
        .map(|(qa, qb)| geodesic_angle_deg(qa, qb))
        .sum();
    Ok(sum / a.len() as f64)
}

/// World position of every joint. Roots sit at their own offset from the
/// origin; a child is its parent's position plus the parent's world rotation
/// applied to the child's bone offset.
pub fn forward_kinematics(pose: &Pose, skeleton: &Skeleton) -> Result<Vec<[f64; 3]>> {
    if pose.len() != skeleton.joint_count() {
        return Err(Error::SkeletonMismatch {
            expected: format!("{} ({} joints)", skeleton.name(), skeleton.joint_count()),
            actual: format!("{} ({} joints)", pose.skeleton_id, pose.len()),
        });
    }
    let n = skeleton.joint_count();
    let mut world_rot = Vec::with_capacity(n);
    let mut pos = Vec::with_capacity(n);
    for j in 0..n {
        let offset = skeleton.bone_offset(j);
        let (p, r) = match skeleton.parent(j) {
            None => (offset, pose.joints[j]),
            Some(parent) => {
                let pr: &UnitQuaternion = &world_rot[parent];
                let d = pr.rotate(offset);
                let pp: [f64; 3] = pos[parent];
                (
                    [pp[0] + d[0], pp[1] + d[1], pp[2] + d[2]],
                    pr.compose(&pose.joints[j]),
                )
            }
        };
        pos.push(p);
        world_rot.push(r);
    }
    Ok(pos)
}

/// Component-wise linear blend of joint quaternions followed by
/// canonicalization. This is the naive joint-space baseline.
pub fn joint_space_interpolate(a: &Pose, b: &Pose, t: f64) -> Result<Pose> {
    check_same_skeleton(a, b)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidConfig(format!("interpolation parameter {t} outside [0, 1]")));
    }
    let joints = a
        .joints
        .iter()
        .zip(&b.joints)
        .enumerate()
        .map(|(j, (qa, qb))| {
            if qa == qb {
                return Ok(*qa);
            }
            let (va, vb) = (qa.to_array(), qb.to_array());
            let mut v = [0.0; 4];
            for k in 0..4 {
                v[k] = (1.0 - t) * va[k] + t * vb[k];
            }
            if v.iter().all(|c| *c == 0.0) {
                return Err(Error::DegenerateInterpolation { joint: j });
            }
            UnitQuaternion::canonicalize(v)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Pose::new(a.skeleton_id.clone(), joints))
}
