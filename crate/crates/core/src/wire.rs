//! JSON forms of poses and latent codes shared by the CLI and the service.
//!
//! Pose: `{"skeleton": "body21", "joints": [[w, x, y, z], ...]}`.
//!
//! Latent code: `{"fingerprint": "<16 hex digits>", "parts": {"Head": [...], ...}, "global": [...]}`
//! with parts in layout order.

use crate::geometry::{Pose, Skeleton, UnitQuaternion};
use crate::model::{LatentCode, PartLayout};
use crate::{Error, Result};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseJson {
    pub skeleton: String,
    pub joints: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatentJson {
    pub fingerprint: String,
    pub parts: IndexMap<String, Vec<usize>>,
    #[serde(default)]
    pub global: Vec<usize>,
}

impl PoseJson {
    pub fn from_pose(pose: &Pose) -> Self {
        Self {
            skeleton: pose.skeleton_id.clone(),
            joints: pose.joints.iter().map(|q| q.to_array()).collect(),
        }
    }

    /// Strict conversion: every joint must already be a unit, sign-canonical
    /// quaternion (unit norm within 1e-6).
    pub fn into_pose(self, skeleton: &Skeleton) -> Result<Pose> {
        let mut joints = Vec::with_capacity(self.joints.len());
        for (j, v) in self.joints.iter().enumerate() {
            let n2: f64 = v.iter().map(|c| c * c).sum();
            if !n2.is_finite() || (n2.sqrt() - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidPose(format!("joint {j} violates unit norm")));
            }
            let q = UnitQuaternion::canonicalize(*v)?;
            if q.to_array() != *v {
                return Err(Error::InvalidPose(format!("joint {j} violates sign canonicality")));
            }
            joints.push(q);
        }
        let pose = Pose::new(self.skeleton, joints);
        pose.validate(skeleton)?;
        Ok(pose)
    }

    /// Lenient conversion for hand-written inputs: each joint is normalized
    /// and sign-canonicalized first.
    pub fn into_pose_canonicalized(self, skeleton: &Skeleton) -> Result<Pose> {
        let joints = self
            .joints
            .iter()
            .map(|q| UnitQuaternion::canonicalize(*q))
            .collect::<Result<Vec<_>>>()?;
        let pose = Pose::new(self.skeleton, joints);
        pose.validate(skeleton)?;
        Ok(pose)
    }
}

impl LatentJson {
    pub fn from_code(code: &LatentCode, layout: &PartLayout) -> Self {
        Self {
            fingerprint: format!("{:016x}", code.fingerprint),
            parts: layout
                .parts
                .iter()
                .zip(&code.parts)
                .map(|(p, idx)| (p.name.clone(), idx.clone()))
                .collect(),
            global: code.global.clone(),
        }
    }

    pub fn into_code(self, layout: &PartLayout) -> Result<LatentCode> {
        let fingerprint = u64::from_str_radix(&self.fingerprint, 16)
            .map_err(|_| Error::Format(format!("fingerprint `{}` is not a hex u64", self.fingerprint)))?;
        let mut parts = self.parts;
        let mut groups = Vec::with_capacity(layout.parts.len());
        for p in &layout.parts {
            let idx = parts.shift_remove(&p.name).ok_or_else(|| {
                Error::ShapeMismatch(format!("latent code has no group for part `{}`", p.name))
            })?;
            groups.push(idx);
        }
        if let Some((name, _)) = parts.into_iter().next() {
            return Err(Error::UnknownPart {
                name,
                valid: layout.part_names(),
            });
        }
        let code = LatentCode {
            fingerprint,
            parts: groups,
            global: self.global,
        };
        code.check_shape(layout)?;
        Ok(code)
    }
}

/// Compact pose JSON; the exact bytes emitted by both the CLI and the service.
pub fn pose_to_string(pose: &Pose) -> String {
    serde_json::to_string(&PoseJson::from_pose(pose)).expect("pose serializes")
}

pub fn latent_to_string(code: &LatentCode, layout: &PartLayout) -> String {
    serde_json::to_string(&LatentJson::from_code(code, layout)).expect("latent serializes")
}

pub fn parse_pose(text: &str, skeleton: &Skeleton) -> Result<Pose> {
    let p: PoseJson = serde_json::from_str(text).map_err(|e| Error::Format(format!("pose JSON: {e}")))?;
    p.into_pose(skeleton)
}

pub fn parse_latent(text: &str, layout: &PartLayout) -> Result<LatentCode> {
    let l: LatentJson = serde_json::from_str(text).map_err(|e| Error::Format(format!("latent JSON: {e}")))?;
    l.into_code(layout)
}
