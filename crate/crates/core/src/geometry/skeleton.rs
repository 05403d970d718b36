use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The shipped 21-joint body skeleton (SMPL body joints 1-21, re-rooted at
/// `spine1` so that every joint hangs off a single root).
pub const BODY21_JSON: &str = include_str!("../../assets/body21.json");

/// On-disk skeleton definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonFile {
    pub name: String,
    /// Canonical part order. Optional; defaults to order of first appearance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parts: Option<Vec<String>>,
    pub joints: Vec<JointDef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDef {
    pub name: String,
    /// Index of the parent joint, `-1` for a root.
    pub parent: i64,
    /// Bone offset from the parent, in meters, in the parent's frame.
    pub offset: [f64; 3],
    pub part: String,
}

/// A validated joint hierarchy with a part assignment per joint.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    name: String,
    joint_names: Vec<String>,
    parent_index: Vec<Option<usize>>,
    bone_offset: Vec<[f64; 3]>,
    part_names: Vec<String>,
    part_of_joint: Vec<usize>,
}

impl Skeleton {
    pub fn body21() -> Self {
        Self::from_json(BODY21_JSON).expect("shipped skeleton is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SkeletonFile = serde_json::from_str(text)?;
        Self::from_file(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_file(file: SkeletonFile) -> Result<Self> {
        if file.joints.is_empty() {
            return Err(Error::InvalidSkeleton("no joints".into()));
        }
        let mut part_names = file.parts.clone().unwrap_or_default();
        let declared = file.parts.is_some();
        let mut parent_index = Vec::with_capacity(file.joints.len());
        let mut part_of_joint = Vec::with_capacity(file.joints.len());
        for (i, j) in file.joints.iter().enumerate() {
            if file.joints[..i].iter().any(|o| o.name == j.name) {
                return Err(Error::InvalidSkeleton(format!("duplicate joint `{}`", j.name)));
            }
            let parent = match j.parent {
                -1 => None,
                p if p >= 0 && (p as usize) < i => Some(p as usize),
                p => {
                    return Err(Error::InvalidSkeleton(format!(
                        "joint `{}` has parent {p}; parents must precede children",
                        j.name
                    )))
                }
            };
            if j.offset.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidSkeleton(format!("non-finite offset on `{}`", j.name)));
            }
            let part = match part_names.iter().position(|p| *p == j.part) {
                Some(k) => k,
                None if !declared => {
                    part_names.push(j.part.clone());
                    part_names.len() - 1
                }
                None => {
                    return Err(Error::InvalidSkeleton(format!(
                        "joint `{}` names undeclared part `{}`",
                        j.name, j.part
                    )))
                }
            };
            parent_index.push(parent);
            part_of_joint.push(part);
        }
        for (k, p) in part_names.iter().enumerate() {
            if !part_of_joint.contains(&k) {
                return Err(Error::InvalidSkeleton(format!("part `{p}` owns no joints")));
            }
        }
        Ok(Self {
            name: file.name,
            joint_names: file.joints.iter().map(|j| j.name.clone()).collect(),
            parent_index,
            bone_offset: file.joints.iter().map(|j| j.offset).collect(),
            part_names,
            part_of_joint,
        })
    }

    pub fn to_file(&self) -> SkeletonFile {
        SkeletonFile {
            name: self.name.clone(),
            parts: Some(self.part_names.clone()),
            joints: (0..self.joint_count())
                .map(|i| JointDef {
                    name: self.joint_names[i].clone(),
                    parent: self.parent_index[i].map_or(-1, |p| p as i64),
                    offset: self.bone_offset[i],
                    part: self.part_names[self.part_of_joint[i]].clone(),
                })
                .collect(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn joint_count(&self) -> usize {
        self.joint_names.len()
    }

    pub fn joint_names(&self) -> &[String] {
        &self.joint_names
    }

    pub fn parent(&self, joint: usize) -> Option<usize> {
        self.parent_index[joint]
    }

    pub fn bone_offset(&self, joint: usize) -> [f64; 3] {
        self.bone_offset[joint]
    }

    pub fn part_names(&self) -> &[String] {
        &self.part_names
    }

    pub fn part_of_joint(&self, joint: usize) -> usize {
        self.part_of_joint[joint]
    }

    /// Joint indices owned by a part, in skeleton order.
    pub fn joints_of_part(&self, part: usize) -> Vec<usize> {
        (0..self.joint_count())
            .filter(|&j| self.part_of_joint[j] == part)
            .collect()
    }

    pub fn part_index(&self, name: &str) -> Option<usize> {
        self.part_names.iter().position(|p| p == name)
    }

    /// Number of parent-child bones.
    pub fn bone_count(&self) -> usize {
        self.parent_index.iter().filter(|p| p.is_some()).count()
    }
}
