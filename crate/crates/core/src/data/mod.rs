//! Pose datasets: the synthetic pose manifold, pose files, and splits.

mod io;
mod manifold;

pub use io::{load_poses, save_poses, PoseFormat, QPSE_HEADER_LEN, QPSE_MAGIC, QPSE_VERSION};
pub use manifold::{generate_manifold, manifold_distance, ManifoldSpec};

use crate::geometry::{Pose, Skeleton};
use crate::hash::Fnv1a64;
use crate::rng::SplitMix64;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct PoseDataset {
    pub skeleton_id: String,
    pub poses: Vec<Pose>,
    /// Generator spec hash or source file.
    pub provenance: String,
}

impl PoseDataset {
    pub fn new(skeleton_id: impl Into<String>, poses: Vec<Pose>, provenance: impl Into<String>) -> Result<Self> {
        let skeleton_id = skeleton_id.into();
        if poses.is_empty() {
            return Err(Error::InvalidPose("dataset is empty".into()));
        }
        if let Some(p) = poses.iter().find(|p| p.skeleton_id != skeleton_id) {
            return Err(Error::SkeletonMismatch {
                expected: skeleton_id,
                actual: p.skeleton_id.clone(),
            });
        }
        Ok(Self {
            skeleton_id,
            poses,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// FNV-1a over the skeleton id and every quaternion component.
    pub fn content_hash(&self) -> u64 {
        let mut h = Fnv1a64::new();
        h.write(self.skeleton_id.as_bytes());
        h.write_u64(self.poses.len() as u64);
        for p in &self.poses {
            h.write_f64s(&p.flatten());
        }
        h.finish()
    }

    pub fn validate(&self, skeleton: &Skeleton) -> Result<()> {
        self.poses.iter().try_for_each(|p| p.validate(skeleton))
    }

    /// First `n` poses (all when `n >= len`).
    pub fn head(&self, n: usize) -> Self {
        Self {
            skeleton_id: self.skeleton_id.clone(),
            poses: self.poses[..n.min(self.poses.len())].to_vec(),
            provenance: self.provenance.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    /// (train, val, test)
    pub fractions: [f64; 3],
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            fractions: [0.8, 0.1, 0.1],
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.fractions.iter().sum();
        if self.fractions.iter().any(|f| !(f.is_finite() && *f > 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "split fractions must be positive and sum to 1, got {:?}",
                self.fractions
            )));
        }
        Ok(())
    }
}

/// Seeded Fisher-Yates shuffle, then contiguous train/val/test partition.
/// Train and val sizes are rounded; test takes the remainder.
pub fn split(ds: &PoseDataset, spec: &SplitSpec) -> Result<(PoseDataset, PoseDataset, PoseDataset)> {
    spec.validate()?;
    let n = ds.len();
    if n < 10 {
        return Err(Error::InvalidConfig(format!("splitting needs at least 10 poses, got {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = SplitMix64::new(spec.seed);
    for i in (1..n).rev() {
        let j = rng.below(i + 1);
        order.swap(i, j);
    }
    let n_train = (n as f64 * spec.fractions[0]).round() as usize;
    let n_val = (n as f64 * spec.fractions[1]).round() as usize;
    if n_train == 0 || n_val == 0 || n_train + n_val >= n {
        return Err(Error::InvalidConfig(format!("split of {n} poses leaves an empty part")));
    }
    let take = |range: std::ops::Range<usize>, tag: &str| PoseDataset {
        skeleton_id: ds.skeleton_id.clone(),
        poses: order[range].iter().map(|&i| ds.poses[i].clone()).collect(),
        provenance: format!("{} [{tag}]", ds.provenance),
    };
    Ok((
        take(0..n_train, "train"),
        take(n_train..n_train + n_val, "val"),
        take(n_train + n_val..n, "test"),
    ))
}
