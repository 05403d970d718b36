use super::PoseDataset;
use crate::geometry::{geodesic_angle_deg, mpjae_deg, Pose, Skeleton, UnitQuaternion};
use crate::hash::Fnv1a64;
use crate::rng::SplitMix64;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Deterministic smooth `m`-dimensional surface in joint space.
///
/// For latent `u` uniform in `[-1, 1]^m`, joint `j` rotates about a fixed
/// seeded axis `a_j` by
/// `theta_j(u) = limit_j * tanh(sum_k W_jk * sin(omega_jk * u_k + phi_jk))`.
/// `W`, `omega`, `phi` and the axes are drawn once from the seed; `u` comes
/// from an independent substream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSpec {
    pub seed: u64,
    pub intrinsic_dim: usize,
    /// Per joint, in degrees.
    pub joint_limit_deg: Vec<f64>,
    /// Standard deviation of the mixing weights `W`.
    pub weight_scale: f64,
    /// `omega` is drawn uniformly from `[0.5, 1.5] * frequency_scale`.
    pub frequency_scale: f64,
    /// `phi` is drawn uniformly from `[-phase_scale, phase_scale]`; 0 gives zero phases.
    pub phase_scale: f64,
}

const TAG_STRUCTURE: u64 = 0x6d66_6c64;
const TAG_SAMPLES: u64 = 0x7361_6d70;

impl ManifoldSpec {
    /// Default limits: 45 degrees for spine, neck and head joints, 90 degrees elsewhere.
    pub fn default_for(skeleton: &Skeleton, seed: u64, intrinsic_dim: usize) -> Self {
        let joint_limit_deg = skeleton
            .joint_names()
            .iter()
            .map(|n| if n.starts_with("spine") || n == "neck" || n == "head" { 45.0 } else { 90.0 })
            .collect();
        Self {
            seed,
            intrinsic_dim,
            joint_limit_deg,
            weight_scale: 0.4,
            frequency_scale: 1.0,
            phase_scale: std::f64::consts::PI,
        }
    }

    pub fn validate(&self, skeleton: &Skeleton) -> Result<()> {
        if !(1..=16).contains(&self.intrinsic_dim) {
            return Err(Error::InvalidConfig(format!(
                "intrinsic dimension must be in 1..=16, got {}",
                self.intrinsic_dim
            )));
        }
        if self.joint_limit_deg.len() != skeleton.joint_count() {
            return Err(Error::InvalidConfig(format!(
                "{} joint limits for {} joints",
                self.joint_limit_deg.len(),
                skeleton.joint_count()
            )));
        }
        if self.joint_limit_deg.iter().any(|l| !(*l > 0.0 && *l <= 180.0)) {
            return Err(Error::InvalidConfig("joint limits must lie in (0, 180] degrees".into()));
        }
        for (name, v) in [
            ("weight scale", self.weight_scale),
            ("frequency scale", self.frequency_scale),
            ("phase scale", self.phase_scale),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    pub fn hash(&self) -> u64 {
        let mut h = Fnv1a64::new();
        h.write(serde_json::to_string(self).expect("spec serializes").as_bytes());
        h.finish()
    }
}

/// The fixed per-joint structure drawn from the seed.
#[derive(Debug, Clone)]
pub(crate) struct Manifold {
    axes: Vec<[f64; 3]>,
    limits_rad: Vec<f64>,
    weight: Vec<Vec<f64>>,
    omega: Vec<Vec<f64>>,
    phi: Vec<Vec<f64>>,
}

impl Manifold {
    pub(crate) fn new(spec: &ManifoldSpec, skeleton: &Skeleton) -> Result<Self> {
        spec.validate(skeleton)?;
        let m = spec.intrinsic_dim;
        let mut rng = SplitMix64::substream(spec.seed, TAG_STRUCTURE);
        let mut axes = Vec::with_capacity(skeleton.joint_count());
        let mut weight = Vec::new();
        let mut omega = Vec::new();
        let mut phi = Vec::new();
        for _ in 0..skeleton.joint_count() {
            let axis = loop {
                let v = [rng.normal(), rng.normal(), rng.normal()];
                let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                if n > 1e-6 {
                    break [v[0] / n, v[1] / n, v[2] / n];
                }
            };
            axes.push(axis);
            weight.push((0..m).map(|_| spec.weight_scale * rng.normal()).collect());
            omega.push((0..m).map(|_| spec.frequency_scale * rng.uniform(0.5, 1.5)).collect());
            phi.push((0..m).map(|_| spec.phase_scale * rng.uniform(-1.0, 1.0)).collect());
        }
        Ok(Self {
            axes,
            limits_rad: spec.joint_limit_deg.iter().map(|d| d.to_radians()).collect(),
            weight,
            omega,
            phi,
        })
    }

    pub(crate) fn angles(&self, u: &[f64]) -> Vec<f64> {
        (0..self.axes.len())
            .map(|j| {
                let s: f64 = (0..u.len())
                    .map(|k| self.weight[j][k] * (self.omega[j][k] * u[k] + self.phi[j][k]).sin())
                    .sum();
                self.limits_rad[j] * s.tanh()
            })
            .collect()
    }

    pub(crate) fn pose(&self, skeleton: &Skeleton, u: &[f64]) -> Pose {
        let joints = self
            .angles(u)
            .into_iter()
            .zip(&self.axes)
            .map(|(theta, axis)| UnitQuaternion::from_axis_angle(*axis, theta).expect("unit axis"))
            .collect();
        Pose::new(skeleton.name(), joints)
    }
}

pub fn generate_manifold(spec: &ManifoldSpec, n: usize, skeleton: &Skeleton) -> Result<PoseDataset> {
    if n == 0 {
        return Err(Error::InvalidConfig("pose count must be >= 1".into()));
    }
    let manifold = Manifold::new(spec, skeleton)?;
    let mut rng = SplitMix64::substream(spec.seed, TAG_SAMPLES);
    let mut u = vec![0.0; spec.intrinsic_dim];
    let poses = (0..n)
        .map(|_| {
            for v in u.iter_mut() {
                *v = rng.uniform(-1.0, 1.0);
            }
            manifold.pose(skeleton, &u)
        })
        .collect();
    PoseDataset::new(skeleton.name(), poses, format!("manifold:{:016x}", spec.hash()))
}

/// Minimum MPJAE in degrees between `p` and any reference pose.
///
/// Exhaustive scan. A candidate's per-joint sum is abandoned once it
/// exceeds the best complete sum; completed sums are accumulated in joint
/// order exactly as [`mpjae_deg`] does, so the result is identical to the
/// plain minimum.
pub fn manifold_distance(p: &Pose, reference: &PoseDataset) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::InvalidPose("empty reference set".into()));
    }
    mpjae_deg(p, &reference.poses[0])?;
    let n = p.len() as f64;
    let mut best_total = f64::INFINITY;
    'scan: for r in &reference.poses {
        if r.len() != p.len() {
            return Err(Error::SkeletonMismatch {
                expected: format!("{} joints", p.len()),
                actual: format!("{} joints", r.len()),
            });
        }
        let mut total = 0.0;
        for (a, b) in p.joints.iter().zip(&r.joints) {
            total += geodesic_angle_deg(a, b);
            if total > best_total {
                continue 'scan;
            }
        }
        best_total = total;
    }
    Ok(best_total / n)
}
