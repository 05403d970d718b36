use super::MetricSummary;
use crate::data::{manifold_distance, PoseDataset};
use crate::geometry::{joint_space_interpolate, mpjae_deg, Pose, UnitQuaternion};
use crate::model::QPoserModel;
use crate::rng::SplitMix64;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

const CHUNK: usize = 256;

/// Per-pose `mpjae(p, decode(encode(p)))` and its summary.
pub fn eval_reconstruction(model: &QPoserModel, poses: &[Pose]) -> Result<(MetricSummary, Vec<f64>)> {
    if poses.is_empty() {
        return Err(Error::InvalidConfig("reconstruction needs a nonempty test set".into()));
    }
    let mut errors = Vec::with_capacity(poses.len());
    for chunk in poses.chunks(CHUNK) {
        for (p, r) in chunk.iter().zip(model.reconstruct_many(chunk)?) {
            errors.push(mpjae_deg(p, &r)?);
        }
    }
    Ok((MetricSummary::from_values(&errors)?, errors))
}

/// Per-pose `error(k) - error(1)` of repeated round-trips, and its summary.
pub fn eval_escalated(model: &QPoserModel, poses: &[Pose], k: usize) -> Result<(MetricSummary, Vec<f64>)> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("escalated error needs k >= 2, got {k}")));
    }
    let mut values = Vec::with_capacity(poses.len());
    for chunk in poses.chunks(CHUNK) {
        for series in model.iterate_roundtrip_many(chunk, k)? {
            values.push(crate::model::escalated_error(&series));
        }
    }
    Ok((MetricSummary::from_values(&values)?, values))
}

/// `n` seeded pairs of distinct indices into `len` items.
pub fn sample_pairs(len: usize, n: usize, rng: &mut SplitMix64) -> Result<Vec<(usize, usize)>> {
    if len < 2 {
        return Err(Error::InvalidConfig("pairs need at least two poses".into()));
    }
    Ok((0..n)
        .map(|_| {
            let a = rng.below(len);
            let mut b = rng.below(len - 1);
            if b >= a {
                b += 1;
            }
            (a, b)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationPair {
    /// `mpjae(a, b)`.
    pub endpoint_distance: f64,
    /// `2 * mpjae(a, b) / (steps - 1)`.
    pub step_bound: f64,
    /// Max of the two endpoints' reconstruction errors.
    pub endpoint_recon_error: f64,
    /// `3 * endpoint_recon_error`.
    pub plausibility_bound: f64,
    pub latent_max_step: f64,
    pub latent_max_manifold_distance: f64,
    pub baseline_max_step: f64,
    pub baseline_max_manifold_distance: f64,
}

impl InterpolationPair {
    pub fn latent_smooth(&self) -> bool {
        self.latent_max_step <= self.step_bound
    }

    pub fn latent_plausible(&self) -> bool {
        self.latent_max_manifold_distance <= self.plausibility_bound
    }

    pub fn baseline_plausible(&self) -> bool {
        self.baseline_max_manifold_distance <= self.plausibility_bound
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationReport {
    pub steps: usize,
    pub pairs: Vec<InterpolationPair>,
    pub latent_max_step: MetricSummary,
    pub latent_max_manifold_distance: MetricSummary,
    pub baseline_max_step: MetricSummary,
    pub baseline_max_manifold_distance: MetricSummary,
    pub latent_smooth_rate: f64,
    pub latent_plausible_rate: f64,
    pub baseline_plausible_rate: f64,
}

fn max_consecutive_step(frames: &[Pose]) -> Result<f64> {
    frames
        .windows(2)
        .map(|w| mpjae_deg(&w[0], &w[1]))
        .try_fold(0.0f64, |m, v| Ok(m.max(v?)))
}

/// Max manifold distance over the intermediate frames (endpoints excluded).
/// The pair's own endpoints are added to the reference, since both are
/// known manifold points.
fn max_intermediate_distance(frames: &[Pose], reference: &PoseDataset, a: &Pose, b: &Pose) -> Result<f64> {
    frames[1..frames.len() - 1].iter().try_fold(0.0f64, |m, f| {
        let d = manifold_distance(f, reference)?
            .min(mpjae_deg(f, a)?)
            .min(mpjae_deg(f, b)?);
        Ok(m.max(d))
    })
}

/// Score latent interpolation against joint-space interpolation on each pair.
pub fn eval_interpolation(
    model: &QPoserModel,
    pairs: &[(Pose, Pose)],
    steps: usize,
    reference: &PoseDataset,
) -> Result<InterpolationReport> {
    if steps < 3 {
        return Err(Error::InvalidConfig(format!("interpolation scoring needs steps >= 3, got {steps}")));
    }
    if pairs.is_empty() {
        return Err(Error::InvalidConfig("interpolation scoring needs at least one pair".into()));
    }
    let mut scored = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        let latent = model.interpolate(a, b, steps)?;
        let baseline = (0..steps)
            .map(|k| joint_space_interpolate(a, b, k as f64 / (steps - 1) as f64))
            .collect::<Result<Vec<_>>>()?;
        let d = mpjae_deg(a, b)?;
        let recon = mpjae_deg(a, &latent[0])?.max(mpjae_deg(b, &latent[steps - 1])?);
        scored.push(InterpolationPair {
            endpoint_distance: d,
            step_bound: 2.0 * d / (steps - 1) as f64,
            endpoint_recon_error: recon,
            plausibility_bound: 3.0 * recon,
            latent_max_step: max_consecutive_step(&latent)?,
            latent_max_manifold_distance: max_intermediate_distance(&latent, reference, a, b)?,
            baseline_max_step: max_consecutive_step(&baseline)?,
            baseline_max_manifold_distance: max_intermediate_distance(&baseline, reference, a, b)?,
        });
    }
    let collect = |f: fn(&InterpolationPair) -> f64| -> Result<MetricSummary> {
        MetricSummary::from_values(&scored.iter().map(f).collect::<Vec<_>>())
    };
    let rate = |f: fn(&InterpolationPair) -> bool| scored.iter().filter(|p| f(p)).count() as f64 / scored.len() as f64;
    Ok(InterpolationReport {
        steps,
        latent_max_step: collect(|p| p.latent_max_step)?,
        latent_max_manifold_distance: collect(|p| p.latent_max_manifold_distance)?,
        baseline_max_step: collect(|p| p.baseline_max_step)?,
        baseline_max_manifold_distance: collect(|p| p.baseline_max_manifold_distance)?,
        latent_smooth_rate: rate(InterpolationPair::latent_smooth),
        latent_plausible_rate: rate(InterpolationPair::latent_plausible),
        baseline_plausible_rate: rate(InterpolationPair::baseline_plausible),
        pairs: scored,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingReport {
    pub n: usize,
    pub validity_rate: f64,
    /// Mean pairwise MPJAE over the samples.
    pub diversity: f64,
    /// Per-sample manifold distance.
    pub plausibility: MetricSummary,
    pub baseline_validity_rate: f64,
    pub baseline_diversity: f64,
    pub baseline_plausibility: MetricSummary,
}

/// Independent uniformly random rotation per joint.
pub fn random_joint_space_pose(skeleton_id: &str, joints: usize, rng: &mut SplitMix64) -> Pose {
    let joints = (0..joints)
        .map(|_| loop {
            let v = [rng.normal(), rng.normal(), rng.normal(), rng.normal()];
            if let Ok(q) = UnitQuaternion::canonicalize(v) {
                break q;
            }
        })
        .collect();
    Pose::new(skeleton_id, joints)
}

fn score_set(model: &QPoserModel, poses: &[Pose], reference: &PoseDataset) -> Result<(f64, f64, MetricSummary)> {
    let valid = poses.iter().filter(|p| p.validate(model.skeleton()).is_ok()).count();
    let mut pair_sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..poses.len() {
        for j in i + 1..poses.len() {
            pair_sum += mpjae_deg(&poses[i], &poses[j])?;
            pairs += 1;
        }
    }
    let distances = poses
        .iter()
        .map(|p| manifold_distance(p, reference))
        .collect::<Result<Vec<_>>>()?;
    Ok((
        valid as f64 / poses.len() as f64,
        pair_sum / pairs as f64,
        MetricSummary::from_values(&distances)?,
    ))
}

/// Uniform-code samples versus independent uniform joint rotations.
pub fn eval_sampling(
    model: &QPoserModel,
    n: usize,
    reference: &PoseDataset,
    rng: &mut SplitMix64,
) -> Result<(SamplingReport, Vec<Pose>)> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!("sampling evaluation needs n >= 2, got {n}")));
    }
    let codes: Vec<_> = (0..n).map(|_| model.sample_code(rng)).collect();
    let mut samples = Vec::with_capacity(n);
    for chunk in codes.chunks(CHUNK) {
        samples.extend(model.decode_many(chunk)?);
    }
    let sk = model.skeleton();
    let baseline: Vec<Pose> = (0..n)
        .map(|_| random_joint_space_pose(sk.name(), sk.joint_count(), rng))
        .collect();
    let (validity_rate, diversity, plausibility) = score_set(model, &samples, reference)?;
    let (baseline_validity_rate, baseline_diversity, baseline_plausibility) = score_set(model, &baseline, reference)?;
    Ok((
        SamplingReport {
            n,
            validity_rate,
            diversity,
            plausibility,
            baseline_validity_rate,
            baseline_diversity,
            baseline_plausibility,
        },
        samples,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalModificationReport {
    pub trials: usize,
    /// Fraction of trials where every joint outside the modified part is
    /// bitwise unchanged.
    pub locality_rate: f64,
    /// Mean MPJAE over the modified part's joints between decoding the same
    /// part codes under the base's and the source's global codes.
    pub embodied_shift: f64,
}

/// Random (base, source, part) triples drawn from `poses`.
pub fn eval_local_modification(
    model: &QPoserModel,
    poses: &[Pose],
    trials: usize,
    rng: &mut SplitMix64,
) -> Result<LocalModificationReport> {
    if poses.len() < 2 || trials == 0 {
        return Err(Error::InvalidConfig("local modification needs >= 2 poses and >= 1 trial".into()));
    }
    let codes = {
        let mut c = Vec::with_capacity(poses.len());
        for chunk in poses.chunks(CHUNK) {
            c.extend(model.encode_codes(chunk)?);
        }
        c
    };
    let layout = model.layout();
    let mut local = 0usize;
    let mut shift = 0.0;
    for (bi, si) in sample_pairs(poses.len(), trials, rng)? {
        let p = rng.below(layout.parts.len());
        let part = &layout.parts[p];
        let base = &codes[bi];
        let modified = model.modify_part(base, &part.name, &codes[si])?;
        let decoded = model.decode_many(&[base.clone(), modified.clone()])?;
        let untouched = (0..model.skeleton().joint_count())
            .filter(|j| !part.joint_indices.contains(j))
            .all(|j| decoded[0].joints[j] == decoded[1].joints[j]);
        local += usize::from(untouched);

        let regrounded = model.replace_global(&modified, &codes[si])?;
        let other = model.decode_quantized(&regrounded)?;
        let joints = &part.joint_indices;
        let a = Pose::new(model.skeleton().name(), joints.iter().map(|&j| decoded[1].joints[j]).collect());
        let b = Pose::new(model.skeleton().name(), joints.iter().map(|&j| other.joints[j]).collect());
        shift += mpjae_deg(&a, &b)?;
    }
    Ok(LocalModificationReport {
        trials,
        locality_rate: local as f64 / trials as f64,
        embodied_shift: shift / trials as f64,
    })
}
