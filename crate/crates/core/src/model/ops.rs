//! Latent-space operations on a trained model.

use super::{ContinuousLatent, LatentCode, QPoserModel};
use crate::geometry::{mpjae_deg, Pose};
use crate::rng::SplitMix64;
use crate::{Error, Result};

impl QPoserModel {
    /// Latent interpolation between two poses.
    ///
    /// Both poses are encoded and quantized; frame `k` decodes the linear
    /// blend of the two quantized latents at `t = k / (steps - 1)` directly,
    /// without re-quantizing, so the endpoints are exactly the reconstructions
    /// of `a` and `b` and intermediate frames vary continuously.
    pub fn interpolate(&self, a: &Pose, b: &Pose, steps: usize) -> Result<Vec<Pose>> {
        if steps < 2 {
            return Err(Error::InvalidConfig(format!("interpolation needs >= 2 steps, got {steps}")));
        }
        let codes = self.encode_codes(&[a.clone(), b.clone()])?;
        let za = self.code_vectors(&codes[0])?;
        let zb = self.code_vectors(&codes[1])?;
        let frames: Vec<ContinuousLatent> = (0..steps)
            .map(|k| ContinuousLatent::lerp(&za, &zb, k as f64 / (steps - 1) as f64))
            .collect();
        self.decode_continuous_many(&frames)
    }

    /// Draw every slot uniformly from its codebook (slot order) and decode.
    pub fn sample(&self, rng: &mut SplitMix64) -> Result<(LatentCode, Pose)> {
        let code = self.sample_code(rng);
        let pose = self.decode_quantized(&code)?;
        Ok((code, pose))
    }

    pub fn sample_code(&self, rng: &mut SplitMix64) -> LatentCode {
        let slots: Vec<usize> = self
            .slot_codebook()
            .iter()
            .map(|&cb| self.codebooks()[cb].sample_code(rng))
            .collect();
        LatentCode::from_slots(self.layout(), self.fingerprint(), &slots)
    }

    /// `base` with the named part's code group taken from `source`.
    pub fn modify_part(&self, base: &LatentCode, part: &str, source: &LatentCode) -> Result<LatentCode> {
        self.check_fingerprint(base)?;
        self.check_fingerprint(source)?;
        let p = self.layout().part_index(part)?;
        let mut out = base.clone();
        out.parts[p] = source.parts[p].clone();
        Ok(out)
    }

    /// `base` with its global group taken from `source`.
    pub fn replace_global(&self, base: &LatentCode, source: &LatentCode) -> Result<LatentCode> {
        self.check_fingerprint(base)?;
        self.check_fingerprint(source)?;
        let mut out = base.clone();
        out.global = source.global.clone();
        Ok(out)
    }

    /// Repeated encode/decode round-trips: `p_i = decode(encode(p_{i-1}))`,
    /// returning `mpjae(p, p_i)` for `i = 1..=k`.
    pub fn iterate_roundtrip(&self, pose: &Pose, k: usize) -> Result<Vec<f64>> {
        Ok(self
            .iterate_roundtrip_many(std::slice::from_ref(pose), k)?
            .pop()
            .expect("one pose"))
    }

    /// Batched [`QPoserModel::iterate_roundtrip`]; result is `[pose][iteration]`.
    pub fn iterate_roundtrip_many(&self, poses: &[Pose], k: usize) -> Result<Vec<Vec<f64>>> {
        if k == 0 {
            return Err(Error::InvalidConfig("round-trip count must be >= 1".into()));
        }
        let mut current = poses.to_vec();
        let mut errors = vec![Vec::with_capacity(k); poses.len()];
        for _ in 0..k {
            current = self.reconstruct_many(&current)?;
            for ((e, p), c) in errors.iter_mut().zip(poses).zip(&current) {
                e.push(mpjae_deg(p, c)?);
            }
        }
        Ok(errors)
    }
}

/// `value(k) - value(1)` of a round-trip error series.
pub fn escalated_error(series: &[f64]) -> f64 {
    match (series.first(), series.last()) {
        (Some(first), Some(last)) => last - first,
        _ => 0.0,
    }
}
