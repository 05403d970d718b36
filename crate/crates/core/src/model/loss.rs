//! Training objective and its exact gradient.
//!
//! `L = recon + lambda * commit`, where `recon` is the mean squared error
//! over all `4N` raw decoder output components against the canonical target
//! quaternions, and `commit` is the mean over (sample, slot) pairs of
//! `|z - q|^2`. The decoders see the quantized vectors; their input gradient
//! is passed straight through to the encoder outputs.

use super::net::EncodedBatch;
use super::QPoserModel;
use crate::geometry::Pose;
use crate::numerics::{relative_error, GradCheckReport, MlpCache, MlpGrads, Tensor, FD_STEP, KINK_MARGIN};
use crate::{Error, Result};

/// Gradients for every network in the model, in parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub encoders: Vec<MlpGrads>,
    pub decoders: Vec<MlpGrads>,
}

impl ModelGrads {
    pub fn slices(&self) -> Vec<&[f64]> {
        self.encoders.iter().chain(&self.decoders).flat_map(|g| g.slices()).collect()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.slices().concat()
    }
}

#[derive(Debug, Clone)]
pub struct LossOutput {
    pub total: f64,
    pub recon: f64,
    pub commit: f64,
    pub grads: ModelGrads,
    pub(crate) encoded: EncodedBatch,
}

impl LossOutput {
    /// Code index chosen for every slot, `[slot][sample]`.
    pub fn assignments(&self) -> &[Vec<usize>] {
        &self.encoded.index
    }

    /// Encoder output of slot `s` for sample `b`.
    pub fn encoder_output(&self, s: usize, b: usize) -> &[f64] {
        self.encoded.z[s].row(b)
    }
}

/// Quantization decisions frozen at one parameter point.
///
/// Around that point the surrogate loss feeds `z + (q0 - z0)` to the decoders
/// and commits `z` towards `q0`; its value equals the true loss at the frozen
/// point and its exact derivative equals the straight-through gradient, so it
/// can be checked by finite differences.
#[derive(Debug, Clone)]
pub struct FrozenQuantization {
    z0: Vec<Tensor>,
    q0: Vec<Tensor>,
}

struct Pass {
    recon: f64,
    commit: f64,
    enc_caches: Vec<MlpCache>,
    dec_caches: Vec<MlpCache>,
    z: Vec<Tensor>,
    index: Vec<Vec<usize>>,
    /// Per slot, the quantized vector used as commitment target.
    target_q: Vec<Tensor>,
    dec_out: Vec<Tensor>,
    dec_target: Vec<Tensor>,
}

impl QPoserModel {
    /// Loss and exact straight-through gradients for one batch.
    pub fn loss_and_grads(&self, poses: &[Pose], commit_weight: f64) -> Result<LossOutput> {
        let pass = self.pass(poses, None)?;
        self.finish(pass, commit_weight)
    }

    /// Loss value only.
    pub fn loss(&self, poses: &[Pose], commit_weight: f64) -> Result<f64> {
        let pass = self.pass(poses, None)?;
        Ok(pass.recon + commit_weight * pass.commit)
    }

    pub fn freeze_quantization(&self, poses: &[Pose]) -> Result<FrozenQuantization> {
        let pass = self.pass(poses, None)?;
        Ok(FrozenQuantization {
            z0: pass.z,
            q0: pass.target_q,
        })
    }

    pub fn surrogate_loss(&self, poses: &[Pose], frozen: &FrozenQuantization, commit_weight: f64) -> Result<f64> {
        let pass = self.pass(poses, Some(frozen))?;
        Ok(pass.recon + commit_weight * pass.commit)
    }

    /// Side of the activation kink for every hidden pre-activation of every
    /// network under the surrogate; `0` marks values within the kink margin.
    pub fn activation_pattern(&self, poses: &[Pose], frozen: &FrozenQuantization) -> Result<Vec<i8>> {
        let pass = self.pass(poses, Some(frozen))?;
        let mut out = Vec::new();
        let nets = self.encoders().iter().chain(self.decoders());
        for (net, cache) in nets.zip(pass.enc_caches.iter().chain(&pass.dec_caches)) {
            let hidden = net.spec().layer_widths.len() - 2;
            for t in &cache.pre_activations()[..hidden] {
                out.extend(t.data().iter().map(|&v| {
                    if v.abs() < KINK_MARGIN {
                        0
                    } else if v > 0.0 {
                        1
                    } else {
                        -1
                    }
                }));
            }
        }
        Ok(out)
    }

    fn pass(&self, poses: &[Pose], frozen: Option<&FrozenQuantization>) -> Result<Pass> {
        let x = self.pose_tensor(poses)?;
        let batch = x.rows();
        let d = self.layout().d_code;
        let slots = self.layout().slot_count();

        let mut z = Vec::with_capacity(slots);
        let mut enc_caches = Vec::with_capacity(slots);
        for (s, enc) in self.encoders().iter().enumerate() {
            let (out, cache) = enc.forward(&x)?;
            if out.data().iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("encoder output, slot {s}")));
            }
            z.push(out);
            enc_caches.push(cache);
        }

        let (index, target_q, dec_in_slots) = match frozen {
            None => {
                let mut index = Vec::with_capacity(slots);
                for (s, zs) in z.iter().enumerate() {
                    let cb = &self.codebooks()[self.slot_codebook()[s]];
                    index.push((0..batch).map(|b| cb.nearest(zs.row(b)).index).collect::<Vec<_>>());
                }
                let q = self.gather_codes(&index)?;
                (index, q.clone(), q)
            }
            Some(f) => {
                if f.z0.len() != slots || f.z0.iter().any(|t| t.rows() != batch || t.cols() != d) {
                    return Err(Error::ShapeMismatch("frozen quantization does not match the batch".into()));
                }
                let shifted = z
                    .iter()
                    .zip(f.z0.iter().zip(&f.q0))
                    .map(|(zs, (z0, q0))| {
                        let data = zs
                            .data()
                            .iter()
                            .zip(z0.data().iter().zip(q0.data()))
                            .map(|(a, (b, c))| a + (c - b))
                            .collect();
                        Tensor::new(zs.shape().to_vec(), data)
                    })
                    .collect::<Result<Vec<_>>>()?;
                (vec![Vec::new(); slots], f.q0.clone(), shifted)
            }
        };

        let mut commit = 0.0;
        for (zs, qs) in z.iter().zip(&target_q) {
            commit += zs.data().iter().zip(qs.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        commit /= (batch * slots) as f64;

        let n = self.skeleton().joint_count();
        let mut recon = 0.0;
        let mut dec_out = Vec::with_capacity(self.layout().parts.len());
        let mut dec_caches = Vec::with_capacity(self.layout().parts.len());
        let mut dec_target = Vec::with_capacity(self.layout().parts.len());
        for (p, dec) in self.decoders().iter().enumerate() {
            let input = self.decoder_input(p, &dec_in_slots)?;
            let (out, cache) = dec.forward(&input)?;
            let joints = &self.layout().parts[p].joint_indices;
            let mut target = Tensor::zeros(vec![batch, 4 * joints.len()]);
            for (b, pose) in poses.iter().enumerate() {
                let row = target.row_mut(b);
                for (k, &j) in joints.iter().enumerate() {
                    row[4 * k..4 * k + 4].copy_from_slice(&pose.joints[j].to_array());
                }
            }
            recon += out.data().iter().zip(target.data()).map(|(o, t)| (o - t) * (o - t)).sum::<f64>();
            dec_out.push(out);
            dec_caches.push(cache);
            dec_target.push(target);
        }
        recon /= (batch * 4 * n) as f64;
        if !recon.is_finite() {
            return Err(Error::NonFinite("loss_recon".into()));
        }
        if !commit.is_finite() {
            return Err(Error::NonFinite("loss_commit".into()));
        }
        Ok(Pass {
            recon,
            commit,
            enc_caches,
            dec_caches,
            z,
            index,
            target_q,
            dec_out,
            dec_target,
        })
    }

    fn finish(&self, pass: Pass, commit_weight: f64) -> Result<LossOutput> {
        let batch = pass.z[0].rows();
        let d = self.layout().d_code;
        let slots = self.layout().slot_count();
        let n = self.skeleton().joint_count();
        let recon_scale = 2.0 / (batch * 4 * n) as f64;
        let commit_scale = commit_weight * 2.0 / (batch * slots) as f64;

        // Gradient on every slot's encoder output: commitment term plus the
        // straight-through decoder input gradient.
        let mut gz: Vec<Tensor> = pass
            .z
            .iter()
            .zip(&pass.target_q)
            .map(|(zs, qs)| {
                let data = zs.data().iter().zip(qs.data()).map(|(a, b)| commit_scale * (a - b)).collect();
                Tensor::new(zs.shape().to_vec(), data)
            })
            .collect::<Result<Vec<_>>>()?;

        let mut dec_grads = Vec::with_capacity(self.decoders().len());
        for (p, dec) in self.decoders().iter().enumerate() {
            let out = &pass.dec_out[p];
            let data = out
                .data()
                .iter()
                .zip(pass.dec_target[p].data())
                .map(|(o, t)| recon_scale * (o - t))
                .collect();
            let upstream = Tensor::new(out.shape().to_vec(), data)?;
            let (gin, grads) = dec.backward(&pass.dec_caches[p], &upstream)?;
            dec_grads.push(grads);
            let members: Vec<usize> = self.layout().part_slots(p).chain(self.layout().global_slots()).collect();
            for b in 0..batch {
                let row = gin.row(b);
                for (k, &s) in members.iter().enumerate() {
                    for (g, v) in gz[s].row_mut(b).iter_mut().zip(&row[k * d..(k + 1) * d]) {
                        *g += v;
                    }
                }
            }
        }

        let enc_grads = self
            .encoders()
            .iter()
            .zip(&pass.enc_caches)
            .zip(&gz)
            .map(|((enc, cache), g)| enc.backward_params(cache, g))
            .collect::<Result<Vec<_>>>()?;

        Ok(LossOutput {
            total: pass.recon + commit_weight * pass.commit,
            recon: pass.recon,
            commit: pass.commit,
            grads: ModelGrads {
                encoders: enc_grads,
                decoders: dec_grads,
            },
            encoded: EncodedBatch {
                z: pass.z,
                index: pass.index,
            },
        })
    }
}

/// Central-difference check of [`QPoserModel::loss_and_grads`] over every
/// network parameter, holding quantization decisions fixed at the current
/// point. Components whose hidden activation pattern changes within the
/// step are skipped.
pub fn model_gradient_check(
    model: &QPoserModel,
    poses: &[Pose],
    commit_weight: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let analytic = model.loss_and_grads(poses, commit_weight)?.grads.flat();
    let frozen = model.freeze_quantization(poses)?;
    let base_pattern = model.activation_pattern(poses, &frozen)?;
    let mut probe = model.clone();
    let sizes = model.param_sizes();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: None,
        checked: 0,
        skipped: 0,
        tolerance,
        passed: false,
    };
    let mut flat = 0;
    for (t, &len) in sizes.iter().enumerate() {
        for k in 0..len {
            let orig = probe.params()[t][k];
            let mut eval_at = |value: f64| -> Result<(f64, bool)> {
                probe.params_mut()[t][k] = value;
                let loss = probe.surrogate_loss(poses, &frozen, commit_weight)?;
                let same = probe.activation_pattern(poses, &frozen)? == base_pattern;
                Ok((loss, same))
            };
            let (plus, same_plus) = eval_at(orig + FD_STEP)?;
            let (minus, same_minus) = eval_at(orig - FD_STEP)?;
            probe.params_mut()[t][k] = orig;
            if same_plus && same_minus && !base_pattern.contains(&0) {
                let numeric = (plus - minus) / (2.0 * FD_STEP);
                let rel = relative_error(analytic[flat], numeric);
                if report.worst_index.is_none() || rel > report.max_rel_error {
                    report.max_rel_error = rel;
                    report.worst_index = Some(flat);
                }
                report.checked += 1;
            } else {
                report.skipped += 1;
            }
            flat += 1;
        }
    }
    report.passed = report.checked > 0 && report.max_rel_error <= tolerance;
    Ok(report)
}
