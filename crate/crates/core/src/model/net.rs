use super::{ContinuousLatent, HiddenSpec, LatentCode, PartLayout};
use crate::geometry::{Pose, Skeleton, UnitQuaternion};
use crate::hash::Fnv1a64;
use crate::numerics::{Mlp, MlpSpec, Tensor};
use crate::rng::SplitMix64;
use crate::vq::Codebook;
use crate::{Error, Result};

/// Scale of the uniform initial codes, before data-driven seeding.
const INITIAL_CODE_SCALE: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct QPoserModel {
    layout: PartLayout,
    skeleton: Skeleton,
    hidden: HiddenSpec,
    /// One per slot, in slot order.
    encoders: Vec<Mlp>,
    codebooks: Vec<Codebook>,
    /// One per part.
    decoders: Vec<Mlp>,
    slot_codebook: Vec<usize>,
    fingerprint: u64,
}

impl PartialEq for QPoserModel {
    fn eq(&self, other: &Self) -> bool {
        self.layout == other.layout
            && self.skeleton == other.skeleton
            && self.hidden == other.hidden
            && self.encoders == other.encoders
            && self.codebooks == other.codebooks
            && self.decoders == other.decoders
    }
}

/// Canonicalize one raw decoder output. An exactly zero output has no
/// direction and decodes to the identity rotation.
fn decoded_rotation(v: [f64; 4]) -> Result<UnitQuaternion> {
    if v.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("decoder output".into()));
    }
    if v.iter().all(|&c| c == 0.0) {
        return Ok(UnitQuaternion::IDENTITY);
    }
    UnitQuaternion::canonicalize(v)
}

/// Encoder outputs and nearest-code assignments for a batch.
#[derive(Debug, Clone)]
pub(crate) struct EncodedBatch {
    /// Per slot, `batch × d_code`.
    pub z: Vec<Tensor>,
    /// Per slot, per sample.
    pub index: Vec<Vec<usize>>,
}

impl QPoserModel {
    /// Deterministic initialization: encoders in slot order, then codebooks
    /// in layout order, then decoders in part order, all from one stream.
    pub fn build(layout: PartLayout, skeleton: Skeleton, hidden: HiddenSpec, seed: u64) -> Result<Self> {
        layout.validate(&skeleton)?;
        if hidden.width == 0 {
            return Err(Error::InvalidConfig("hidden width must be >= 1".into()));
        }
        let mut rng = SplitMix64::new(seed);
        let input = 4 * skeleton.joint_count();
        let encoders = (0..layout.slot_count())
            .map(|_| Mlp::new(MlpSpec::new(hidden.widths(input, layout.d_code), hidden.activation)?, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let codebooks = layout
            .codebooks
            .iter()
            .map(|c| Codebook::random(c.id.clone(), c.size, layout.d_code, INITIAL_CODE_SCALE, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let decoders = (0..layout.parts.len())
            .map(|p| {
                let out = 4 * layout.parts[p].joint_indices.len();
                Mlp::new(MlpSpec::new(hidden.widths(layout.decoder_input(p), out), hidden.activation)?, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_components(layout, skeleton, hidden, encoders, codebooks, decoders)
    }

    pub(crate) fn from_components(
        layout: PartLayout,
        skeleton: Skeleton,
        hidden: HiddenSpec,
        encoders: Vec<Mlp>,
        codebooks: Vec<Codebook>,
        decoders: Vec<Mlp>,
    ) -> Result<Self> {
        layout.validate(&skeleton)?;
        let input = 4 * skeleton.joint_count();
        if encoders.len() != layout.slot_count()
            || encoders
                .iter()
                .any(|e| e.spec().input_width() != input || e.spec().output_width() != layout.d_code)
        {
            return Err(Error::InvalidLayout("encoder shapes do not match the layout".into()));
        }
        if decoders.len() != layout.parts.len()
            || decoders.iter().enumerate().any(|(p, d)| {
                d.spec().input_width() != layout.decoder_input(p)
                    || d.spec().output_width() != 4 * layout.parts[p].joint_indices.len()
            })
        {
            return Err(Error::InvalidLayout("decoder shapes do not match the layout".into()));
        }
        if codebooks.len() != layout.codebooks.len()
            || codebooks
                .iter()
                .zip(&layout.codebooks)
                .any(|(c, s)| c.id() != s.id || c.size() != s.size || c.dim() != layout.d_code)
        {
            return Err(Error::InvalidLayout("codebooks do not match the layout".into()));
        }
        let slot_codebook = layout.slot_codebooks();
        let mut model = Self {
            layout,
            skeleton,
            hidden,
            encoders,
            codebooks,
            decoders,
            slot_codebook,
            fingerprint: 0,
        };
        model.refresh_fingerprint();
        Ok(model)
    }

    pub fn layout(&self) -> &PartLayout {
        &self.layout
    }

    pub fn skeleton(&self) -> &Skeleton {
        &self.skeleton
    }

    pub fn hidden(&self) -> HiddenSpec {
        self.hidden
    }

    pub fn codebooks(&self) -> &[Codebook] {
        &self.codebooks
    }

    pub fn codebook_by_id(&self, id: &str) -> Option<&Codebook> {
        self.codebooks.iter().find(|c| c.id() == id)
    }

    pub(crate) fn codebooks_mut(&mut self) -> &mut [Codebook] {
        &mut self.codebooks
    }

    pub fn encoders(&self) -> &[Mlp] {
        &self.encoders
    }

    pub fn decoders(&self) -> &[Mlp] {
        &self.decoders
    }

    /// Codebook index of every slot.
    pub fn slot_codebook(&self) -> &[usize] {
        &self.slot_codebook
    }

    /// 64-bit FNV-1a over the layout, skeleton, trunk shape, every network
    /// parameter and every code vector.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub(crate) fn refresh_fingerprint(&mut self) {
        let mut h = Fnv1a64::new();
        h.write(serde_json::to_string(&self.layout).expect("layout serializes").as_bytes());
        h.write(serde_json::to_string(&self.skeleton.to_file()).expect("skeleton serializes").as_bytes());
        h.write(serde_json::to_string(&self.hidden).expect("hidden spec serializes").as_bytes());
        for p in self.params() {
            h.write_f64s(p);
        }
        for cb in &self.codebooks {
            h.write(cb.id().as_bytes());
            h.write_f64s(cb.codes());
        }
        self.fingerprint = h.finish();
    }

    /// Network parameter slices: encoders in slot order, then decoders.
    pub fn params(&self) -> Vec<&[f64]> {
        self.encoders
            .iter()
            .chain(&self.decoders)
            .flat_map(|m| m.params())
            .collect()
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.encoders
            .iter_mut()
            .chain(self.decoders.iter_mut())
            .flat_map(|m| m.params_mut())
            .collect()
    }

    /// Mutate network parameters in place; the fingerprint is recomputed
    /// afterwards.
    pub fn with_params_mut<R>(&mut self, f: impl FnOnce(&mut [&mut [f64]]) -> R) -> R {
        let r = f(&mut self.params_mut());
        self.refresh_fingerprint();
        r
    }

    /// Replace one code vector (resets its EMA state); fingerprint is refreshed.
    pub fn set_code(&mut self, codebook: usize, index: usize, value: &[f64]) -> Result<()> {
        self.codebooks[codebook].set_code(index, value)?;
        self.refresh_fingerprint();
        Ok(())
    }

    pub fn param_sizes(&self) -> Vec<usize> {
        self.params().iter().map(|p| p.len()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.param_sizes().iter().sum()
    }

    pub(crate) fn check_pose(&self, pose: &Pose) -> Result<()> {
        if pose.skeleton_id != self.skeleton.name() || pose.len() != self.skeleton.joint_count() {
            return Err(Error::SkeletonMismatch {
                expected: format!("{} ({} joints)", self.skeleton.name(), self.skeleton.joint_count()),
                actual: format!("{} ({} joints)", pose.skeleton_id, pose.len()),
            });
        }
        Ok(())
    }

    pub(crate) fn check_fingerprint(&self, code: &LatentCode) -> Result<()> {
        if code.fingerprint != self.fingerprint {
            return Err(Error::FingerprintMismatch {
                expected: self.fingerprint,
                actual: code.fingerprint,
            });
        }
        code.check_shape(&self.layout)
    }

    /// Flatten poses into a `batch × 4N` tensor.
    pub(crate) fn pose_tensor(&self, poses: &[Pose]) -> Result<Tensor> {
        if poses.is_empty() {
            return Err(Error::InvalidPose("empty batch".into()));
        }
        let width = 4 * self.skeleton.joint_count();
        let mut data = vec![0.0; poses.len() * width];
        for (row, p) in data.chunks_exact_mut(width).zip(poses) {
            self.check_pose(p)?;
            p.flatten_into(row);
        }
        Tensor::new(vec![poses.len(), width], data)
    }

    pub(crate) fn encode_tensor(&self, x: &Tensor) -> Result<EncodedBatch> {
        let mut z = Vec::with_capacity(self.encoders.len());
        let mut index = Vec::with_capacity(self.encoders.len());
        for (s, enc) in self.encoders.iter().enumerate() {
            let out = enc.infer(x)?;
            let cb = &self.codebooks[self.slot_codebook[s]];
            let mut idx = Vec::with_capacity(out.rows());
            for b in 0..out.rows() {
                let row = out.row(b);
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(format!("encoder output, slot {s}")));
                }
                idx.push(cb.nearest(row).index);
            }
            z.push(out);
            index.push(idx);
        }
        Ok(EncodedBatch { z, index })
    }

    /// Quantized slot tensors for per-slot code indices (`[slot][sample]`).
    pub(crate) fn gather_codes(&self, index: &[Vec<usize>]) -> Result<Vec<Tensor>> {
        let d = self.layout.d_code;
        index
            .iter()
            .enumerate()
            .map(|(s, idx)| {
                let cb = &self.codebooks[self.slot_codebook[s]];
                let mut data = Vec::with_capacity(idx.len() * d);
                for &i in idx {
                    if i >= cb.size() {
                        return Err(Error::CodeOutOfRange {
                            codebook: cb.id().into(),
                            index: i,
                            size: cb.size(),
                        });
                    }
                    data.extend_from_slice(cb.code(i));
                }
                Tensor::new(vec![idx.len(), d], data)
            })
            .collect()
    }

    /// Decoder input of part `p`: its slots, then the global slots.
    pub(crate) fn decoder_input(&self, p: usize, slots: &[Tensor]) -> Result<Tensor> {
        let batch = slots[0].rows();
        let d = self.layout.d_code;
        let members: Vec<usize> = self.layout.part_slots(p).chain(self.layout.global_slots()).collect();
        let width = members.len() * d;
        let mut data = vec![0.0; batch * width];
        for (row, out) in data.chunks_exact_mut(width).enumerate() {
            for (k, &s) in members.iter().enumerate() {
                out[k * d..(k + 1) * d].copy_from_slice(slots[s].row(row));
            }
        }
        Tensor::new(vec![batch, width], data)
    }

    /// Raw decoder outputs per part.
    pub(crate) fn decode_raw(&self, slots: &[Tensor]) -> Result<Vec<Tensor>> {
        (0..self.layout.parts.len())
            .map(|p| self.decoders[p].infer(&self.decoder_input(p, slots)?))
            .collect()
    }

    /// Canonicalize part outputs and scatter them into poses.
    pub(crate) fn assemble(&self, raw: &[Tensor]) -> Result<Vec<Pose>> {
        let batch = raw[0].rows();
        let n = self.skeleton.joint_count();
        let mut poses = vec![vec![UnitQuaternion::IDENTITY; n]; batch];
        for (p, out) in raw.iter().enumerate() {
            let joints = &self.layout.parts[p].joint_indices;
            for (b, pose) in poses.iter_mut().enumerate() {
                let row = out.row(b);
                for (k, &j) in joints.iter().enumerate() {
                    let v = [row[4 * k], row[4 * k + 1], row[4 * k + 2], row[4 * k + 3]];
                    pose[j] = decoded_rotation(v)?;
                }
            }
        }
        Ok(poses
            .into_iter()
            .map(|j| Pose::new(self.skeleton.name(), j))
            .collect())
    }

    fn code_from_batch(&self, enc: &EncodedBatch, b: usize) -> LatentCode {
        let slots: Vec<usize> = enc.index.iter().map(|i| i[b]).collect();
        LatentCode::from_slots(&self.layout, self.fingerprint, &slots)
    }

    fn continuous_from_batch(&self, enc: &EncodedBatch, b: usize) -> ContinuousLatent {
        ContinuousLatent::from_slots(&self.layout, enc.z.iter().map(|t| t.row(b).to_vec()).collect())
    }

    /// Encode one pose: continuous encoder outputs and their nearest codes.
    pub fn encode(&self, pose: &Pose) -> Result<(ContinuousLatent, LatentCode)> {
        let mut v = self.encode_many(std::slice::from_ref(pose))?;
        Ok(v.pop().expect("one pose"))
    }

    pub fn encode_many(&self, poses: &[Pose]) -> Result<Vec<(ContinuousLatent, LatentCode)>> {
        let enc = self.encode_tensor(&self.pose_tensor(poses)?)?;
        Ok((0..poses.len())
            .map(|b| (self.continuous_from_batch(&enc, b), self.code_from_batch(&enc, b)))
            .collect())
    }

    pub fn encode_codes(&self, poses: &[Pose]) -> Result<Vec<LatentCode>> {
        let enc = self.encode_tensor(&self.pose_tensor(poses)?)?;
        Ok((0..poses.len()).map(|b| self.code_from_batch(&enc, b)).collect())
    }

    pub fn decode_quantized(&self, code: &LatentCode) -> Result<Pose> {
        let mut v = self.decode_many(std::slice::from_ref(code))?;
        Ok(v.pop().expect("one code"))
    }

    pub fn decode_many(&self, codes: &[LatentCode]) -> Result<Vec<Pose>> {
        if codes.is_empty() {
            return Ok(Vec::new());
        }
        for c in codes {
            self.check_fingerprint(c)?;
        }
        let per_slot: Vec<Vec<usize>> = (0..self.layout.slot_count())
            .map(|s| codes.iter().map(|c| c.slots().nth(s).expect("shape checked")).collect())
            .collect();
        let slots = self.gather_codes(&per_slot)?;
        self.assemble(&self.decode_raw(&slots)?)
    }

    /// Decode unquantized slot vectors (used for latent interpolation).
    pub fn decode_continuous(&self, z: &ContinuousLatent) -> Result<Pose> {
        let mut v = self.decode_continuous_many(std::slice::from_ref(z))?;
        Ok(v.pop().expect("one latent"))
    }

    pub fn decode_continuous_many(&self, zs: &[ContinuousLatent]) -> Result<Vec<Pose>> {
        if zs.is_empty() {
            return Ok(Vec::new());
        }
        for z in zs {
            z.check_shape(&self.layout)?;
        }
        let d = self.layout.d_code;
        let slots = (0..self.layout.slot_count())
            .map(|s| {
                let mut data = Vec::with_capacity(zs.len() * d);
                for z in zs {
                    data.extend_from_slice(z.slots().nth(s).expect("shape checked"));
                }
                Tensor::new(vec![zs.len(), d], data)
            })
            .collect::<Result<Vec<_>>>()?;
        self.assemble(&self.decode_raw(&slots)?)
    }

    /// Quantized vectors of a code, as a continuous latent.
    pub fn code_vectors(&self, code: &LatentCode) -> Result<ContinuousLatent> {
        self.check_fingerprint(code)?;
        let slots = code
            .slots()
            .enumerate()
            .map(|(s, i)| {
                let cb = &self.codebooks[self.slot_codebook[s]];
                if i >= cb.size() {
                    return Err(Error::CodeOutOfRange {
                        codebook: cb.id().into(),
                        index: i,
                        size: cb.size(),
                    });
                }
                Ok(cb.code(i).to_vec())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ContinuousLatent::from_slots(&self.layout, slots))
    }

    /// `decode_quantized(encode(p))` for a batch.
    pub fn reconstruct_many(&self, poses: &[Pose]) -> Result<Vec<Pose>> {
        let enc = self.encode_tensor(&self.pose_tensor(poses)?)?;
        let slots = self.gather_codes(&enc.index)?;
        self.assemble(&self.decode_raw(&slots)?)
    }

    pub fn reconstruct(&self, pose: &Pose) -> Result<Pose> {
        Ok(self.reconstruct_many(std::slice::from_ref(pose))?.pop().expect("one pose"))
    }
}
