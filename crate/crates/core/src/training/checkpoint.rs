//! `QPCK` checkpoint container.
//!
//! ```text
//! "QPCK"  u32 version
//! then sections, each:  [4-byte tag][u64 payload length][payload][u64 FNV-1a of payload]
//! ```
//!
//! All integers little-endian. Sections, in order:
//!
//! - `META`: JSON with layout, skeleton, hidden spec, training config, step
//!   counter, generator states and the model fingerprint.
//! - `PRMS`: every network parameter as f64, encoders in slot order then
//!   decoders, each network as `w0 b0 w1 b1 ...` (weights row-major, output × input).
//! - `BOOK`: per codebook in layout order: codes, EMA cluster sizes and EMA
//!   code sums as f64, then usage counts as u64.
//! - `OPTM`: optimizer first moments then second moments as f64, tensor
//!   order as in `PRMS`.
//! - `HIST`: JSON array of history records.
//!
//! Every section checksum is verified before anything is constructed.

use super::{HistoryRecord, TrainConfig, TrainState};
use crate::geometry::{Skeleton, SkeletonFile};
use crate::hash::fnv1a64;
use crate::model::{HiddenSpec, PartLayout, QPoserModel};
use crate::numerics::{Mlp, MlpSpec, OptimizerKind, OptimizerState};
use crate::rng::SplitMix64;
use crate::vq::Codebook;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"QPCK";
pub const CHECKPOINT_VERSION: u32 = 1;

const SECTIONS: [&[u8; 4]; 5] = [b"META", b"PRMS", b"BOOK", b"OPTM", b"HIST"];

#[derive(Serialize, Deserialize)]
struct Meta {
    layout: PartLayout,
    skeleton: SkeletonFile,
    hidden: HiddenSpec,
    config: TrainConfig,
    step: u64,
    batch_rng: SplitMix64,
    reseed_rng: SplitMix64,
    codebooks_seeded: bool,
    optimizer_kind: OptimizerKind,
    optimizer_learning_rate: f64,
    optimizer_step: u64,
    fingerprint: String,
}

fn push_f64s(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn save_checkpoint(path: &Path, state: &TrainState) -> Result<()> {
    std::fs::write(path, encode(state)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<TrainState> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub(crate) fn encode(state: &TrainState) -> Result<Vec<u8>> {
    let model = &state.model;
    let meta = Meta {
        layout: model.layout().clone(),
        skeleton: model.skeleton().to_file(),
        hidden: model.hidden(),
        config: state.config.clone(),
        step: state.step,
        batch_rng: state.batch_rng.clone(),
        reseed_rng: state.reseed_rng.clone(),
        codebooks_seeded: state.codebooks_seeded,
        optimizer_kind: state.optimizer.kind,
        optimizer_learning_rate: state.optimizer.learning_rate,
        optimizer_step: state.optimizer.step,
        fingerprint: format!("{:016x}", model.fingerprint()),
    };
    let mut params = Vec::new();
    for p in model.params() {
        push_f64s(&mut params, p);
    }
    let mut books = Vec::new();
    for b in model.codebooks() {
        push_f64s(&mut books, b.codes());
        push_f64s(&mut books, b.ema_cluster_size());
        push_f64s(&mut books, b.ema_code_sum());
        for u in b.usage_count() {
            books.extend_from_slice(&u.to_le_bytes());
        }
    }
    let mut optim = Vec::new();
    for m in state.optimizer.first_moment.iter().chain(&state.optimizer.second_moment) {
        push_f64s(&mut optim, m);
    }
    let payloads = [
        serde_json::to_vec(&meta)?,
        params,
        books,
        optim,
        serde_json::to_vec(&state.history)?,
    ];
    let mut out = Vec::new();
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for (tag, payload) in SECTIONS.iter().zip(&payloads) {
        out.extend_from_slice(*tag);
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(payload);
        out.extend_from_slice(&fnv1a64(payload).to_le_bytes());
    }
    Ok(out)
}

/// Sequential little-endian reader over one section payload.
struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
    section: &'static str,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.at < n {
            return Err(Error::Format(format!("section {} is too short", self.section)));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self
            .take(8 * n)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn u64s(&mut self, n: usize) -> Result<Vec<u64>> {
        Ok(self
            .take(8 * n)?
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn finish(&self) -> Result<()> {
        if self.at != self.bytes.len() {
            return Err(Error::Format(format!("section {} has trailing bytes", self.section)));
        }
        Ok(())
    }
}

fn split_sections(bytes: &[u8]) -> Result<Vec<&[u8]>> {
    if bytes.len() < 8 || bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a QPCK checkpoint (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let mut at = 8;
    let mut out = Vec::with_capacity(SECTIONS.len());
    for tag in SECTIONS {
        let name = String::from_utf8_lossy(tag).into_owned();
        if bytes.len() < at + 12 {
            return Err(Error::Checksum(name));
        }
        if &bytes[at..at + 4] != tag {
            return Err(Error::Format(format!("expected section {name}")));
        }
        let len = u64::from_le_bytes(bytes[at + 4..at + 12].try_into().expect("8 bytes"));
        let start = at + 12;
        let end = usize::try_from(len)
            .ok()
            .and_then(|l| start.checked_add(l))
            .filter(|&e| e.checked_add(8).is_some_and(|t| t <= bytes.len()))
            .ok_or_else(|| Error::Checksum(name.clone()))?;
        let payload = &bytes[start..end];
        let stored = u64::from_le_bytes(bytes[end..end + 8].try_into().expect("8 bytes"));
        if fnv1a64(payload) != stored {
            return Err(Error::Checksum(name));
        }
        out.push(payload);
        at = end + 8;
    }
    if at != bytes.len() {
        return Err(Error::Format("trailing bytes after the last section".into()));
    }
    Ok(out)
}

pub(crate) fn decode(bytes: &[u8]) -> Result<TrainState> {
    let sections = split_sections(bytes)?;
    let meta: Meta = serde_json::from_slice(sections[0]).map_err(|e| Error::Format(format!("META: {e}")))?;
    let skeleton = Skeleton::from_file(meta.skeleton)?;
    let layout = meta.layout;
    layout.validate(&skeleton)?;
    let hidden = meta.hidden;

    let mut prms = Cursor {
        bytes: sections[1],
        at: 0,
        section: "PRMS",
    };
    let mut read_mlp = |widths: Vec<usize>| -> Result<Mlp> {
        let spec = MlpSpec::new(widths, hidden.activation)?;
        let layers = spec
            .layer_widths
            .windows(2)
            .map(|w| Ok((prms.f64s(w[0] * w[1])?, prms.f64s(w[1])?)))
            .collect::<Result<Vec<_>>>()?;
        Mlp::from_params(spec, layers)
    };
    let input = 4 * skeleton.joint_count();
    let encoders = (0..layout.slot_count())
        .map(|_| read_mlp(hidden.widths(input, layout.d_code)))
        .collect::<Result<Vec<_>>>()?;
    let decoders = (0..layout.parts.len())
        .map(|p| read_mlp(hidden.widths(layout.decoder_input(p), 4 * layout.parts[p].joint_indices.len())))
        .collect::<Result<Vec<_>>>()?;
    prms.finish()?;

    let mut book = Cursor {
        bytes: sections[2],
        at: 0,
        section: "BOOK",
    };
    let d = layout.d_code;
    let codebooks = layout
        .codebooks
        .iter()
        .map(|spec| {
            let k = spec.size;
            let codes = book.f64s(k * d)?;
            let sizes = book.f64s(k)?;
            let sums = book.f64s(k * d)?;
            let usage = book.u64s(k)?;
            Codebook::from_parts(spec.id.clone(), d, codes, sizes, sums, usage)
        })
        .collect::<Result<Vec<_>>>()?;
    book.finish()?;

    let model = QPoserModel::from_components(layout, skeleton, hidden, encoders, codebooks, decoders)?;
    if format!("{:016x}", model.fingerprint()) != meta.fingerprint {
        return Err(Error::Format(format!(
            "restored model fingerprint {:016x} does not match recorded {}",
            model.fingerprint(),
            meta.fingerprint
        )));
    }

    let sizes = model.param_sizes();
    let mut optim = Cursor {
        bytes: sections[3],
        at: 0,
        section: "OPTM",
    };
    let mut optimizer = OptimizerState::new(meta.optimizer_kind, meta.optimizer_learning_rate, &sizes);
    optimizer.step = meta.optimizer_step;
    for m in optimizer.first_moment.iter_mut().chain(optimizer.second_moment.iter_mut()) {
        *m = optim.f64s(m.len())?;
    }
    optim.finish()?;

    let history: Vec<HistoryRecord> =
        serde_json::from_slice(sections[4]).map_err(|e| Error::Format(format!("HIST: {e}")))?;
    meta.config.validate()?;
    Ok(TrainState {
        config: meta.config,
        model,
        optimizer,
        step: meta.step,
        batch_rng: meta.batch_rng,
        reseed_rng: meta.reseed_rng,
        codebooks_seeded: meta.codebooks_seeded,
        history,
    })
}
