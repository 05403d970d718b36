//! The training loop and the `QPCK` checkpoint container.
//!
//! Each step draws a seeded batch (with replacement), computes
//! [`QPoserModel::loss_and_grads`], applies one optimizer step to the
//! encoder and decoder parameters, and moves every codebook by EMA towards
//! the encoder outputs assigned to it. Codes left unused for a reseed period
//! are replaced by random encoder outputs from the current batch. Before the
//! first step every codebook is seeded by k-means++ over the first batch's
//! encoder outputs.
//!
//! Randomness comes from three substreams of the run seed (batch draws,
//! codebook seeding, reseeding), so a run is a pure function of its inputs
//! and can be resumed bitwise from a checkpoint.

mod checkpoint;
mod config;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{ModelConfig, TrainConfig};

use crate::data::PoseDataset;
use crate::geometry::{mpjae_deg, Pose};
use crate::model::QPoserModel;
use crate::numerics::OptimizerState;
use crate::rng::SplitMix64;
use crate::vq::kmeans_plus_plus_seed;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

const TAG_BATCH: u64 = 0x6261_7463;
const TAG_SEED_CODES: u64 = 0x6b6d_7070;
const TAG_RESEED: u64 = 0x7273_6564;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    /// Number of completed steps.
    pub step: u64,
    pub loss_total: f64,
    pub loss_recon: f64,
    pub loss_commit: f64,
    /// Mean validation reconstruction MPJAE (degrees), at evaluation steps.
    pub val_mpjae: Option<f64>,
    /// Per codebook, fraction of codes used by this step's batch.
    pub usage: Vec<f64>,
}

/// Everything needed to continue a run bitwise.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub config: TrainConfig,
    pub model: QPoserModel,
    pub optimizer: OptimizerState,
    pub step: u64,
    pub batch_rng: SplitMix64,
    pub reseed_rng: SplitMix64,
    pub codebooks_seeded: bool,
    pub history: Vec<HistoryRecord>,
}

impl TrainState {
    pub fn new(model: QPoserModel, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let optimizer = OptimizerState::new(config.optimizer, config.learning_rate, &model.param_sizes());
        Ok(Self {
            batch_rng: SplitMix64::substream(config.seed, TAG_BATCH),
            reseed_rng: SplitMix64::substream(config.seed, TAG_RESEED),
            config,
            model,
            optimizer,
            step: 0,
            codebooks_seeded: false,
            history: Vec::new(),
        })
    }

    /// Train until `config.steps` steps are complete.
    pub fn run(&mut self, train: &PoseDataset, val: &PoseDataset) -> Result<()> {
        self.run_until(train, val, self.config.steps, |_| {})
    }

    /// Train until `min(target, config.steps)` steps are complete, calling
    /// `observe` after each step.
    pub fn run_until(
        &mut self,
        train: &PoseDataset,
        val: &PoseDataset,
        target: u64,
        mut observe: impl FnMut(&HistoryRecord),
    ) -> Result<()> {
        let name = self.model.skeleton().name().to_string();
        for ds in [train, val] {
            if ds.is_empty() {
                return Err(Error::InvalidConfig("training needs nonempty train and validation sets".into()));
            }
            if ds.skeleton_id != name {
                return Err(Error::SkeletonMismatch {
                    expected: name,
                    actual: ds.skeleton_id.clone(),
                });
            }
        }
        let target = target.min(self.config.steps);
        let period = match self.config.reseed_every {
            0 => (train.len() as u64).div_ceil(self.config.batch_size as u64).max(1),
            p => p,
        };
        let val_poses = match self.config.val_limit {
            0 => &val.poses[..],
            n => &val.poses[..n.min(val.len())],
        };
        while self.step < target {
            let record = self.step_once(train, val_poses, period)?;
            observe(&record);
            self.history.push(record);
        }
        self.model.refresh_fingerprint();
        Ok(())
    }

    fn step_once(&mut self, train: &PoseDataset, val: &[Pose], period: u64) -> Result<HistoryRecord> {
        let cfg = &self.config;
        let step = self.step + 1;
        let diverged = |e: Error| match e {
            Error::NonFinite(component) => Error::TrainingDivergence { step, component },
            other => other,
        };
        let batch: Vec<Pose> = (0..cfg.batch_size)
            .map(|_| train.poses[self.batch_rng.below(train.len())].clone())
            .collect();
        if !self.codebooks_seeded {
            seed_codebooks(&mut self.model, &batch, cfg.seed)?;
            self.codebooks_seeded = true;
        }

        let out = self.model.loss_and_grads(&batch, cfg.commit_weight).map_err(diverged)?;
        {
            let grads = out.grads.slices();
            self.optimizer
                .step(&mut self.model.params_mut(), &grads)
                .map_err(diverged)?;
        }

        let slot_book = self.model.slot_codebook().to_vec();
        let books = self.model.codebooks().len();
        let mut usage = Vec::with_capacity(books);
        for b in 0..books {
            let assignments: Vec<(usize, &[f64])> = slot_book
                .iter()
                .enumerate()
                .filter(|&(_, &sb)| sb == b)
                .flat_map(|(s, _)| {
                    let out = &out;
                    (0..batch.len()).map(move |i| (out.assignments()[s][i], out.encoder_output(s, i)))
                })
                .collect();
            let book = &mut self.model.codebooks_mut()[b];
            let mut used = vec![false; book.size()];
            for &(i, _) in &assignments {
                used[i] = true;
            }
            usage.push(used.iter().filter(|&&u| u).count() as f64 / book.size() as f64);
            book.ema_update(&assignments, cfg.ema_decay, cfg.ema_epsilon)
                .map_err(diverged)?;
            if step % period == 0 {
                let vectors: Vec<&[f64]> = assignments.iter().map(|&(_, z)| z).collect();
                book.reseed_dead_codes(&vectors, cfg.reseed_min_usage, &mut self.reseed_rng)?;
                book.reset_usage();
            }
        }

        let val_mpjae = if step % cfg.eval_every == 0 || step == cfg.steps {
            Some(mean_reconstruction_error(&self.model, val)?)
        } else {
            None
        };
        self.step = step;
        Ok(HistoryRecord {
            step,
            loss_total: out.total,
            loss_recon: out.recon,
            loss_commit: out.commit,
            val_mpjae,
            usage,
        })
    }
}

/// k-means++ over the encoder outputs of every slot bound to each codebook.
fn seed_codebooks(model: &mut QPoserModel, batch: &[Pose], seed: u64) -> Result<()> {
    let mut rng = SplitMix64::substream(seed, TAG_SEED_CODES);
    let encoded = model.encode_tensor(&model.pose_tensor(batch)?)?;
    let slot_book = model.slot_codebook().to_vec();
    let z = &encoded.z;
    for b in 0..model.codebooks().len() {
        let candidates: Vec<&[f64]> = slot_book
            .iter()
            .enumerate()
            .filter(|&(_, &sb)| sb == b)
            .flat_map(|(s, _)| (0..batch.len()).map(move |i| z[s].row(i)))
            .collect();
        let k = model.codebooks()[b].size();
        let codes = kmeans_plus_plus_seed(&candidates, k, &mut rng)?;
        for (i, c) in codes.iter().enumerate() {
            model.codebooks_mut()[b].set_code(i, c)?;
        }
    }
    model.refresh_fingerprint();
    Ok(())
}

/// Mean of `mpjae(p, reconstruct(p))` over `poses`, in chunks.
pub fn mean_reconstruction_error(model: &QPoserModel, poses: &[Pose]) -> Result<f64> {
    if poses.is_empty() {
        return Err(Error::InvalidPose("empty pose set".into()));
    }
    let mut total = 0.0;
    for chunk in poses.chunks(256) {
        for (p, r) in chunk.iter().zip(model.reconstruct_many(chunk)?) {
            total += mpjae_deg(p, &r)?;
        }
    }
    Ok(total / poses.len() as f64)
}

/// Train a fresh state to completion.
pub fn train(
    model: QPoserModel,
    train_set: &PoseDataset,
    val_set: &PoseDataset,
    config: &TrainConfig,
) -> Result<(QPoserModel, Vec<HistoryRecord>)> {
    let mut state = TrainState::new(model, config.clone())?;
    state.run(train_set, val_set)?;
    Ok((state.model, state.history))
}

/// History as CSV, one usage column per codebook id.
pub fn history_csv(history: &[HistoryRecord], codebook_ids: &[&str]) -> String {
    let mut out = String::from("step,loss_total,loss_recon,loss_commit,val_mpjae");
    for id in codebook_ids {
        out.push_str(",usage_");
        out.push_str(id);
    }
    out.push('\n');
    for r in history {
        out.push_str(&format!("{},{},{},{},", r.step, r.loss_total, r.loss_recon, r.loss_commit));
        if let Some(v) = r.val_mpjae {
            out.push_str(&v.to_string());
        }
        for u in &r.usage {
            out.push(',');
            out.push_str(&u.to_string());
        }
        out.push('\n');
    }
    out
}
