use super::metrics::{eval_escalated, eval_local_modification, eval_reconstruction};
use super::MetricSummary;
use crate::data::PoseDataset;
use crate::geometry::{Pose, Skeleton};
use crate::model::QPoserModel;
use crate::rng::SplitMix64;
use crate::training::{train, ModelConfig, TrainConfig};
use crate::Result;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationVariant {
    /// The base configuration unchanged.
    Base,
    /// The same head count for every part; global group unchanged.
    HeadsPerPart(usize),
    /// One undifferentiated slot group, no global conditioning.
    GlifOff,
}

impl AblationVariant {
    pub fn label(&self) -> String {
        match self {
            Self::Base => "base".into(),
            Self::HeadsPerPart(1) => "1 head per part".into(),
            Self::HeadsPerPart(h) => format!("{h} heads per part"),
            Self::GlifOff => "global conditioning off".into(),
        }
    }

    pub fn apply(&self, base: &ModelConfig) -> ModelConfig {
        let mut cfg = base.clone();
        match *self {
            Self::Base => {}
            Self::HeadsPerPart(h) => cfg.heads = [h; 4],
            Self::GlifOff => cfg.glif = false,
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub label: String,
    pub slots: usize,
    pub fingerprint: String,
    pub recon: MetricSummary,
    pub escalated: MetricSummary,
    pub embodied_shift: f64,
}

/// Score one trained model the way the ablation table does.
pub fn ablation_row(
    label: &str,
    model: &QPoserModel,
    test: &[Pose],
    escalated_k: usize,
    shift_trials: usize,
    seed: u64,
) -> Result<AblationRow> {
    let (recon, _) = eval_reconstruction(model, test)?;
    let (escalated, _) = eval_escalated(model, test, escalated_k)?;
    let shift = eval_local_modification(model, test, shift_trials, &mut SplitMix64::new(seed))?;
    Ok(AblationRow {
        label: label.into(),
        slots: model.layout().slot_count(),
        fingerprint: format!("{:016x}", model.fingerprint()),
        recon,
        escalated,
        embodied_shift: shift.embodied_shift,
    })
}

/// Train every variant with the shared seed and budget and score it on `test`.
#[allow(clippy::too_many_arguments)]
pub fn run_ablation(
    skeleton: &Skeleton,
    base: &ModelConfig,
    train_cfg: &TrainConfig,
    train_set: &PoseDataset,
    val_set: &PoseDataset,
    test: &[Pose],
    variants: &[AblationVariant],
    escalated_k: usize,
    shift_trials: usize,
) -> Result<Vec<AblationRow>> {
    variants
        .iter()
        .map(|v| {
            log::info!("ablation: training variant `{}`", v.label());
            let model = v.apply(base).build(skeleton)?;
            let (model, _) = train(model, train_set, val_set, train_cfg)?;
            ablation_row(&v.label(), &model, test, escalated_k, shift_trials, train_cfg.seed)
        })
        .collect()
}
