use crate::geometry::Skeleton;
use crate::model::{HiddenSpec, PartLayout, QPoserModel};
use crate::numerics::{Activation, OptimizerKind};
use crate::vq::{DEFAULT_EMA_DECAY, DEFAULT_EMA_EPSILON};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub steps: u64,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    /// Commitment weight `lambda`.
    pub commit_weight: f64,
    pub ema_decay: f64,
    pub ema_epsilon: f64,
    /// Codes used fewer times than this over one reseed period are reseeded.
    pub reseed_min_usage: u64,
    /// Steps between dead-code reseeds; 0 means one pass over the training set.
    pub reseed_every: u64,
    pub eval_every: u64,
    /// Validation poses scored at each evaluation (0 = all).
    pub val_limit: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    /// Desk-scale defaults.
    fn default() -> Self {
        Self {
            batch_size: 64,
            steps: 20_000,
            learning_rate: 5e-3,
            optimizer: OptimizerKind::adam(),
            commit_weight: 1.0,
            ema_decay: DEFAULT_EMA_DECAY,
            ema_epsilon: DEFAULT_EMA_EPSILON,
            reseed_min_usage: 1,
            reseed_every: 0,
            eval_every: 500,
            val_limit: 0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be > 0");
        }
        if !(self.commit_weight.is_finite() && self.commit_weight >= 0.0) {
            return bad("commit_weight must be >= 0");
        }
        if !(self.ema_decay > 0.0 && self.ema_decay < 1.0) {
            return bad("ema_decay must lie in (0, 1)");
        }
        if !(self.ema_epsilon.is_finite() && self.ema_epsilon >= 0.0) {
            return bad("ema_epsilon must be >= 0");
        }
        if self.eval_every == 0 {
            return bad("eval_every must be >= 1");
        }
        if self.reseed_min_usage == 0 {
            return bad("reseed_min_usage must be >= 1");
        }
        Ok(())
    }
}

/// Architecture choice for a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Heads per part: `[head, torso, arm, leg]`.
    pub heads: [usize; 4],
    pub global_heads: usize,
    /// Codebook sizes: `[head, torso, arms, legs, global]`.
    pub codebook_sizes: [usize; 5],
    pub d_code: usize,
    /// Part groups with global conditioning. When false, all part heads form
    /// one group over the whole body (codebook size taken from the torso
    /// entry) and no global group exists.
    pub glif: bool,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub activation: Activation,
    pub seed: u64,
}

impl Default for ModelConfig {
    /// Desk-scale layout.
    fn default() -> Self {
        let hidden = HiddenSpec::desk();
        Self {
            heads: [2, 4, 4, 4],
            global_heads: 2,
            codebook_sizes: [8, 16, 16, 16, 8],
            d_code: 8,
            glif: true,
            hidden_width: hidden.width,
            hidden_layers: hidden.layers,
            activation: hidden.activation,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Full-scale layout (66 slots, d_code 16, width 256).
    pub fn full() -> Self {
        Self {
            heads: [3, 12, 12, 12],
            global_heads: 3,
            codebook_sizes: [8, 32, 32, 32, 8],
            d_code: 16,
            hidden_width: 256,
            ..Self::default()
        }
    }

    pub fn layout(&self, skeleton: &Skeleton) -> Result<PartLayout> {
        if self.glif {
            PartLayout::body(skeleton, self.heads, self.global_heads, self.codebook_sizes, self.d_code)
        } else {
            let [h, t, a, l] = self.heads;
            PartLayout::single_group(skeleton, h + t + 2 * a + 2 * l, self.codebook_sizes[1], self.d_code)
        }
    }

    pub fn hidden(&self) -> HiddenSpec {
        HiddenSpec {
            width: self.hidden_width,
            layers: self.hidden_layers,
            activation: self.activation,
        }
    }

    pub fn build(&self, skeleton: &Skeleton) -> Result<QPoserModel> {
        QPoserModel::build(self.layout(skeleton)?, skeleton.clone(), self.hidden(), self.seed)
    }
}
