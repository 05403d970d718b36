//! Evaluation protocol: reconstruction, escalated error, interpolation,
//! sampling, local modification, ablations, reports and stick-figure renders.

mod ablation;
mod metrics;
mod render;
mod report;

pub use ablation::{ablation_row, run_ablation, AblationRow, AblationVariant};
pub use metrics::{
    eval_escalated, eval_interpolation, eval_local_modification, eval_reconstruction, eval_sampling,
    random_joint_space_pose, sample_pairs, InterpolationPair, InterpolationReport, LocalModificationReport,
    SamplingReport,
};
pub use render::{render_pose_svg, render_pose_svg_string, View};
pub use report::{EvalReport, ReferenceRow, PUBLISHED_LABEL};

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Mean, population standard deviation and count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MetricSummary {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidConfig("metric over an empty set".into()));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Ok(Self {
            mean,
            std: var.sqrt(),
            n: values.len(),
        })
    }

    pub fn single(value: f64) -> Self {
        Self {
            mean: value,
            std: 0.0,
            n: 1,
        }
    }
}
