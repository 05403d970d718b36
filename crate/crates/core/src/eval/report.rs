use super::MetricSummary;
use crate::{Error, Result};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use std::fmt::Write;

/// Label carried by every published reference value.
pub const PUBLISHED_LABEL: &str = "published, not reproduced";

/// A published full-scale value shown next to desk measurements for context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub block: String,
    pub method: String,
    pub metric: String,
    pub mean: f64,
    pub std: Option<f64>,
    pub label: String,
}

impl ReferenceRow {
    fn new(block: &str, method: &str, metric: &str, mean: f64, std: Option<f64>) -> Self {
        Self {
            block: block.into(),
            method: method.into(),
            metric: metric.into(),
            mean,
            std,
            label: PUBLISHED_LABEL.into(),
        }
    }

    /// Values reported for the full-scale model trained on 20M motion-capture poses.
    pub fn published() -> Vec<Self> {
        vec![
            Self::new("recon", "QPoser", "mpjae_deg", 2.62, Some(1.64)),
            Self::new("recon", "VPoser", "mpjae_deg", 7.47, Some(5.57)),
            Self::new("recon", "GAN-S", "mpjae_deg", 10.62, Some(8.51)),
            Self::new("escalated", "QPoser", "escalated_deg_k50", 0.34, Some(1.49)),
            Self::new("escalated", "QPoser", "escalated_deg_k1000", 0.33, None),
            Self::new("ablation", "1 head", "mpjae_deg", 14.96, None),
            Self::new("ablation", "8 heads", "mpjae_deg", 9.70, None),
            Self::new("ablation", "63 heads + global conditioning", "mpjae_deg", 2.62, None),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub fingerprint: String,
    pub dataset_hash: String,
    /// Block name -> metric name -> summary.
    pub metrics: IndexMap<String, IndexMap<String, MetricSummary>>,
    /// Block name -> structured details (per-pair scores, ablation rows, ...).
    pub details: IndexMap<String, serde_json::Value>,
    pub reference_rows: Vec<ReferenceRow>,
    pub renders: Vec<String>,
    pub notes: Vec<String>,
}

impl EvalReport {
    pub fn new(fingerprint: u64, dataset_hash: u64) -> Self {
        Self {
            fingerprint: format!("{fingerprint:016x}"),
            dataset_hash: format!("{dataset_hash:016x}"),
            metrics: IndexMap::new(),
            details: IndexMap::new(),
            reference_rows: Vec::new(),
            renders: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn insert(&mut self, block: &str, metric: &str, value: MetricSummary) -> Result<()> {
        if value.n == 0 {
            return Err(Error::InvalidConfig(format!("metric {block}.{metric} has n = 0")));
        }
        self.metrics
            .entry(block.to_string())
            .or_default()
            .insert(metric.to_string(), value);
        Ok(())
    }

    pub fn insert_details<T: Serialize>(&mut self, block: &str, details: &T) -> Result<()> {
        self.details.insert(block.to_string(), serde_json::to_value(details)?);
        Ok(())
    }

    /// Attach the published rows relevant to the blocks present.
    pub fn attach_references(&mut self) {
        self.reference_rows = ReferenceRow::published()
            .into_iter()
            .filter(|r| self.metrics.contains_key(&r.block))
            .collect();
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Aligned plain-text tables.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "model {}  dataset {}", self.fingerprint, self.dataset_hash);
        let width = self
            .metrics
            .values()
            .flat_map(|m| m.keys())
            .map(|k| k.len())
            .max()
            .unwrap_or(6)
            .max(6);
        for (block, metrics) in &self.metrics {
            let _ = writeln!(out, "\n[{block}]");
            let _ = writeln!(out, "  {:<width$}  {:>12}  {:>12}  {:>7}", "metric", "mean", "std", "n");
            for (name, m) in metrics {
                let _ = writeln!(out, "  {name:<width$}  {:>12.4}  {:>12.4}  {:>7}", m.mean, m.std, m.n);
            }
            let refs: Vec<_> = self.reference_rows.iter().filter(|r| &r.block == block).collect();
            if !refs.is_empty() {
                let _ = writeln!(out, "  reference values ({PUBLISHED_LABEL}):");
                for r in refs {
                    let std = r.std.map(|s| format!("{s:.2}")).unwrap_or_else(|| "-".into());
                    let _ = writeln!(out, "    {:<32} {:<20} {:>8.2} {:>8}", r.method, r.metric, r.mean, std);
                }
            }
        }
        for note in &self.notes {
            let _ = writeln!(out, "\nnote: {note}");
        }
        out
    }
}
