use super::PartLayout;
use crate::{Error, Result};

/// Pre-quantization encoder outputs, grouped like the layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousLatent {
    /// Per part, one `d_code`-vector per head.
    pub parts: Vec<Vec<Vec<f64>>>,
    pub global: Vec<Vec<f64>>,
}

/// Quantized latent: one code index per slot, tagged with the producing
/// model's fingerprint.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LatentCode {
    pub fingerprint: u64,
    pub parts: Vec<Vec<usize>>,
    pub global: Vec<usize>,
}

impl ContinuousLatent {
    pub fn from_slots(layout: &PartLayout, slots: Vec<Vec<f64>>) -> Self {
        let mut it = slots.into_iter();
        let parts = layout
            .parts
            .iter()
            .map(|p| it.by_ref().take(p.head_count).collect())
            .collect();
        let global = it.collect();
        Self { parts, global }
    }

    /// Slot vectors in slot order.
    pub fn slots(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.parts.iter().flatten().chain(&self.global)
    }

    pub fn check_shape(&self, layout: &PartLayout) -> Result<()> {
        let ok = self.parts.len() == layout.parts.len()
            && self.parts.iter().zip(&layout.parts).all(|(g, p)| g.len() == p.head_count)
            && self.global.len() == layout.global_heads()
            && self.slots().all(|v| v.len() == layout.d_code);
        if !ok {
            return Err(Error::ShapeMismatch("continuous latent does not match the model layout".into()));
        }
        if self.slots().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("continuous latent component".into()));
        }
        Ok(())
    }

    /// `(1 - t) a + t b`, slot by slot.
    pub fn lerp(a: &Self, b: &Self, t: f64) -> Self {
        let mix = |x: &Vec<f64>, y: &Vec<f64>| -> Vec<f64> {
            x.iter().zip(y).map(|(p, q)| (1.0 - t) * p + t * q).collect()
        };
        Self {
            parts: a
                .parts
                .iter()
                .zip(&b.parts)
                .map(|(ga, gb)| ga.iter().zip(gb).map(|(x, y)| mix(x, y)).collect())
                .collect(),
            global: a.global.iter().zip(&b.global).map(|(x, y)| mix(x, y)).collect(),
        }
    }
}

impl LatentCode {
    pub fn from_slots(layout: &PartLayout, fingerprint: u64, slots: &[usize]) -> Self {
        let mut it = slots.iter().copied();
        let parts = layout
            .parts
            .iter()
            .map(|p| it.by_ref().take(p.head_count).collect())
            .collect();
        Self {
            fingerprint,
            parts,
            global: it.collect(),
        }
    }

    pub fn slots(&self) -> impl Iterator<Item = usize> + '_ {
        self.parts.iter().flatten().chain(&self.global).copied()
    }

    pub fn check_shape(&self, layout: &PartLayout) -> Result<()> {
        let ok = self.parts.len() == layout.parts.len()
            && self.parts.iter().zip(&layout.parts).all(|(g, p)| g.len() == p.head_count)
            && self.global.len() == layout.global_heads();
        if !ok {
            return Err(Error::ShapeMismatch("latent code does not match the model layout".into()));
        }
        Ok(())
    }
}
