//! Codebooks and vector quantization.
//!
//! Quantization snaps a vector to its nearest code under squared Euclidean
//! distance, ties going to the lowest index. On the backward pass the
//! quantizer is the identity (straight-through): the gradient on the
//! quantized vector is passed unchanged to the encoder output, and the
//! codebook never receives gradients. Codes are instead learned with
//! exponential moving averages of the vectors assigned to them.

use serde::{Deserialize, Serialize};

use crate::rng::SplitMix64;
use crate::{Error, Result};

pub const DEFAULT_EMA_DECAY: f64 = 0.99;
pub const DEFAULT_EMA_EPSILON: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    id: String,
    dim: usize,
    /// `K × dim`, row-major.
    codes: Vec<f64>,
    ema_cluster_size: Vec<f64>,
    /// `K × dim`, row-major.
    ema_code_sum: Vec<f64>,
    /// Assignments since the last [`Codebook::reset_usage`].
    usage_count: Vec<u64>,
}

/// Result of quantizing one vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantized {
    pub index: usize,
    pub distance2: f64,
}

impl Codebook {
    /// A codebook from explicit code vectors. EMA state starts warm: each
    /// code counts as one observation of itself.
    pub fn from_codes(id: impl Into<String>, codes: Vec<Vec<f64>>) -> Result<Self> {
        let id = id.into();
        let dim = codes.first().map_or(0, Vec::len);
        if codes.is_empty() || dim == 0 {
            return Err(Error::InvalidConfig(format!("codebook `{id}` needs K >= 1 and d >= 1")));
        }
        if codes.iter().any(|c| c.len() != dim) {
            return Err(Error::ShapeMismatch(format!("codebook `{id}` has ragged codes")));
        }
        let flat = codes.concat();
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("codebook `{id}` code component")));
        }
        let k = codes.len();
        Ok(Self {
            id,
            dim,
            ema_cluster_size: vec![1.0; k],
            ema_code_sum: flat.clone(),
            codes: flat,
            usage_count: vec![0; k],
        })
    }

    /// Codes drawn uniformly from `[-scale, scale]`.
    pub fn random(id: impl Into<String>, size: usize, dim: usize, scale: f64, rng: &mut SplitMix64) -> Result<Self> {
        let codes = (0..size)
            .map(|_| (0..dim).map(|_| rng.uniform(-scale, scale)).collect())
            .collect();
        Self::from_codes(id, codes)
    }

    /// Reassemble from serialized state.
    pub fn from_parts(
        id: String,
        dim: usize,
        codes: Vec<f64>,
        ema_cluster_size: Vec<f64>,
        ema_code_sum: Vec<f64>,
        usage_count: Vec<u64>,
    ) -> Result<Self> {
        let k = ema_cluster_size.len();
        if k == 0 || dim == 0 || codes.len() != k * dim || ema_code_sum.len() != k * dim || usage_count.len() != k {
            return Err(Error::Format(format!("codebook `{id}` has inconsistent sizes")));
        }
        if codes.iter().any(|v| !v.is_finite()) || ema_cluster_size.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Format(format!("codebook `{id}` has invalid values")));
        }
        Ok(Self {
            id,
            dim,
            codes,
            ema_cluster_size,
            ema_code_sum,
            usage_count,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn size(&self) -> usize {
        self.ema_cluster_size.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn code(&self, index: usize) -> &[f64] {
        &self.codes[index * self.dim..(index + 1) * self.dim]
    }

    pub fn codes(&self) -> &[f64] {
        &self.codes
    }

    pub fn ema_cluster_size(&self) -> &[f64] {
        &self.ema_cluster_size
    }

    pub fn ema_code_sum(&self) -> &[f64] {
        &self.ema_code_sum
    }

    pub fn usage_count(&self) -> &[u64] {
        &self.usage_count
    }

    /// Nearest code by squared Euclidean distance; lowest index wins ties.
    pub fn quantize(&self, z: &[f64]) -> Result<Quantized> {
        if z.len() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "vector of length {} against codebook `{}` of dimension {}",
                z.len(),
                self.id,
                self.dim
            )));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("input to codebook `{}`", self.id)));
        }
        Ok(self.nearest(z))
    }

    /// [`Codebook::quantize`] without input validation.
    pub(crate) fn nearest(&self, z: &[f64]) -> Quantized {
        let mut best = Quantized {
            index: 0,
            distance2: f64::INFINITY,
        };
        for (i, c) in self.codes.chunks_exact(self.dim).enumerate() {
            let mut d2 = 0.0;
            for (a, b) in z.iter().zip(c) {
                let t = a - b;
                d2 += t * t;
            }
            if d2 < best.distance2 {
                best = Quantized { index: i, distance2: d2 };
            }
        }
        best
    }

    /// Overwrite one code and reset its EMA accumulators to a single
    /// observation of the new value.
    pub fn set_code(&mut self, index: usize, value: &[f64]) -> Result<()> {
        if index >= self.size() || value.len() != self.dim {
            return Err(Error::ShapeMismatch(format!("set_code({index}) on codebook `{}`", self.id)));
        }
        if value.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("code for codebook `{}`", self.id)));
        }
        let r = index * self.dim..(index + 1) * self.dim;
        self.codes[r.clone()].copy_from_slice(value);
        self.ema_code_sum[r].copy_from_slice(value);
        self.ema_cluster_size[index] = 1.0;
        Ok(())
    }

    /// EMA codebook step for a batch of `(index, vector)` assignments.
    ///
    /// ```text
    /// N_i <- decay N_i + (1 - decay) n_i
    /// S_i <- decay S_i + (1 - decay) sum of vectors assigned to i
    /// c_i <- S_i / N~_i,   N~_i = (N_i + eps) / (sum N + K eps) * sum N
    /// ```
    pub fn ema_update(&mut self, assignments: &[(usize, &[f64])], decay: f64, epsilon: f64) -> Result<()> {
        if !(decay > 0.0 && decay < 1.0) {
            return Err(Error::InvalidConfig(format!("EMA decay {decay} outside (0, 1)")));
        }
        if !(epsilon >= 0.0) {
            return Err(Error::InvalidConfig(format!("EMA epsilon {epsilon} must be >= 0")));
        }
        let (k, d) = (self.size(), self.dim);
        let mut counts = vec![0u64; k];
        let mut sums = vec![0.0; k * d];
        for &(i, z) in assignments {
            if i >= k || z.len() != d {
                return Err(Error::ShapeMismatch(format!("assignment to code {i} in codebook `{}`", self.id)));
            }
            counts[i] += 1;
            for (s, v) in sums[i * d..(i + 1) * d].iter_mut().zip(z) {
                *s += v;
            }
        }
        if sums.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("assigned vectors for codebook `{}`", self.id)));
        }
        for i in 0..k {
            self.ema_cluster_size[i] = decay * self.ema_cluster_size[i] + (1.0 - decay) * counts[i] as f64;
            for j in 0..d {
                let e = &mut self.ema_code_sum[i * d + j];
                *e = decay * *e + (1.0 - decay) * sums[i * d + j];
            }
            self.usage_count[i] += counts[i];
        }
        let total: f64 = self.ema_cluster_size.iter().sum();
        for i in 0..k {
            let smoothed = (self.ema_cluster_size[i] + epsilon) / (total + k as f64 * epsilon) * total;
            if smoothed > 0.0 {
                for j in 0..d {
                    self.codes[i * d + j] = self.ema_code_sum[i * d + j] / smoothed;
                }
            }
        }
        Ok(())
    }

    /// Replace every code used fewer than `min_usage` times since the last
    /// usage reset by a randomly drawn batch vector.
    /// Returns the reseeded indices.
    pub fn reseed_dead_codes(&mut self, batch: &[&[f64]], min_usage: u64, rng: &mut SplitMix64) -> Result<Vec<usize>> {
        if batch.is_empty() {
            return Err(Error::InvalidConfig("reseeding needs a nonempty batch".into()));
        }
        let mut reseeded = Vec::new();
        for i in 0..self.size() {
            if self.usage_count[i] < min_usage {
                let v = batch[rng.below(batch.len())];
                self.set_code(i, v)?;
                reseeded.push(i);
            }
        }
        Ok(reseeded)
    }

    pub fn reset_usage(&mut self) {
        self.usage_count.iter_mut().for_each(|c| *c = 0);
    }

    /// Uniform code index from a seeded generator.
    pub fn sample_code(&self, rng: &mut SplitMix64) -> usize {
        rng.below(self.size())
    }
}

/// Straight-through estimator: the gradient reaching the encoder output is
/// the gradient on the quantized vector, unchanged.
#[inline]
pub fn straight_through(upstream_grad_on_quantized: &[f64]) -> Vec<f64> {
    upstream_grad_on_quantized.to_vec()
}

/// Mean over pairs of the squared Euclidean distance `|z - z_q|^2`.
pub fn commitment_loss(z: &[&[f64]], zq: &[&[f64]]) -> Result<f64> {
    if z.len() != zq.len() {
        return Err(Error::ShapeMismatch(format!("{} vectors vs {} codes", z.len(), zq.len())));
    }
    if z.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (a, b) in z.iter().zip(zq) {
        if a.len() != b.len() {
            return Err(Error::ShapeMismatch("vector/code dimension mismatch".into()));
        }
        total += a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    }
    Ok(total / z.len() as f64)
}

/// k-means++ style seeding: first code uniform, each next code drawn with
/// probability proportional to its squared distance to the codes so far.
/// Falls back to uniform draws when all candidates coincide.
pub fn kmeans_plus_plus_seed(candidates: &[&[f64]], k: usize, rng: &mut SplitMix64) -> Result<Vec<Vec<f64>>> {
    if candidates.is_empty() || k == 0 {
        return Err(Error::InvalidConfig("k-means++ seeding needs candidates and k >= 1".into()));
    }
    let mut chosen: Vec<Vec<f64>> = vec![candidates[rng.below(candidates.len())].to_vec()];
    let d2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let mut best: Vec<f64> = candidates.iter().map(|c| d2(c, &chosen[0])).collect();
    while chosen.len() < k {
        let total: f64 = best.iter().sum();
        let pick = if total > 0.0 && total.is_finite() {
            let mut target = rng.next_f64() * total;
            let mut idx = candidates.len() - 1;
            for (i, w) in best.iter().enumerate() {
                if target < *w {
                    idx = i;
                    break;
                }
                target -= w;
            }
            idx
        } else {
            rng.below(candidates.len())
        };
        let c = candidates[pick].to_vec();
        for (b, cand) in best.iter_mut().zip(candidates) {
            *b = b.min(d2(cand, &c));
        }
        chosen.push(c);
    }
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn book(codes: &[&[f64]]) -> Codebook {
        Codebook::from_codes("t", codes.iter().map(|c| c.to_vec()).collect()).unwrap()
    }

    #[test]
    fn exact_code_hit() {
        let cb = book(&[&[0.0, 0.0], &[1.0, 2.0], &[3.0, -1.0]]);
        let q = cb.quantize(&[1.0, 2.0]).unwrap();
        assert_eq!((q.index, q.distance2), (1, 0.0));
        assert_eq!(cb.code(q.index), &[1.0, 2.0]);
    }

    #[test]
    fn tie_goes_to_lowest_index() {
        let cb = book(&[&[9.0, 9.0], &[8.0, 8.0], &[1.0, 0.0], &[7.0, 7.0], &[6.0, 6.0], &[-1.0, 0.0]]);
        assert_eq!(cb.quantize(&[0.0, 0.0]).unwrap().index, 2);
        let dup = book(&[&[5.0], &[1.0], &[1.0]]);
        assert_eq!(dup.quantize(&[1.0]).unwrap().index, 1);
    }

    #[test]
    fn quantize_rejects_bad_input() {
        let cb = book(&[&[0.0, 0.0]]);
        assert!(matches!(cb.quantize(&[f64::NAN, 0.0]), Err(Error::NonFinite(_))));
        assert!(cb.quantize(&[0.0]).is_err());
    }

    #[test]
    fn straight_through_is_identity() {
        assert_eq!(straight_through(&[0.0, 0.0]), vec![0.0, 0.0]);
        let g = [1.5, -2.25e-300, f64::MAX];
        assert_eq!(straight_through(&g), g.to_vec());
    }

    #[test]
    fn commitment_loss_examples() {
        let a = [1.0, 2.0];
        assert_eq!(commitment_loss(&[&a], &[&a]).unwrap(), 0.0);
        assert_eq!(commitment_loss(&[&[0.0, 1.0]], &[&[0.0, 0.0]]).unwrap(), 1.0);
        assert!(commitment_loss(&[&a], &[]).is_err());
    }

    #[test]
    fn ema_without_assignments_barely_moves_warm_codes() {
        let mut cb = book(&[&[1.0, -2.0], &[0.5, 3.0]]);
        for i in 0..2 {
            cb.ema_cluster_size[i] = 1000.0;
            for j in 0..2 {
                cb.ema_code_sum[i * 2 + j] = 1000.0 * cb.codes[i * 2 + j];
            }
        }
        let before = cb.codes.clone();
        cb.ema_update(&[], 0.99, 1e-5).unwrap();
        for (a, b) in before.iter().zip(&cb.codes) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn ema_fast_decay_snaps_to_batch_mean() {
        let mut cb = book(&[&[0.0, 0.0], &[5.0, 5.0]]);
        let v = [2.0, -3.0];
        let batch: Vec<(usize, &[f64])> = (0..8).map(|_| (1, &v[..])).collect();
        // Laplace smoothing shifts codes by ~eps/n; take eps to its limit too.
        cb.ema_update(&batch, 1e-12, 1e-12).unwrap();
        for (a, b) in cb.code(1).iter().zip(&v) {
            assert!((a - b).abs() < 1e-9, "{a} {b}");
        }
        assert_eq!(cb.usage_count(), &[0, 8]);
    }

    #[test]
    fn ema_rejects_invalid_decay() {
        let mut cb = book(&[&[0.0]]);
        assert!(cb.ema_update(&[], 0.0, 1e-5).is_err());
        assert!(cb.ema_update(&[], 1.0, 1e-5).is_err());
    }

    #[test]
    fn reseed_leaves_used_books_alone() {
        let mut cb = book(&[&[0.0], &[1.0]]);
        cb.usage_count = vec![3, 1];
        let before = cb.clone();
        let mut rng = SplitMix64::new(1);
        let r = cb.reseed_dead_codes(&[&[7.0]], 1, &mut rng).unwrap();
        assert!(r.is_empty());
        assert_eq!(cb, before);
    }

    #[test]
    fn reseed_replaces_unused_code() {
        let mut cb = book(&[&[0.0, 0.0], &[1.0, 1.0]]);
        cb.usage_count = vec![4, 0];
        let v = [7.0, -7.0];
        let mut rng = SplitMix64::new(1);
        let r = cb.reseed_dead_codes(&[&v, &v, &v], 1, &mut rng).unwrap();
        assert_eq!(r, vec![1]);
        assert_eq!(cb.code(1), &v);
        assert_eq!(cb.code(0), &[0.0, 0.0]);
        assert_eq!(cb.ema_cluster_size()[1], 1.0);
    }

    #[test]
    fn sampling_is_seeded_and_degenerate_for_k1() {
        let one = book(&[&[0.0]]);
        let mut rng = SplitMix64::new(5);
        assert!((0..100).all(|_| one.sample_code(&mut rng) == 0));
        let cb = book(&[&[0.0], &[1.0], &[2.0], &[3.0]]);
        let a: Vec<usize> = {
            let mut r = SplitMix64::new(77);
            (0..50).map(|_| cb.sample_code(&mut r)).collect()
        };
        let b: Vec<usize> = {
            let mut r = SplitMix64::new(77);
            (0..50).map(|_| cb.sample_code(&mut r)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn kmeans_pp_picks_distinct_clusters() {
        let pts: Vec<Vec<f64>> = (0..40).map(|i| if i < 20 { vec![0.0, 0.0] } else { vec![10.0, 10.0] }).collect();
        let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        let mut rng = SplitMix64::new(3);
        let seeds = kmeans_plus_plus_seed(&refs, 2, &mut rng).unwrap();
        assert_ne!(seeds[0], seeds[1]);
    }
}
