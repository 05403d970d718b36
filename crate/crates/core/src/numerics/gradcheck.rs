use super::{Mlp, MlpCache, MlpGrads, Tensor};
use crate::rng::SplitMix64;
use crate::Result;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Denominator floor for relative errors, so that gradients that are zero up
/// to rounding are compared absolutely.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

/// Pre-activations closer than this to a kink make a component uncheckable.
pub const KINK_MARGIN: f64 = 1e-7;

const OFFSET_ATTEMPTS: usize = 16;
const OFFSET_SCALE: f64 = 1e-2;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Flat parameter index of the worst component.
    pub worst_index: Option<usize>,
    pub checked: usize,
    pub skipped: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compare [`Mlp::backward`] against central differences of the scalar
/// loss `L = sum(output * R)` for a seeded random `R`.
pub fn finite_difference_check(mlp: &Mlp, input: &Tensor, tolerance: f64) -> Result<GradCheckReport> {
    finite_difference_check_with(mlp, input, tolerance, |m, cache, up| {
        Ok(m.backward(cache, up)?.1)
    })
}

/// Same as [`finite_difference_check`] with a caller-supplied analytic
/// gradient, used to verify the checker itself catches faulty backward passes.
pub fn finite_difference_check_with<G>(
    mlp: &Mlp,
    input: &Tensor,
    tolerance: f64,
    analytic: G,
) -> Result<GradCheckReport>
where
    G: Fn(&Mlp, &MlpCache, &Tensor) -> Result<MlpGrads>,
{
    let mut rng = SplitMix64::new(0x6772_6164);
    let kinked = mlp.spec().activation.has_kink();

    // Offset sampling: nudge the input away from activation kinks.
    let mut point = input.clone();
    if kinked {
        for _ in 0..OFFSET_ATTEMPTS {
            let (_, cache) = mlp.forward(&point)?;
            if min_abs_hidden_pre(mlp, &cache) > 100.0 * KINK_MARGIN {
                break;
            }
            point = input.clone();
            for v in point.data_mut() {
                *v += rng.uniform(-OFFSET_SCALE, OFFSET_SCALE);
            }
        }
    }

    let (out, cache) = mlp.forward(&point)?;
    let weights = Tensor::new(
        out.shape().to_vec(),
        (0..out.data().len()).map(|_| rng.uniform(-1.0, 1.0)).collect(),
    )?;
    let loss = |m: &Mlp| -> Result<f64> {
        let y = m.infer(&point)?;
        Ok(y.data().iter().zip(weights.data()).map(|(a, b)| a * b).sum())
    };
    let grads = analytic(mlp, &cache, &weights)?.flat();
    let base_pattern = if kinked { Some(pattern(mlp, &point)?) } else { None };

    let mut probe = mlp.clone();
    let mut max_rel: f64 = 0.0;
    let mut worst = None;
    let (mut checked, mut skipped) = (0, 0);
    let sizes: Vec<usize> = mlp.params().iter().map(|p| p.len()).collect();
    let mut flat = 0;
    for (t, &len) in sizes.iter().enumerate() {
        for k in 0..len {
            let orig = probe.params()[t][k];
            probe.params_mut()[t][k] = orig + FD_STEP;
            let plus = loss(&probe)?;
            let plus_pattern = base_pattern.as_ref().map(|_| pattern(&probe, &point)).transpose()?;
            probe.params_mut()[t][k] = orig - FD_STEP;
            let minus = loss(&probe)?;
            let minus_pattern = base_pattern.as_ref().map(|_| pattern(&probe, &point)).transpose()?;
            probe.params_mut()[t][k] = orig;

            if base_pattern.is_some() && (plus_pattern != base_pattern || minus_pattern != base_pattern) {
                skipped += 1;
            } else {
                let numeric = (plus - minus) / (2.0 * FD_STEP);
                let rel = relative_error(grads[flat], numeric);
                if rel > max_rel || worst.is_none() {
                    max_rel = max_rel.max(rel);
                    worst = Some(flat);
                }
                checked += 1;
            }
            flat += 1;
        }
    }
    Ok(GradCheckReport {
        max_rel_error: max_rel,
        worst_index: worst,
        checked,
        skipped,
        tolerance,
        passed: checked > 0 && max_rel <= tolerance,
    })
}

fn min_abs_hidden_pre(mlp: &Mlp, cache: &MlpCache) -> f64 {
    let hidden = mlp.spec().layer_widths.len() - 2;
    cache.pre_activations()[..hidden]
        .iter()
        .flat_map(|t| t.data().iter())
        .fold(f64::INFINITY, |m, v| m.min(v.abs()))
}

/// Which side of the kink every hidden pre-activation lies on, with values
/// inside the margin marked separately.
fn pattern(mlp: &Mlp, input: &Tensor) -> Result<Vec<i8>> {
    let (_, cache) = mlp.forward(input)?;
    let hidden = mlp.spec().layer_widths.len() - 2;
    Ok(cache.pre_activations()[..hidden]
        .iter()
        .flat_map(|t| t.data().iter())
        .map(|&v| {
            if v.abs() < KINK_MARGIN {
                0
            } else if v > 0.0 {
                1
            } else {
                -1
            }
        })
        .collect())
}
