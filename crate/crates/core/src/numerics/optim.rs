use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    /// `v = momentum * v + g; p -= lr * v`. `momentum = 0` is plain SGD.
    Sgd { momentum: f64 },
    /// Adam with bias correction.
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl OptimizerKind {
    pub fn sgd() -> Self {
        OptimizerKind::Sgd { momentum: 0.0 }
    }

    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Optimizer hyperparameters plus one accumulator per parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub step: u64,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
}

impl OptimizerState {
    /// `sizes` gives the length of every parameter tensor, in update order.
    pub fn new(kind: OptimizerKind, learning_rate: f64, sizes: &[usize]) -> Self {
        let zeros = || sizes.iter().map(|&n| vec![0.0; n]).collect::<Vec<_>>();
        let second_moment = match kind {
            OptimizerKind::Adam { .. } => zeros(),
            OptimizerKind::Sgd { .. } => Vec::new(),
        };
        Self {
            kind,
            learning_rate,
            step: 0,
            first_moment: zeros(),
            second_moment,
        }
    }

    /// Apply one update in place. Parameters are untouched if any gradient
    /// component is non-finite.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.first_moment.len() {
            return Err(Error::ShapeMismatch(format!(
                "optimizer tracks {} tensors, got {} params / {} grads",
                self.first_moment.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != g.len() || p.len() != self.first_moment[i].len() {
                return Err(Error::ShapeMismatch(format!("tensor {i}: parameter/gradient length mismatch")));
            }
            if let Some(k) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("gradient tensor {i} component {k}")));
            }
        }
        self.step += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd { momentum } => {
                for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut self.first_moment) {
                    for ((p, g), v) in p.iter_mut().zip(g.iter()).zip(v.iter_mut()) {
                        *v = momentum * *v + g;
                        *p -= lr * *v;
                    }
                }
            }
            OptimizerKind::Adam {
                beta1,
                beta2,
                epsilon,
            } => {
                let t = self.step as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(&mut self.first_moment)
                    .zip(&mut self.second_moment)
                {
                    for (((p, g), m), v) in p.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        let mh = *m / c1;
                        let vh = *v / c2;
                        *p -= lr * mh / (vh.sqrt() + epsilon);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_learning_rate_keeps_params() {
        for kind in [OptimizerKind::sgd(), OptimizerKind::adam()] {
            let mut opt = OptimizerState::new(kind, 0.0, &[3]);
            let mut p = vec![1.0, 2.0, 3.0];
            opt.step(&mut [&mut p], &[&[5.0, -1.0, 0.5]]).unwrap();
            assert_eq!(p, [1.0, 2.0, 3.0]);
        }
    }

    #[test]
    fn plain_sgd_step() {
        let mut opt = OptimizerState::new(OptimizerKind::sgd(), 0.1, &[2]);
        let mut p = vec![1.0, -1.0];
        opt.step(&mut [&mut p], &[&[2.0, 0.5]]).unwrap();
        assert_eq!(p, [1.0 - 0.1 * 2.0, -1.0 - 0.1 * 0.5]);
    }

    #[test]
    fn non_finite_gradient_rejected_without_update() {
        let mut opt = OptimizerState::new(OptimizerKind::adam(), 0.1, &[2]);
        let mut p = vec![1.0, -1.0];
        let r = opt.step(&mut [&mut p], &[&[f64::NAN, 0.5]]);
        assert!(matches!(r, Err(Error::NonFinite(_))));
        assert_eq!(p, [1.0, -1.0]);
        assert_eq!(opt.step, 0);
    }

    /// f(p) = sum_i a_i (p_i - c_i)^2 has its minimum 0 at p = c.
    fn quadratic_run(kind: OptimizerKind, lr: f64, steps: usize) -> f64 {
        let a = [1.0, 3.0, 0.5];
        let c = [2.0, -1.0, 0.25];
        let mut p = vec![0.0; 3];
        let mut opt = OptimizerState::new(kind, lr, &[3]);
        for _ in 0..steps {
            let g: Vec<f64> = (0..3).map(|i| 2.0 * a[i] * (p[i] - c[i])).collect();
            opt.step(&mut [&mut p], &[&g]).unwrap();
        }
        (0..3).map(|i| a[i] * (p[i] - c[i]).powi(2)).sum()
    }

    #[test]
    fn converges_on_convex_quadratic() {
        assert!(quadratic_run(OptimizerKind::sgd(), 0.1, 100) < 1e-6);
        assert!(quadratic_run(OptimizerKind::Sgd { momentum: 0.5 }, 0.05, 100) < 1e-6);
    }

    #[test]
    fn updates_are_deterministic() {
        let a = quadratic_run(OptimizerKind::adam(), 0.05, 100);
        let b = quadratic_run(OptimizerKind::adam(), 0.05, 100);
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
