use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::tensor::{matmul_a_b, matmul_a_bt, matmul_at_b, Tensor};
use crate::rng::SplitMix64;
use crate::{Error, Result};

pub const LEAKY_SLOPE: f64 = 0.2;

static NEXT_REVISION: AtomicU64 = AtomicU64::new(1);

fn fresh_revision() -> u64 {
    NEXT_REVISION.fetch_add(1, Ordering::Relaxed)
}

/// Hidden-layer nonlinearity. The output layer is always linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// Leaky ReLU with slope [`LEAKY_SLOPE`] for negative inputs.
    LeakyRelu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_SLOPE * z
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative given the pre-activation `z` and the activation `a`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }

    /// Whether this activation has a non-differentiable point at zero.
    pub fn has_kink(self) -> bool {
        matches!(self, Activation::LeakyRelu)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    /// Input width, hidden widths, output width.
    pub layer_widths: Vec<usize>,
    pub activation: Activation,
}

impl MlpSpec {
    pub fn new(layer_widths: Vec<usize>, activation: Activation) -> Result<Self> {
        let spec = Self {
            layer_widths,
            activation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 2 {
            return Err(Error::ShapeMismatch("an MLP needs at least input and output widths".into()));
        }
        if self.layer_widths.contains(&0) {
            return Err(Error::ShapeMismatch(format!("zero width in {:?}", self.layer_widths)));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_widths.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.layer_widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Dense {
    inputs: usize,
    outputs: usize,
    /// `outputs × inputs`, row-major.
    weight: Vec<f64>,
    bias: Vec<f64>,
}

/// A multilayer perceptron together with its parameters.
#[derive(Debug, Clone)]
pub struct Mlp {
    spec: MlpSpec,
    layers: Vec<Dense>,
    revision: u64,
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec && self.layers == other.layers
    }
}

/// Values saved by [`Mlp::forward`] for the matching backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    revision: u64,
    input: Tensor,
    /// Pre-activation of every layer.
    pre: Vec<Tensor>,
    /// Post-activation of every hidden layer.
    post: Vec<Tensor>,
}

impl MlpCache {
    pub fn pre_activations(&self) -> &[Tensor] {
        &self.pre
    }
}

/// Parameter gradients, laid out like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpGrads {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            weights: mlp.layers.iter().map(|l| vec![0.0; l.weight.len()]).collect(),
            biases: mlp.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    /// Gradient slices in parameter order: `w0, b0, w1, b1, ...`.
    pub fn slices(&self) -> Vec<&[f64]> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
            .collect()
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w.as_mut_slice(), b.as_mut_slice()])
            .collect()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.slices().concat()
    }
}

impl Mlp {
    /// Uniform Glorot initialization in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn new(spec: MlpSpec, rng: &mut SplitMix64) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .layer_widths
            .windows(2)
            .map(|w| {
                let (inputs, outputs) = (w[0], w[1]);
                let limit = (6.0 / (inputs + outputs) as f64).sqrt();
                Dense {
                    inputs,
                    outputs,
                    weight: (0..inputs * outputs).map(|_| rng.uniform(-limit, limit)).collect(),
                    bias: vec![0.0; outputs],
                }
            })
            .collect();
        Ok(Self {
            spec,
            layers,
            revision: fresh_revision(),
        })
    }

    /// Build from explicit `(weight, bias)` pairs, weight `out×in` row-major.
    pub fn from_params(spec: MlpSpec, params: Vec<(Vec<f64>, Vec<f64>)>) -> Result<Self> {
        spec.validate()?;
        if params.len() != spec.layer_widths.len() - 1 {
            return Err(Error::ShapeMismatch("layer count does not match spec".into()));
        }
        let layers = spec
            .layer_widths
            .windows(2)
            .zip(params)
            .map(|(w, (weight, bias))| {
                if weight.len() != w[0] * w[1] || bias.len() != w[1] {
                    return Err(Error::ShapeMismatch(format!(
                        "layer {}x{} given {} weights / {} biases",
                        w[1],
                        w[0],
                        weight.len(),
                        bias.len()
                    )));
                }
                Ok(Dense {
                    inputs: w[0],
                    outputs: w[1],
                    weight,
                    bias,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            spec,
            layers,
            revision: fresh_revision(),
        })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn param_count(&self) -> usize {
        self.spec.param_count()
    }

    /// Parameter slices in order `w0, b0, w1, b1, ...`.
    pub fn params(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    /// Mutable parameter slices. Invalidates outstanding caches.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.revision = fresh_revision();
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        if input.shape().len() != 2 || input.cols() != self.spec.input_width() {
            return Err(Error::ShapeMismatch(format!(
                "MLP expects [batch, {}], got {:?}",
                self.spec.input_width(),
                input.shape()
            )));
        }
        Ok(())
    }

    /// Forward pass that keeps what the backward pass needs.
    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, MlpCache)> {
        self.check_input(input)?;
        let batch = input.rows();
        let last = self.layers.len() - 1;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Tensor> = Vec::with_capacity(last);
        for (i, layer) in self.layers.iter().enumerate() {
            let x = if i == 0 { input } else { &post[i - 1] };
            let z = layer.affine(x.data(), batch);
            if i < last {
                let a: Vec<f64> = z.iter().map(|&v| self.spec.activation.apply(v)).collect();
                post.push(Tensor::new(vec![batch, layer.outputs], a)?);
            }
            pre.push(Tensor::new(vec![batch, layer.outputs], z)?);
        }
        let output = pre[last].clone();
        Ok((
            output,
            MlpCache {
                revision: self.revision,
                input: input.clone(),
                pre,
                post,
            },
        ))
    }

    /// Forward pass without a cache.
    pub fn infer(&self, input: &Tensor) -> Result<Tensor> {
        self.check_input(input)?;
        let batch = input.rows();
        let last = self.layers.len() - 1;
        let mut x = input.data().to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.affine(&x, batch);
            if i < last {
                for v in &mut z {
                    *v = self.spec.activation.apply(*v);
                }
            }
            x = z;
        }
        Tensor::new(vec![batch, self.spec.output_width()], x)
    }

    /// Exact reverse-mode gradients for `upstream = dL/d(output)`.
    pub fn backward(&self, cache: &MlpCache, upstream: &Tensor) -> Result<(Tensor, MlpGrads)> {
        let (input_grad, grads) = self.backward_impl(cache, upstream, true)?;
        Ok((input_grad.expect("requested"), grads))
    }

    /// Like [`Mlp::backward`] but skips the gradient with respect to the input.
    pub fn backward_params(&self, cache: &MlpCache, upstream: &Tensor) -> Result<MlpGrads> {
        Ok(self.backward_impl(cache, upstream, false)?.1)
    }

    fn backward_impl(
        &self,
        cache: &MlpCache,
        upstream: &Tensor,
        want_input_grad: bool,
    ) -> Result<(Option<Tensor>, MlpGrads)> {
        if cache.revision != self.revision {
            return Err(Error::StaleCache(
                "cache was produced by different or since-modified parameters".into(),
            ));
        }
        let batch = cache.input.rows();
        if upstream.shape() != [batch, self.spec.output_width()] {
            return Err(Error::ShapeMismatch(format!(
                "upstream gradient {:?} != [{batch}, {}]",
                upstream.shape(),
                self.spec.output_width()
            )));
        }
        let mut grads = MlpGrads::zeros_like(self);
        let mut delta = upstream.data().to_vec();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            if i + 1 < self.layers.len() {
                let z = cache.pre[i].data();
                let a = cache.post[i].data();
                for ((d, &zv), &av) in delta.iter_mut().zip(z).zip(a) {
                    *d *= self.spec.activation.derivative(zv, av);
                }
            }
            let x = if i == 0 {
                cache.input.data()
            } else {
                cache.post[i - 1].data()
            };
            matmul_at_b(&delta, x, &mut grads.weights[i], batch, layer.outputs, layer.inputs);
            let gb = &mut grads.biases[i];
            for row in delta.chunks_exact(layer.outputs) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            if i > 0 || want_input_grad {
                let mut next = vec![0.0; batch * layer.inputs];
                matmul_a_b(&delta, &layer.weight, &mut next, batch, layer.outputs, layer.inputs);
                delta = next;
            }
        }
        let input_grad = if want_input_grad {
            Some(Tensor::new(vec![batch, self.spec.input_width()], delta)?)
        } else {
            None
        };
        Ok((input_grad, grads))
    }
}

impl Dense {
    fn affine(&self, x: &[f64], batch: usize) -> Vec<f64> {
        let mut z = Vec::with_capacity(batch * self.outputs);
        for _ in 0..batch {
            z.extend_from_slice(&self.bias);
        }
        matmul_a_bt(x, &self.weight, &mut z, batch, self.inputs, self.outputs, true);
        z
    }
}
