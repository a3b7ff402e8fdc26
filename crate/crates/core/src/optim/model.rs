//! Built-in differentiable models.
//!
//! Both models end in a softmax layer trained with mean cross-entropy. The
//! MLP uses tanh hidden activations. Parameters are laid out layer by
//! layer: the weight matrix in row-major `[out][in]` order, then the bias
//! vector. All arithmetic runs in f64; parameters are stored as f32.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::ParamVector;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    SoftmaxRegression,
    Mlp { hidden: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Model {
    kind: ModelKind,
    n_features: usize,
    n_classes: usize,
}

#[derive(Debug, Clone, Copy)]
struct Layer {
    fan_in: usize,
    fan_out: usize,
    offset: usize,
}

impl Layer {
    fn weights(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.fan_in * self.fan_out
    }

    fn biases(&self) -> std::ops::Range<usize> {
        let start = self.offset + self.fan_in * self.fan_out;
        start..start + self.fan_out
    }

    fn len(&self) -> usize {
        (self.fan_in + 1) * self.fan_out
    }
}

impl Model {
    pub fn softmax(n_features: usize, n_classes: usize) -> Result<Self> {
        Self::new(ModelKind::SoftmaxRegression, n_features, n_classes)
    }

    pub fn mlp(n_features: usize, hidden: Vec<usize>, n_classes: usize) -> Result<Self> {
        Self::new(ModelKind::Mlp { hidden }, n_features, n_classes)
    }

    pub fn new(kind: ModelKind, n_features: usize, n_classes: usize) -> Result<Self> {
        if n_features == 0 {
            return Err(invalid("model needs at least one feature"));
        }
        if n_classes < 2 {
            return Err(invalid("model needs at least two classes"));
        }
        if let ModelKind::Mlp { hidden } = &kind {
            if hidden.is_empty() || hidden.contains(&0) {
                return Err(invalid(
                    "mlp hidden sizes must be a nonempty list of positive sizes",
                ));
            }
        }
        Ok(Self {
            kind,
            n_features,
            n_classes,
        })
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn layers(&self) -> Vec<Layer> {
        let mut sizes = vec![self.n_features];
        if let ModelKind::Mlp { hidden } = &self.kind {
            sizes.extend_from_slice(hidden);
        }
        sizes.push(self.n_classes);
        let mut offset = 0;
        sizes
            .windows(2)
            .map(|w| {
                let layer = Layer {
                    fan_in: w[0],
                    fan_out: w[1],
                    offset,
                };
                offset += layer.len();
                layer
            })
            .collect()
    }

    pub fn param_dim(&self) -> usize {
        self.layers().iter().map(Layer::len).sum()
    }

    /// Seeded initialization: weights uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`,
    /// biases zero.
    pub fn init(&self, seed: u64) -> ParamVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = vec![0.0f32; self.param_dim()];
        for layer in self.layers() {
            let bound = 1.0 / (layer.fan_in as f64).sqrt();
            for v in &mut values[layer.weights()] {
                *v = rng.gen_range(-bound..=bound) as f32;
            }
        }
        ParamVector::from_vec_unchecked(values)
    }

    /// Stable 64-bit identifier of the model configuration (FNV-1a over the
    /// textual form).
    pub fn fingerprint(&self) -> u64 {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        self.to_string()
            .bytes()
            .fold(OFFSET, |h, b| (h ^ b as u64).wrapping_mul(PRIME))
    }

    fn check_params(&self, x: &ParamVector) -> Result<()> {
        x.ensure_dim(self.param_dim())
    }

    fn check_batch(&self, batch: &Minibatch) -> Result<()> {
        if batch.n_features != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: batch.n_features,
            });
        }
        if let Some(&label) = batch.labels.iter().find(|&&l| l as usize >= self.n_classes) {
            return Err(Error::LabelOutOfRange {
                label,
                n_classes: self.n_classes,
            });
        }
        Ok(())
    }

    /// Mean cross-entropy over the batch and its gradient.
    pub fn loss_and_grad(&self, x: &ParamVector, batch: &Minibatch) -> Result<(f64, ParamVector)> {
        self.check_params(x)?;
        self.check_batch(batch)?;
        let params: Vec<f64> = x.as_slice().iter().map(|&v| v as f64).collect();
        let mut grad = vec![0.0f64; params.len()];
        let loss = self.evaluate(&params, batch, Some(&mut grad));
        let grad: Vec<f32> = grad.into_iter().map(|g| g as f32).collect();
        let grad = ParamVector::new(grad)?;
        Ok((loss, grad))
    }

    pub fn loss(&self, x: &ParamVector, batch: &Minibatch) -> Result<f64> {
        self.check_params(x)?;
        self.check_batch(batch)?;
        let params: Vec<f64> = x.as_slice().iter().map(|&v| v as f64).collect();
        Ok(self.evaluate(&params, batch, None))
    }

    /// f64 loss (and optionally gradient) for already validated inputs.
    pub(crate) fn evaluate(
        &self,
        params: &[f64],
        batch: &Minibatch,
        mut grad: Option<&mut [f64]>,
    ) -> f64 {
        let layers = self.layers();
        let n = batch.len();
        let mut total = 0.0f64;
        // activations[0] is the input, activations[l + 1] the output of layer l.
        let mut activations: Vec<Vec<f64>> = layers
            .iter()
            .map(|l| vec![0.0; l.fan_in])
            .chain(std::iter::once(vec![0.0; self.n_classes]))
            .collect();
        let mut delta = Vec::new();
        let mut delta_prev = Vec::new();
        for (row, &label) in batch.rows().zip(&batch.labels) {
            for (a, &f) in activations[0].iter_mut().zip(row) {
                *a = f as f64;
            }
            for (l, layer) in layers.iter().enumerate() {
                let (inputs, outputs) = activations.split_at_mut(l + 1);
                let input = &inputs[l];
                let output = &mut outputs[0];
                let w = &params[layer.weights()];
                let b = &params[layer.biases()];
                for (o, out) in output.iter_mut().enumerate() {
                    let wrow = &w[o * layer.fan_in..(o + 1) * layer.fan_in];
                    let z = b[o] + wrow.iter().zip(input).map(|(wi, ai)| wi * ai).sum::<f64>();
                    *out = if l + 1 < layers.len() { z.tanh() } else { z };
                }
            }
            let logits = activations.last_mut().expect("output layer");
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum_exp: f64 = logits.iter().map(|z| (z - max).exp()).sum();
            let log_norm = max + sum_exp.ln();
            total += log_norm - logits[label as usize];

            let Some(grad) = grad.as_deref_mut() else {
                continue;
            };
            // logits become softmax - onehot
            delta.clear();
            delta.extend(logits.iter().map(|z| (z - log_norm).exp()));
            delta[label as usize] -= 1.0;
            for (l, layer) in layers.iter().enumerate().rev() {
                let input = &activations[l];
                {
                    let gw = &mut grad[layer.weights()];
                    for (o, &d) in delta.iter().enumerate() {
                        let grow = &mut gw[o * layer.fan_in..(o + 1) * layer.fan_in];
                        for (g, a) in grow.iter_mut().zip(input) {
                            *g += d * a;
                        }
                    }
                }
                for (g, &d) in grad[layer.biases()].iter_mut().zip(&delta) {
                    *g += d;
                }
                if l == 0 {
                    break;
                }
                let w = &params[layer.weights()];
                delta_prev.clear();
                delta_prev.resize(layer.fan_in, 0.0);
                for (o, &d) in delta.iter().enumerate() {
                    let wrow = &w[o * layer.fan_in..(o + 1) * layer.fan_in];
                    for (dp, wi) in delta_prev.iter_mut().zip(wrow) {
                        *dp += wi * d;
                    }
                }
                // tanh'(z) = 1 - tanh(z)^2
                for (dp, a) in delta_prev.iter_mut().zip(input) {
                    *dp *= 1.0 - a * a;
                }
                std::mem::swap(&mut delta, &mut delta_prev);
            }
        }
        let scale = 1.0 / n as f64;
        if let Some(grad) = grad {
            grad.iter_mut().for_each(|g| *g *= scale);
        }
        total * scale
    }

    /// Index of the largest logit for one feature row.
    pub fn predict(&self, x: &ParamVector, row: &[f32]) -> Result<usize> {
        self.check_params(x)?;
        if row.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: row.len(),
            });
        }
        Ok(self.predict_unchecked(x.as_slice(), row))
    }

    fn predict_unchecked(&self, params: &[f32], row: &[f32]) -> usize {
        let mut input: Vec<f64> = row.iter().map(|&v| v as f64).collect();
        let layers = self.layers();
        for (l, layer) in layers.iter().enumerate() {
            let w = &params[layer.weights()];
            let b = &params[layer.biases()];
            input = (0..layer.fan_out)
                .map(|o| {
                    let wrow = &w[o * layer.fan_in..(o + 1) * layer.fan_in];
                    let z = b[o] as f64
                        + wrow
                            .iter()
                            .zip(&input)
                            .map(|(&wi, ai)| wi as f64 * ai)
                            .sum::<f64>();
                    if l + 1 < layers.len() {
                        z.tanh()
                    } else {
                        z
                    }
                })
                .collect();
        }
        // first maximum wins ties
        input
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &z)| {
                if z > best.1 {
                    (i, z)
                } else {
                    best
                }
            })
            .0
    }

    /// Fraction of rows whose predicted class equals the label.
    pub fn accuracy(&self, x: &ParamVector, features: &[f32], labels: &[u32]) -> Result<f64> {
        self.check_params(x)?;
        if labels.is_empty() || features.len() != labels.len() * self.n_features {
            return Err(invalid("feature matrix does not match label count"));
        }
        let correct = features
            .chunks_exact(self.n_features)
            .zip(labels)
            .filter(|(row, &label)| self.predict_unchecked(x.as_slice(), row) == label as usize)
            .count();
        Ok(correct as f64 / labels.len() as f64)
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ModelKind::SoftmaxRegression => {
                write!(f, "softmax:{}:{}", self.n_features, self.n_classes)
            }
            ModelKind::Mlp { hidden } => {
                let hidden = hidden
                    .iter()
                    .map(|h| h.to_string())
                    .collect::<Vec<_>>()
                    .join(",");
                write!(f, "mlp:{}:{}:{}", self.n_features, hidden, self.n_classes)
            }
        }
    }
}

impl FromStr for Model {
    type Err = Error;

    /// `softmax:<features>:<classes>` or `mlp:<features>:<hidden,...>:<classes>`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| invalid(format!("bad number {p:?} in model spec {s:?}")))
        };
        match parts.as_slice() {
            ["softmax", f, k] => Model::softmax(num(f)?, num(k)?),
            ["mlp", f, hidden, k] => {
                let hidden = hidden.split(',').map(num).collect::<Result<Vec<_>>>()?;
                Model::mlp(num(f)?, hidden, num(k)?)
            }
            _ => Err(invalid(format!(
                "model spec {s:?} is not softmax:<features>:<classes> or mlp:<features>:<hidden,...>:<classes>"
            ))),
        }
    }
}

/// A batch of samples drawn from one shard.
#[derive(Debug, Clone, PartialEq)]
pub struct Minibatch {
    features: Vec<f32>,
    labels: Vec<u32>,
    n_features: usize,
}

impl Minibatch {
    pub fn new(features: Vec<f32>, labels: Vec<u32>, n_features: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(invalid("minibatch must be nonempty"));
        }
        if n_features == 0 || features.len() != labels.len() * n_features {
            return Err(invalid(format!(
                "minibatch has {} feature values for {} labels of width {n_features}",
                features.len(),
                labels.len()
            )));
        }
        Ok(Self {
            features,
            labels,
            n_features,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn features(&self) -> &[f32] {
        &self.features
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.features.chunks_exact(self.n_features)
    }
}
