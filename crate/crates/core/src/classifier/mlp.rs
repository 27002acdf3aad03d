use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::loss::{bce_grad, bce_with_logits};
use super::{param_count, ClassifierError, MlpConfig, Real};
use crate::rng;

/// Offsets of one layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weight_offset: usize,
    pub bias_offset: usize,
}

impl LayerShape {
    fn end(&self) -> usize {
        self.bias_offset + self.fan_out
    }
}

fn shapes(config: &MlpConfig) -> Vec<LayerShape> {
    let mut offset = 0;
    config
        .layer_dims()
        .into_iter()
        .map(|(fan_in, fan_out)| {
            let shape = LayerShape {
                fan_in,
                fan_out,
                weight_offset: offset,
                bias_offset: offset + fan_in * fan_out,
            };
            offset = shape.end();
            shape
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    /// Provider name written into score records.
    pub name: String,
    pub activation: String,
    pub init: String,
    #[serde(default)]
    pub training: Option<super::TrainingDescriptor>,
}

impl Default for ModelMetadata {
    fn default() -> Self {
        Self {
            name: "mutox".into(),
            activation: "relu".into(),
            init: "he_uniform/splitmix64".into(),
            training: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel<F = f32> {
    config: MlpConfig,
    layers: Vec<LayerShape>,
    params: Vec<F>,
    pub metadata: ModelMetadata,
}

/// Gradient with the same flat layout as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient<F>(pub Vec<F>);

impl<F: Real> MlpModel<F> {
    /// He-uniform weights `U(-sqrt(6/fan_in), sqrt(6/fan_in))`, zero biases.
    ///
    /// Draws come from SplitMix64 seeded with `config.seed`, one per weight in
    /// flat-layout order: `u = (next_u64 >> 11) * 2^-53`, `w = (2u - 1) * limit`.
    pub fn init(config: MlpConfig) -> Result<Self, ClassifierError> {
        let n = param_count(&config)?;
        let layers = shapes(&config);
        let mut params = vec![F::zero(); n];
        let mut rng = rng::seeded(config.seed);
        for l in &layers {
            let limit = (6.0 / l.fan_in as f64).sqrt();
            for w in &mut params[l.weight_offset..l.bias_offset] {
                let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
                *w = F::lit((2.0 * u - 1.0) * limit);
            }
        }
        Ok(Self {
            config,
            layers,
            params,
            metadata: ModelMetadata::default(),
        })
    }

    pub fn zeros(config: MlpConfig) -> Result<Self, ClassifierError> {
        let n = param_count(&config)?;
        Self::from_params(config, vec![F::zero(); n])
    }

    pub fn from_params(config: MlpConfig, params: Vec<F>) -> Result<Self, ClassifierError> {
        let expected = param_count(&config)?;
        if params.len() != expected {
            return Err(ClassifierError::ParamCount {
                expected,
                found: params.len(),
            });
        }
        Ok(Self {
            layers: shapes(&config),
            config,
            params,
            metadata: ModelMetadata::default(),
        })
    }

    pub fn with_metadata(mut self, metadata: ModelMetadata) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn params(&self) -> &[F] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [F] {
        &mut self.params
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    /// Weights of layer `l`, row-major `[fan_out x fan_in]`.
    pub fn weights(&self, l: usize) -> &[F] {
        let s = &self.layers[l];
        &self.params[s.weight_offset..s.bias_offset]
    }

    pub fn bias(&self, l: usize) -> &[F] {
        let s = &self.layers[l];
        &self.params[s.bias_offset..s.end()]
    }

    pub fn cast<G: Real>(&self) -> MlpModel<G> {
        MlpModel {
            config: self.config.clone(),
            layers: self.layers.clone(),
            params: self
                .params
                .iter()
                .map(|p| G::from_f64(p.to_f64().expect("finite")).expect("finite"))
                .collect(),
            metadata: self.metadata.clone(),
        }
    }

    fn check_input(&self, x: &[F], id: Option<&str>) -> Result<(), ClassifierError> {
        if x.len() != self.config.input_dim {
            return Err(ClassifierError::DimensionMismatch {
                expected: self.config.input_dim,
                found: x.len(),
                id: id.map(str::to_string),
            });
        }
        if let Some(index) = x.iter().position(|v| !v.is_finite()) {
            return Err(ClassifierError::NonFiniteInput { index });
        }
        Ok(())
    }

    /// Output logit for one input vector.
    pub fn forward_logit(&self, x: &[F]) -> Result<F, ClassifierError> {
        self.check_input(x, None)?;
        Ok(self.logit_unchecked(x))
    }

    pub(crate) fn forward_checked(&self, x: &[F], id: &str) -> Result<F, ClassifierError> {
        self.check_input(x, Some(id))?;
        Ok(self.logit_unchecked(x))
    }

    fn logit_unchecked(&self, x: &[F]) -> F {
        let mut current = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (l, shape) in self.layers.iter().enumerate() {
            affine(&self.params, shape, &current, &mut next);
            if l < last {
                relu_in_place(&mut next);
            }
            std::mem::swap(&mut current, &mut next);
        }
        current[0]
    }

    /// Mean loss over the batch and its gradient with respect to every parameter.
    pub fn loss_and_grad(
        &self,
        inputs: &[&[F]],
        labels: &[bool],
        positive_weight: F,
    ) -> Result<(F, Gradient<F>), ClassifierError> {
        self.check_batch(inputs, labels)?;
        let mut grad = vec![F::zero(); self.params.len()];
        let mut scratch = Scratch::new(&self.layers);
        let loss = self.accumulate(inputs, labels, positive_weight, &mut grad, &mut scratch);
        Ok((loss, Gradient(grad)))
    }

    /// Mean loss without gradients.
    pub fn loss(&self, inputs: &[&[F]], labels: &[bool], positive_weight: F) -> Result<F, ClassifierError> {
        self.check_batch(inputs, labels)?;
        let n = F::from_usize(inputs.len()).expect("batch size");
        let total = inputs
            .iter()
            .zip(labels)
            .fold(F::zero(), |acc, (x, &y)| acc + bce_with_logits(self.logit_unchecked(x), y, positive_weight));
        Ok(total / n)
    }

    fn check_batch(&self, inputs: &[&[F]], labels: &[bool]) -> Result<(), ClassifierError> {
        if inputs.is_empty() {
            return Err(ClassifierError::EmptyBatch);
        }
        if inputs.len() != labels.len() {
            return Err(ClassifierError::BatchLength {
                inputs: inputs.len(),
                labels: labels.len(),
            });
        }
        for x in inputs {
            self.check_input(x, None)?;
        }
        Ok(())
    }

    /// Overwrites `grad` with the mean-loss gradient and returns the mean loss.
    pub(crate) fn accumulate(
        &self,
        inputs: &[&[F]],
        labels: &[bool],
        positive_weight: F,
        grad: &mut [F],
        scratch: &mut Scratch<F>,
    ) -> F {
        grad.iter_mut().for_each(|g| *g = F::zero());
        let n = F::from_usize(inputs.len()).expect("batch size");
        let inv_n = F::one() / n;
        let last = self.layers.len() - 1;
        let mut total = F::zero();

        for (x, &y) in inputs.iter().zip(labels) {
            // Forward, keeping post-activation outputs of every layer.
            scratch.acts[0].clear();
            scratch.acts[0].extend_from_slice(x);
            for (l, shape) in self.layers.iter().enumerate() {
                let (before, after) = scratch.acts.split_at_mut(l + 1);
                affine(&self.params, shape, &before[l], &mut after[0]);
                if l < last {
                    relu_in_place(&mut after[0]);
                }
            }
            let logit = scratch.acts[last + 1][0];
            total = total + bce_with_logits(logit, y, positive_weight);

            // Backward.
            scratch.delta.clear();
            scratch.delta.push(bce_grad(logit, y, positive_weight) * inv_n);
            for l in (0..=last).rev() {
                let shape = &self.layers[l];
                let input = &scratch.acts[l];
                for (o, &d) in scratch.delta.iter().enumerate() {
                    if d == F::zero() {
                        continue;
                    }
                    let row = shape.weight_offset + o * shape.fan_in;
                    for (g, &a) in grad[row..row + shape.fan_in].iter_mut().zip(input) {
                        *g = *g + d * a;
                    }
                    grad[shape.bias_offset + o] = grad[shape.bias_offset + o] + d;
                }
                if l == 0 {
                    break;
                }
                scratch.prev_delta.clear();
                scratch.prev_delta.resize(shape.fan_in, F::zero());
                for (o, &d) in scratch.delta.iter().enumerate() {
                    if d == F::zero() {
                        continue;
                    }
                    let row = shape.weight_offset + o * shape.fan_in;
                    for (p, &w) in scratch.prev_delta.iter_mut().zip(&self.params[row..row + shape.fan_in]) {
                        *p = *p + d * w;
                    }
                }
                // ReLU derivative: zero where the layer output was clamped.
                for (p, &a) in scratch.prev_delta.iter_mut().zip(&scratch.acts[l]) {
                    if a <= F::zero() {
                        *p = F::zero();
                    }
                }
                std::mem::swap(&mut scratch.delta, &mut scratch.prev_delta);
            }
        }
        total * inv_n
    }
}

pub(crate) struct Scratch<F> {
    acts: Vec<Vec<F>>,
    delta: Vec<F>,
    prev_delta: Vec<F>,
}

impl<F: Real> Scratch<F> {
    pub(crate) fn new(layers: &[LayerShape]) -> Self {
        let mut acts = Vec::with_capacity(layers.len() + 1);
        acts.push(Vec::with_capacity(layers[0].fan_in));
        for l in layers {
            acts.push(Vec::with_capacity(l.fan_out));
        }
        Self {
            acts,
            delta: Vec::new(),
            prev_delta: Vec::new(),
        }
    }
}

fn affine<F: Real>(params: &[F], shape: &LayerShape, input: &[F], out: &mut Vec<F>) {
    out.clear();
    let weights = &params[shape.weight_offset..shape.bias_offset];
    let bias = &params[shape.bias_offset..shape.bias_offset + shape.fan_out];
    for (row, &b) in weights.chunks_exact(shape.fan_in).zip(bias) {
        let dot = row.iter().zip(input).fold(F::zero(), |acc, (&w, &x)| acc + w * x);
        out.push(dot + b);
    }
}

fn relu_in_place<F: Real>(v: &mut [F]) {
    for x in v {
        if *x < F::zero() {
            *x = F::zero();
        }
    }
}
