//! Dense multilayer perceptron with ReLU hidden units and a softmax
//! cross-entropy head, in double precision.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What kind of layer a parameter block belongs to. Only fully connected
/// layers exist today; sparsification consults the tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerRole {
    FullyConnected,
    Other,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    inputs: usize,
    outputs: usize,
    /// Row-major `[outputs x inputs]`.
    weights: Vec<f64>,
    bias: Vec<f64>,
    role: LayerRole,
    prunable: bool,
}

impl Layer {
    pub fn new(
        inputs: usize,
        outputs: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        role: LayerRole,
    ) -> Result<Self> {
        if weights.len() != inputs * outputs || bias.len() != outputs {
            return Err(Error::Config(format!(
                "layer {inputs}->{outputs} expects {} weights and {outputs} biases, got {} and {}",
                inputs * outputs,
                weights.len(),
                bias.len()
            )));
        }
        Ok(Self {
            inputs,
            outputs,
            weights,
            bias,
            prunable: role == LayerRole::FullyConnected,
            role,
        })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn role(&self) -> LayerRole {
        self.role
    }

    /// Whether magnitude pruning applies to this layer.
    pub fn prunable(&self) -> bool {
        self.prunable
    }

    pub fn set_prunable(&mut self, prunable: bool) {
        self.prunable = prunable;
    }

    pub fn len(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Weights followed by biases.
    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(self.bias.iter())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.bias.iter_mut())
    }
}

/// Parameters of an MLP together with the layer widths that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    architecture: Vec<usize>,
    layers: Vec<Layer>,
}

impl ModelWeights {
    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn glorot<R: Rng + ?Sized>(architecture: &[usize], rng: &mut R) -> Result<Self> {
        check_architecture(architecture)?;
        let layers = architecture
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weights = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-limit..=limit))
                    .collect();
                Layer::new(
                    fan_in,
                    fan_out,
                    weights,
                    vec![0.0; fan_out],
                    LayerRole::FullyConnected,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            architecture: architecture.to_vec(),
            layers,
        })
    }

    pub fn zeros(architecture: &[usize]) -> Result<Self> {
        check_architecture(architecture)?;
        let layers = architecture
            .windows(2)
            .map(|w| {
                Layer::new(
                    w[0],
                    w[1],
                    vec![0.0; w[0] * w[1]],
                    vec![0.0; w[1]],
                    LayerRole::FullyConnected,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            architecture: architecture.to_vec(),
            layers,
        })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("a model needs at least one layer".into()));
        }
        let mut architecture = vec![layers[0].inputs];
        for layer in &layers {
            if layer.inputs != *architecture.last().unwrap() {
                return Err(Error::Config(format!(
                    "layer input width {} does not match previous output width {}",
                    layer.inputs,
                    architecture.last().unwrap()
                )));
            }
            architecture.push(layer.outputs);
        }
        check_architecture(&architecture)?;
        Ok(Self {
            architecture,
            layers,
        })
    }

    pub fn architecture(&self) -> &[usize] {
        &self.architecture
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.architecture[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.architecture.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Layer::len).sum()
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(Layer::values)
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(Layer::values_mut)
    }

    pub fn l2_norm(&self) -> f64 {
        self.params().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn nonzero_count(&self) -> usize {
        self.params().filter(|v| **v != 0.0).count()
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|v| v.is_finite())
    }

    pub fn same_shape(&self, other: &ModelWeights) -> bool {
        self.architecture == other.architecture
    }

    /// In-place `w <- w - lr * g`.
    pub fn apply_gradients(&mut self, grads: &Gradients, lr: f64) -> Result<()> {
        grads.check_congruent(self)?;
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, gw) in layer.weights.iter_mut().zip(&g.weights) {
                *w -= lr * gw;
            }
            for (b, gb) in layer.bias.iter_mut().zip(&g.bias) {
                *b -= lr * gb;
            }
        }
        Ok(())
    }
}

fn check_architecture(architecture: &[usize]) -> Result<()> {
    if architecture.len() < 2 || architecture.contains(&0) {
        return Err(Error::Config(format!(
            "architecture needs at least two positive widths, got {architecture:?}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Gradients with the same layer structure as the model they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    layers: Vec<LayerGradients>,
}

impl Gradients {
    pub fn zeros_like(model: &ModelWeights) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| LayerGradients {
                    weights: vec![0.0; l.weights.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn layers(&self) -> &[LayerGradients] {
        &self.layers
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    pub fn l2_norm(&self) -> f64 {
        self.values().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn check_congruent(&self, model: &ModelWeights) -> Result<()> {
        let ok = self.layers.len() == model.layers.len()
            && self.layers.iter().zip(&model.layers).all(|(g, l)| {
                g.weights.len() == l.weights.len() && g.bias.len() == l.bias.len()
            });
        if ok {
            Ok(())
        } else {
            Err(Error::Config(
                "gradients are not shape-congruent with the model".into(),
            ))
        }
    }

    fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|v| *v *= factor);
            l.bias.iter_mut().for_each(|v| *v *= factor);
        }
    }
}

/// Row-major samples with integer class labels. Mini-batches are the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    num_classes: usize,
    inputs: Vec<f64>,
    labels: Vec<usize>,
}

pub type Batch = Dataset;

impl Dataset {
    pub fn new(dim: usize, num_classes: usize, inputs: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        if dim == 0 || num_classes == 0 {
            return Err(Error::Input("dataset needs positive dim and class count".into()));
        }
        if inputs.len() != dim * labels.len() {
            return Err(Error::Input(format!(
                "{} input values do not form {} rows of width {dim}",
                inputs.len(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::Input(format!(
                "label {bad} outside [0, {num_classes})"
            )));
        }
        Ok(Self {
            dim,
            num_classes,
            inputs,
            labels,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    /// Gathers the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut inputs = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            inputs.extend_from_slice(self.input(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            dim: self.dim,
            num_classes: self.num_classes,
            inputs,
            labels,
        }
    }

    /// Concatenation of several datasets with the same dim and class count.
    pub fn concat(parts: &[&Dataset]) -> Result<Dataset> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Input("nothing to concatenate".into()))?;
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        for p in parts {
            if p.dim != first.dim || p.num_classes != first.num_classes {
                return Err(Error::Input("datasets disagree on dim or class count".into()));
            }
            inputs.extend_from_slice(&p.inputs);
            labels.extend_from_slice(&p.labels);
        }
        Ok(Dataset {
            dim: first.dim,
            num_classes: first.num_classes,
            inputs,
            labels,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// Row-major `[batch x classes]`.
    pub logits: Vec<f64>,
    pub loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub mean_loss: f64,
    pub accuracy: f64,
}

fn check_batch(model: &ModelWeights, batch: &Batch) -> Result<()> {
    if batch.dim != model.input_dim() || batch.num_classes != model.num_classes() {
        return Err(Error::Config(format!(
            "batch of dim {} with {} classes does not fit model {:?}",
            batch.dim,
            batch.num_classes,
            model.architecture()
        )));
    }
    Ok(())
}

/// Per-sample scratch space: pre-activations and activations of every layer.
struct Trace {
    /// `acts[0]` is the input; `acts[l + 1]` is the output of layer `l`
    /// (post-ReLU for hidden layers, raw logits for the last).
    acts: Vec<Vec<f64>>,
}

impl Trace {
    fn new(model: &ModelWeights) -> Self {
        Self {
            acts: model.architecture.iter().map(|&w| vec![0.0; w]).collect(),
        }
    }

    fn run(&mut self, model: &ModelWeights, input: &[f64]) {
        self.acts[0].copy_from_slice(input);
        let last = model.layers.len() - 1;
        for (l, layer) in model.layers.iter().enumerate() {
            let (head, tail) = self.acts.split_at_mut(l + 1);
            let a = &head[l];
            let z = &mut tail[0];
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                let mut s = layer.bias[o];
                for (w, x) in row.iter().zip(a.iter()) {
                    s += w * x;
                }
                *zo = if l < last { s.max(0.0) } else { s };
            }
        }
    }

    fn logits(&self) -> &[f64] {
        self.acts.last().unwrap()
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    // lse >= every logit, so the difference is non-negative up to rounding.
    (log_sum_exp(logits) - logits[label]).max(0.0)
}

fn argmax(z: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in z.iter().enumerate() {
        if *v > z[best] {
            best = i;
        }
    }
    best
}

/// Logits and mean softmax cross-entropy over the batch.
pub fn forward(model: &ModelWeights, batch: &Batch) -> Result<ForwardOutput> {
    check_batch(model, batch)?;
    if batch.is_empty() {
        return Err(Error::Input("empty batch".into()));
    }
    let mut trace = Trace::new(model);
    let mut logits = Vec::with_capacity(batch.len() * model.num_classes());
    let mut total = 0.0;
    for i in 0..batch.len() {
        trace.run(model, batch.input(i));
        total += cross_entropy(trace.logits(), batch.label(i));
        logits.extend_from_slice(trace.logits());
    }
    Ok(ForwardOutput {
        logits,
        loss: total / batch.len() as f64,
    })
}

/// Gradient of the mean cross-entropy with respect to every parameter.
pub fn backward(model: &ModelWeights, batch: &Batch) -> Result<Gradients> {
    check_batch(model, batch)?;
    if batch.is_empty() {
        return Err(Error::Input("empty batch".into()));
    }
    let mut grads = Gradients::zeros_like(model);
    let mut trace = Trace::new(model);
    let mut deltas: Vec<Vec<f64>> = model.architecture.iter().map(|&w| vec![0.0; w]).collect();
    let depth = model.layers.len();

    for i in 0..batch.len() {
        trace.run(model, batch.input(i));
        // dL/dz at the output: softmax(z) - onehot(y).
        let z = trace.logits();
        let lse = log_sum_exp(z);
        let out = &mut deltas[depth];
        for (d, v) in out.iter_mut().zip(z) {
            *d = (v - lse).exp();
        }
        out[batch.label(i)] -= 1.0;

        for l in (0..depth).rev() {
            let layer = &model.layers[l];
            let g = &mut grads.layers[l];
            let (lower, upper) = deltas.split_at_mut(l + 1);
            let delta = &upper[0];
            let a_prev = &trace.acts[l];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                g.bias[o] += d;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (gw, a) in row.iter_mut().zip(a_prev) {
                    *gw += d * a;
                }
            }
            if l > 0 {
                let prev = &mut lower[l];
                prev.iter_mut().for_each(|v| *v = 0.0);
                for (o, d) in delta.iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += w * d;
                    }
                }
                // ReLU derivative: hidden activations are zero exactly where inactive.
                for (p, a) in prev.iter_mut().zip(a_prev) {
                    if *a <= 0.0 {
                        *p = 0.0;
                    }
                }
            }
        }
    }
    grads.scale(1.0 / batch.len() as f64);
    Ok(grads)
}

/// `w' = w - lr * g`.
pub fn sgd_step(model: &ModelWeights, grads: &Gradients, lr: f64) -> Result<ModelWeights> {
    if !(lr >= 0.0) || !lr.is_finite() {
        return Err(Error::Input(format!("learning rate must be >= 0, got {lr}")));
    }
    let mut next = model.clone();
    next.apply_gradients(grads, lr)?;
    Ok(next)
}

/// Mean loss and argmax accuracy over a dataset.
pub fn evaluate(model: &ModelWeights, dataset: &Dataset) -> Result<Evaluation> {
    if dataset.is_empty() {
        return Err(Error::Input("cannot evaluate on an empty dataset".into()));
    }
    check_batch(model, dataset)?;
    let mut trace = Trace::new(model);
    let mut total = 0.0;
    let mut correct = 0usize;
    for i in 0..dataset.len() {
        trace.run(model, dataset.input(i));
        total += cross_entropy(trace.logits(), dataset.label(i));
        if argmax(trace.logits()) == dataset.label(i) {
            correct += 1;
        }
    }
    let n = dataset.len() as f64;
    Ok(Evaluation {
        mean_loss: total / n,
        accuracy: correct as f64 / n,
    })
}
