//! Layer graphs executed either as a ReLU network (ANN mode) or as a
//! spiking network unrolled over time steps (SNN mode).

mod convert;
mod encode;
mod exec;
mod loss;

use alloc::vec::Vec;
use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::rng;
use crate::spiking::{SpikeFn, SpikeTrace};
use crate::tensorops::{ConvSpec, Tensor};

pub use convert::{convert_ann_to_snn, percentile};
pub use encode::{encode_direct, encode_poisson, Encoder};
pub use exec::{Gradients, LayerGrad, Run, RunOptions};
pub use loss::softmax_cross_entropy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Ann,
    Snn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LayerKind {
    Conv(ConvSpec),
    Linear { inputs: usize, outputs: usize },
    AvgPool { window: usize },
    Dropout { rate: f64 },
    /// LIF neuron in SNN mode, ReLU in ANN mode.
    Neuron,
    Relu,
    /// Identity in ANN mode, time accumulator in SNN mode.
    Output,
}

impl LayerKind {
    pub fn is_weighted(&self) -> bool {
        matches!(self, LayerKind::Conv(_) | LayerKind::Linear { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trainable {
    pub weight: bool,
    pub threshold: bool,
    pub leak: bool,
}

impl Default for Trainable {
    fn default() -> Self {
        Self { weight: true, threshold: true, leak: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    #[serde(default)]
    pub trainable: Trainable,
}

impl LayerSpec {
    pub fn conv(spec: ConvSpec) -> Self {
        LayerKind::Conv(spec).into()
    }
    pub fn linear(inputs: usize, outputs: usize) -> Self {
        LayerKind::Linear { inputs, outputs }.into()
    }
    pub fn avgpool(window: usize) -> Self {
        LayerKind::AvgPool { window }.into()
    }
    pub fn dropout(rate: f64) -> Self {
        LayerKind::Dropout { rate }.into()
    }
    pub fn neuron() -> Self {
        LayerKind::Neuron.into()
    }
    pub fn relu() -> Self {
        LayerKind::Relu.into()
    }
    pub fn output() -> Self {
        LayerKind::Output.into()
    }
}

impl From<LayerKind> for LayerSpec {
    fn from(kind: LayerKind) -> Self {
        Self { kind, trainable: Trainable::default() }
    }
}

/// A layer with its parameters. Thresholds and leaks are only meaningful on
/// neuron layers, weights only on conv/linear layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub spec: LayerSpec,
    pub weight: Option<Tensor>,
    pub threshold: f64,
    pub leak: f64,
}

/// Input representation for SNN inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputEncoding {
    Direct,
    /// Rate coding; input gradients are averaged over `samples` draws.
    Poisson { seed: u64, samples: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub input_shape: Vec<usize>,
    pub classes: usize,
    pub layers: Vec<Layer>,
    pub mode: Mode,
    /// Simulation length `T` for SNN inference; ignored in ANN mode.
    pub time_steps: usize,
    /// Surrogate damping factor.
    pub gamma: f64,
    pub detach_reset: bool,
    pub spike_fn: SpikeFn,
    pub encoding: InputEncoding,
}

pub const DEFAULT_GAMMA: f64 = 0.3;

impl Model {
    /// Builds a model and draws He-uniform weights from `seed`.
    pub fn new(input_shape: &[usize], classes: usize, specs: &[LayerSpec], mode: Mode, seed: u64) -> Result<Self> {
        let mut layers = Vec::with_capacity(specs.len());
        let mut shape = input_shape.to_vec();
        for (i, spec) in specs.iter().enumerate() {
            let weight = match spec.kind {
                LayerKind::Conv(c) => {
                    let fan_in = c.kernel_size * c.kernel_size * c.in_channels;
                    Some(he_uniform(&c.weight_shape(), fan_in, seed, i))
                }
                LayerKind::Linear { inputs, outputs } => Some(he_uniform(&[inputs, outputs], inputs, seed, i)),
                _ => None,
            };
            layers.push(Layer { spec: *spec, weight, threshold: 1.0, leak: 1.0 });
            shape = output_shape(&spec.kind, &shape)?;
        }
        let model = Self {
            input_shape: input_shape.to_vec(),
            classes,
            layers,
            mode,
            time_steps: 1,
            gamma: DEFAULT_GAMMA,
            detach_reset: false,
            spike_fn: SpikeFn::Heaviside,
            encoding: InputEncoding::Direct,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_time_steps(mut self, steps: usize) -> Self {
        self.time_steps = steps;
        self
    }

    /// Checks layer ordering and parameter shapes.
    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 {
            return Err(config_err!("model needs at least one class"));
        }
        if self.mode == Mode::Snn && self.time_steps == 0 {
            return Err(config_err!("SNN needs at least one time step"));
        }
        let n = self.layers.len();
        match self.layers.last().map(|l| l.spec.kind) {
            Some(LayerKind::Output) => {}
            _ => return Err(config_err!("last layer must be the output accumulator")),
        }
        let last_weighted = self
            .layers
            .iter()
            .rposition(|l| l.spec.kind.is_weighted())
            .ok_or_else(|| config_err!("model has no weighted layer"))?;
        if last_weighted + 2 != n {
            return Err(config_err!("output accumulator must directly follow the last weighted layer"));
        }
        let mut shape = self.input_shape.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let kind = layer.spec.kind;
            if kind == LayerKind::Output && i + 1 != n {
                return Err(config_err!("output accumulator at layer {} is not last", i));
            }
            if kind.is_weighted() && i != last_weighted {
                let next = self.layers[i + 1].spec.kind;
                let ok = match self.mode {
                    Mode::Snn => next == LayerKind::Neuron,
                    Mode::Ann => matches!(next, LayerKind::Neuron | LayerKind::Relu),
                };
                if !ok {
                    return Err(config_err!("layer {} must be followed by a neuron layer, found {:?}", i, next));
                }
            }
            if self.mode == Mode::Snn && kind == LayerKind::Neuron
                && (!(layer.threshold > 0.0) || !(layer.leak > 0.0 && layer.leak <= 1.0)) {
                    return Err(config_err!(
                        "neuron layer {} has threshold {} / leak {}",
                        i,
                        layer.threshold,
                        layer.leak
                    ));
                }
            let expected = match kind {
                LayerKind::Conv(c) => Some(c.weight_shape().to_vec()),
                LayerKind::Linear { inputs, outputs } => Some(alloc::vec![inputs, outputs]),
                _ => None,
            };
            match (&expected, &layer.weight) {
                (Some(e), Some(w)) if w.shape() == e.as_slice() => {}
                (None, None) => {}
                _ => return Err(config_err!("layer {} weight does not match its geometry", i)),
            }
            shape = output_shape(&kind, &shape)?;
        }
        if shape.iter().product::<usize>() != self.classes {
            return Err(config_err!("network emits {:?}, expected {} classes", shape, self.classes));
        }
        Ok(())
    }

    /// Input shape of every layer, followed by the output shape.
    pub fn layer_shapes(&self) -> Result<Vec<Vec<usize>>> {
        let mut shapes = alloc::vec![self.input_shape.clone()];
        for layer in &self.layers {
            let next = output_shape(&layer.spec.kind, shapes.last().expect("non-empty"))?;
            shapes.push(next);
        }
        Ok(shapes)
    }

    pub fn neuron_layers(&self) -> impl Iterator<Item = (usize, &Layer)> {
        self.layers.iter().enumerate().filter(|(_, l)| l.spec.kind == LayerKind::Neuron)
    }

    pub fn weighted_layers(&self) -> impl Iterator<Item = (usize, &Layer)> {
        self.layers.iter().enumerate().filter(|(_, l)| l.spec.kind.is_weighted())
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().filter_map(|l| l.weight.as_ref()).map(Tensor::len).sum()
    }

    /// ReLU forward pass returning class logits.
    pub fn forward_ann(&self, x: &Tensor) -> Result<Tensor> {
        if self.mode != Mode::Ann {
            return Err(crate::Error::Contract("forward_ann on an SNN".into()));
        }
        Ok(self.run(x, &RunOptions::inference(1))?.logits)
    }

    /// Spiking forward pass over `steps` steps; returns logits and one spike
    /// trace per neuron layer.
    pub fn forward_snn(&self, x: &Tensor, encoder: Encoder, steps: usize) -> Result<(Tensor, Vec<SpikeTrace>)> {
        if self.mode != Mode::Snn {
            return Err(crate::Error::Contract("forward_snn on an ANN".into()));
        }
        let opts = RunOptions { encoder, record: true, ..RunOptions::inference(steps) };
        let run = self.run(x, &opts)?;
        Ok((run.logits, run.traces))
    }

    /// Inference logits in the model's own mode, encoding and `T`.
    pub fn logits(&self, x: &Tensor) -> Result<Tensor> {
        let encoder = match self.encoding {
            InputEncoding::Direct => Encoder::Direct,
            InputEncoding::Poisson { seed, .. } => Encoder::Poisson { seed },
        };
        let opts = RunOptions { encoder, ..RunOptions::inference(self.steps()) };
        Ok(self.run(x, &opts)?.logits)
    }

    pub fn predict(&self, x: &Tensor) -> Result<usize> {
        Ok(self.logits(x)?.argmax())
    }

    pub(crate) fn steps(&self) -> usize {
        match self.mode {
            Mode::Ann => 1,
            Mode::Snn => self.time_steps,
        }
    }
}

fn he_uniform(shape: &[usize], fan_in: usize, seed: u64, layer: usize) -> Tensor {
    let bound = libm::sqrt(6.0 / fan_in.max(1) as f64);
    let mut rng = rng::stream(seed, &[rng::TAG_INIT, layer as u64]);
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = rng.random_range(-bound..bound);
    }
    t
}

pub(crate) fn output_shape(kind: &LayerKind, input: &[usize]) -> Result<Vec<usize>> {
    match *kind {
        LayerKind::Conv(c) => {
            if input.len() != 3 || input[2] != c.in_channels {
                return Err(config_err!("conv with {} input channels cannot take {:?}", c.in_channels, input));
            }
            let (h, w) = c.output_hw(input[0], input[1])?;
            Ok(alloc::vec![h, w, c.out_channels])
        }
        LayerKind::Linear { inputs, outputs } => {
            if input.iter().product::<usize>() != inputs {
                return Err(config_err!("linear expects {} inputs, got {:?}", inputs, input));
            }
            Ok(alloc::vec![outputs])
        }
        LayerKind::AvgPool { window } => {
            if input.len() != 3 || window == 0 || !input[0].is_multiple_of(window) || !input[1].is_multiple_of(window) {
                return Err(config_err!("avgpool window {} does not tile {:?}", window, input));
            }
            Ok(alloc::vec![input[0] / window, input[1] / window, input[2]])
        }
        LayerKind::Dropout { rate } => {
            if !(0.0..1.0).contains(&rate) {
                return Err(config_err!("dropout rate {} outside [0, 1)", rate));
            }
            Ok(input.to_vec())
        }
        LayerKind::Neuron | LayerKind::Relu | LayerKind::Output => Ok(input.to_vec()),
    }
}

/// Small VGG-style stack: `blocks` conv/neuron/pool stages followed by a
/// hidden linear layer and the classifier.
pub fn vgg_like(
    input_shape: &[usize],
    classes: usize,
    channels: &[usize],
    hidden: usize,
    dropout: f64,
) -> Result<Vec<LayerSpec>> {
    if input_shape.len() != 3 {
        return Err(config_err!("vgg_like needs an [H, W, C] input"));
    }
    let (mut h, mut w, mut c) = (input_shape[0], input_shape[1], input_shape[2]);
    let mut specs = Vec::new();
    for &out in channels {
        specs.push(LayerSpec::conv(ConvSpec::new(3, c, out).with_padding(1)));
        specs.push(LayerSpec::neuron());
        specs.push(LayerSpec::avgpool(2));
        if h % 2 != 0 || w % 2 != 0 {
            return Err(config_err!("spatial size {}x{} cannot be pooled", h, w));
        }
        h /= 2;
        w /= 2;
        c = out;
    }
    let flat = h * w * c;
    if hidden > 0 {
        specs.push(LayerSpec::linear(flat, hidden));
        specs.push(LayerSpec::neuron());
        if dropout > 0.0 {
            specs.push(LayerSpec::dropout(dropout));
        }
        specs.push(LayerSpec::linear(hidden, classes));
    } else {
        specs.push(LayerSpec::linear(flat, classes));
    }
    specs.push(LayerSpec::output());
    Ok(specs)
}
