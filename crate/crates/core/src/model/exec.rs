use alloc::vec;
use alloc::vec::Vec;

use super::{Encoder, LayerKind, Mode, Model};
use crate::error::{config_err, Error, Result};
use crate::rng;
use crate::spiking::{bptt_backward, LifRun, NeuronParams, NeuronState, SpikeTrace};
use crate::tensorops::conv::conv2d_backward_opt;
use crate::tensorops::linear::linear_backward_opt;
use crate::tensorops::{avgpool_backward, avgpool_forward, conv2d_forward, dropout_mask, linear_forward, Tensor};

/// How to drive one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct RunOptions<'a> {
    /// Time steps to simulate (forced to 1 in ANN mode).
    pub steps: usize,
    pub encoder: Encoder,
    /// Keep everything the backward pass and the activity metrics need.
    pub record: bool,
    /// Enables dropout with masks keyed by this seed; `None` means inference.
    pub dropout_seed: Option<u64>,
    /// Membrane state carried in from a previous window, one per neuron layer.
    pub initial_states: Option<&'a [NeuronState]>,
    /// Stop before this layer and return the inputs it would have received.
    pub capture_input_of: Option<usize>,
}

impl RunOptions<'_> {
    pub fn inference(steps: usize) -> Self {
        Self {
            steps,
            encoder: Encoder::Direct,
            record: false,
            dropout_seed: None,
            initial_states: None,
            capture_input_of: None,
        }
    }

    pub fn training(steps: usize, dropout_seed: u64) -> Self {
        Self { record: true, dropout_seed: Some(dropout_seed), ..Self::inference(steps) }
    }
}

/// Result of a forward pass.
#[derive(Debug, Clone)]
pub struct Run {
    pub logits: Tensor,
    /// One trace per neuron layer when recording in SNN mode.
    pub traces: Vec<SpikeTrace>,
    /// Membrane state after the last step, one per neuron layer.
    pub final_states: Vec<NeuronState>,
    /// Per-step inputs of the layer named in `capture_input_of`.
    pub captured: Vec<Tensor>,
    /// Per-step inputs of every weighted layer; used for FLOP scaling.
    pub weighted_inputs: Vec<Vec<Tensor>>,
    steps: usize,
    masks: Vec<Option<Tensor>>,
    relu_masks: Vec<Vec<Tensor>>,
}

impl Run {
    /// Number of per-step records held for the backward pass.
    pub fn stored_steps(&self) -> usize {
        if self.weighted_inputs.iter().any(|v| !v.is_empty()) {
            self.steps
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weight: Option<Tensor>,
    pub threshold: f64,
    pub leak: f64,
}

/// Parameter gradients for every layer plus the summed input gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
    pub input: Option<Tensor>,
}

impl Gradients {
    pub fn zeros_like(model: &Model) -> Self {
        let layers = model
            .layers
            .iter()
            .map(|l| LayerGrad {
                weight: l.weight.as_ref().map(|w| Tensor::zeros(w.shape())),
                threshold: 0.0,
                leak: 0.0,
            })
            .collect();
        Self { layers, input: None }
    }

    /// Adds parameter gradients of `other`; input gradients are not summed.
    pub fn accumulate(&mut self, other: &Gradients) -> Result<()> {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            if let (Some(wa), Some(wb)) = (a.weight.as_mut(), b.weight.as_ref()) {
                wa.add_assign(wb)?;
            }
            a.threshold += b.threshold;
            a.leak += b.leak;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.layers {
            if let Some(w) = g.weight.as_mut() {
                w.scale(factor);
            }
            g.threshold *= factor;
            g.leak *= factor;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|g| {
            g.threshold.is_finite() && g.leak.is_finite() && g.weight.as_ref().is_none_or(Tensor::all_finite)
        }) && self.input.as_ref().is_none_or(Tensor::all_finite)
    }
}

impl Model {
    /// Runs the graph. In ANN mode neuron layers act as ReLU and a single
    /// step is simulated; in SNN mode the output layer accumulates over
    /// `opts.steps` and the logits are the time average.
    pub fn run(&self, x: &Tensor, opts: &RunOptions<'_>) -> Result<Run> {
        if x.shape() != self.input_shape.as_slice() {
            return Err(config_err!("input shape {:?}, model expects {:?}", x.shape(), self.input_shape));
        }
        let steps = match self.mode {
            Mode::Ann => 1,
            Mode::Snn => opts.steps,
        };
        if steps == 0 {
            return Err(config_err!("a forward pass needs at least one step"));
        }
        let n_layers = self.layers.len();
        let stop = opts.capture_input_of.unwrap_or(n_layers).min(n_layers);
        let shapes = self.layer_shapes()?;

        let mut masks: Vec<Option<Tensor>> = vec![None; n_layers];
        if let Some(seed) = opts.dropout_seed {
            for (i, layer) in self.layers.iter().enumerate().take(stop) {
                if let LayerKind::Dropout { rate } = layer.spec.kind {
                    let mask_seed = rng::derive(seed, &[i as u64]);
                    masks[i] = Some(dropout_mask(&shapes[i], rate, mask_seed)?);
                }
            }
        }

        let mut lifs: Vec<Option<LifRun>> = vec![None; n_layers];
        if self.mode == Mode::Snn {
            let mut ordinal = 0;
            for (i, layer) in self.layers.iter().enumerate() {
                if layer.spec.kind != LayerKind::Neuron {
                    continue;
                }
                let state = match opts.initial_states {
                    Some(states) => {
                        let s = states
                            .get(ordinal)
                            .ok_or_else(|| config_err!("missing carried state for neuron layer {}", i))?;
                        NeuronState { threshold: layer.threshold, leak: layer.leak, ..s.clone() }
                    }
                    None => NeuronState::resting(&shapes[i], layer.threshold, layer.leak),
                };
                ordinal += 1;
                if i < stop {
                    lifs[i] = Some(LifRun::new(state, self.spike_fn, self.gamma, opts.record)?);
                }
            }
        }

        let mut weighted_inputs: Vec<Vec<Tensor>> = vec![Vec::new(); n_layers];
        let mut relu_masks: Vec<Vec<Tensor>> = vec![Vec::new(); n_layers];
        let mut captured = Vec::new();
        let mut acc = Tensor::zeros(&[self.classes]);

        for t in 0..steps {
            let mut a = match self.mode {
                Mode::Ann => x.clone(),
                Mode::Snn => opts.encoder.encode(x, t)?,
            };
            for (i, layer) in self.layers.iter().enumerate() {
                if i == stop {
                    captured.push(a);
                    break;
                }
                a = match layer.spec.kind {
                    LayerKind::Conv(spec) => {
                        let w = layer.weight.as_ref().expect("validated");
                        let y = conv2d_forward(&a, w, &spec)?;
                        if opts.record {
                            weighted_inputs[i].push(a);
                        }
                        y
                    }
                    LayerKind::Linear { .. } => {
                        let w = layer.weight.as_ref().expect("validated");
                        let y = linear_forward(&a, w)?;
                        if opts.record {
                            weighted_inputs[i].push(a);
                        }
                        y
                    }
                    LayerKind::AvgPool { window } => avgpool_forward(&a, window)?,
                    LayerKind::Dropout { .. } => match &masks[i] {
                        Some(m) => a.zip_map(m, |v, m| v * m)?,
                        None => a,
                    },
                    LayerKind::Neuron if self.mode == Mode::Snn => {
                        lifs[i].as_mut().expect("built above").step(&a)?
                    }
                    LayerKind::Neuron | LayerKind::Relu => {
                        if opts.record {
                            relu_masks[i].push(a.map(|v| if v > 0.0 { 1.0 } else { 0.0 }));
                        }
                        a.map(|v| v.max(0.0))
                    }
                    LayerKind::Output => {
                        acc.add_assign(&a)?;
                        a
                    }
                };
            }
        }

        let mut traces = Vec::new();
        let mut final_states = Vec::new();
        for run in lifs.into_iter().flatten() {
            let (state, trace) = run.into_parts();
            final_states.push(state);
            if let Some(trace) = trace {
                traces.push(trace);
            }
        }
        acc.scale(1.0 / steps as f64);
        Ok(Run { logits: acc, traces, final_states, captured, weighted_inputs, steps, masks, relu_masks })
    }

    /// Backpropagates `grad_logits` through a recorded run.
    pub fn backward(&self, run: &Run, grad_logits: &Tensor, need_input_grad: bool) -> Result<Gradients> {
        if run.weighted_inputs.iter().all(Vec::is_empty) {
            return Err(Error::Contract("backward needs a recorded forward pass".into()));
        }
        if grad_logits.len() != self.classes {
            return Err(config_err!("logit gradient has {} entries", grad_logits.len()));
        }
        let steps = run.steps;
        let first_weighted = self.layers.iter().position(|l| l.spec.kind.is_weighted()).unwrap_or(0);
        let mut grads = Gradients::zeros_like(self);
        let mut scaled = grad_logits.clone();
        scaled.scale(1.0 / steps as f64);
        let mut g: Vec<Tensor> = vec![scaled; steps];
        let mut trace_idx = run.traces.len();

        for (i, layer) in self.layers.iter().enumerate().rev() {
            let need_below = need_input_grad || i > first_weighted;
            match layer.spec.kind {
                LayerKind::Output => {}
                LayerKind::Conv(spec) => {
                    let w = layer.weight.as_ref().expect("validated");
                    let gw_total = grads.layers[i].weight.as_mut().expect("weighted");
                    for (t, gt) in g.iter_mut().enumerate() {
                        let (gx, gw) = conv2d_backward_opt(gt, &run.weighted_inputs[i][t], w, &spec, need_below)?;
                        gw_total.add_assign(&gw)?;
                        if let Some(gx) = gx {
                            *gt = gx;
                        }
                    }
                }
                LayerKind::Linear { .. } => {
                    let w = layer.weight.as_ref().expect("validated");
                    let gw_total = grads.layers[i].weight.as_mut().expect("weighted");
                    for (t, gt) in g.iter_mut().enumerate() {
                        let (gx, gw) = linear_backward_opt(gt, &run.weighted_inputs[i][t], w, need_below)?;
                        gw_total.add_assign(&gw)?;
                        if let Some(gx) = gx {
                            *gt = gx;
                        }
                    }
                }
                LayerKind::AvgPool { window } => {
                    for gt in g.iter_mut() {
                        *gt = avgpool_backward(gt, window)?;
                    }
                }
                LayerKind::Dropout { .. } => {
                    if let Some(m) = &run.masks[i] {
                        for gt in g.iter_mut() {
                            *gt = gt.zip_map(m, |a, b| a * b)?;
                        }
                    }
                }
                LayerKind::Neuron if self.mode == Mode::Snn => {
                    trace_idx -= 1;
                    let params = NeuronParams {
                        threshold: layer.threshold,
                        leak: layer.leak,
                        gamma: self.gamma,
                        detach_reset: self.detach_reset,
                    };
                    let b = bptt_backward(&run.traces[trace_idx], &g, &params)?;
                    grads.layers[i].threshold = b.threshold;
                    grads.layers[i].leak = b.leak;
                    g = b.input;
                }
                LayerKind::Neuron | LayerKind::Relu => {
                    for (gt, m) in g.iter_mut().zip(&run.relu_masks[i]) {
                        *gt = gt.zip_map(m, |a, b| a * b)?;
                    }
                }
            }
            if i == first_weighted && !need_input_grad {
                break;
            }
        }
        if need_input_grad {
            let mut total = Tensor::zeros(&self.input_shape);
            for gt in &g {
                total.add_assign(gt)?;
            }
            grads.input = Some(total);
        }
        Ok(grads)
    }
}
