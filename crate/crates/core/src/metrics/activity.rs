use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{input_err, Error, Result};
use crate::model::{Encoder, InputEncoding, LayerKind, Mode, Model, Run, RunOptions};
use crate::spiking::SpikeTrace;
use crate::tensorops::Tensor;

/// Spikes per neuron over the whole run (SA) and per step (TASA).
pub fn spiking_activity(trace: &SpikeTrace, neurons: usize, steps: usize) -> Result<(f64, f64)> {
    if neurons == 0 {
        return Err(input_err!("activity of a layer with no neurons"));
    }
    if steps == 0 {
        return Err(input_err!("activity over zero steps"));
    }
    let sa = trace.total_spikes() / neurons as f64;
    Ok((sa, sa / steps as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerActivityRecord {
    /// Index of the neuron layer in the model.
    pub layer: usize,
    pub neurons: usize,
    /// Mean spikes emitted by the whole layer per image over `steps`.
    pub spikes: f64,
    pub steps: usize,
    pub sa: f64,
    pub tasa: f64,
}

impl LayerActivityRecord {
    pub fn check(&self) -> Result<()> {
        if !(0.0..=self.steps as f64).contains(&self.sa) || !(0.0..=1.0).contains(&self.tasa) {
            return Err(Error::Invariant(format!(
                "layer {} activity out of range: SA {} over T {}, TASA {}",
                self.layer, self.sa, self.steps, self.tasa
            )));
        }
        Ok(())
    }
}

/// Activity of every neuron layer plus that of the encoded input, which is
/// 1 for direct (analog) input and the spike rate for Poisson input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityReport {
    pub input_tasa: f64,
    pub layers: Vec<LayerActivityRecord>,
}

impl ActivityReport {
    /// TASA of the spike map feeding layer `index`.
    pub fn zeta(&self, model: &Model, index: usize) -> f64 {
        let source = model.layers[..index].iter().rposition(|l| l.spec.kind == LayerKind::Neuron);
        match source.and_then(|s| self.layers.iter().find(|r| r.layer == s)) {
            Some(r) => r.tasa,
            None => self.input_tasa,
        }
    }
}

pub(crate) fn encoder_of(model: &Model) -> Encoder {
    match model.encoding {
        InputEncoding::Direct => Encoder::Direct,
        InputEncoding::Poisson { seed, .. } => Encoder::Poisson { seed },
    }
}

/// Recorded inference pass in the model's own encoding and `T`.
pub(crate) fn recorded_run(model: &Model, x: &Tensor) -> Result<Run> {
    let opts = RunOptions { encoder: encoder_of(model), record: true, ..RunOptions::inference(model.time_steps.max(1)) };
    model.run(x, &opts)
}

#[derive(Default)]
pub(crate) struct ActivityAccumulator {
    spikes: Vec<f64>,
    input_sum: f64,
    input_count: usize,
    images: usize,
}

impl ActivityAccumulator {
    pub(crate) fn add(&mut self, model: &Model, run: &Run) {
        if self.spikes.len() < run.traces.len() {
            self.spikes.resize(run.traces.len(), 0.0);
        }
        for (acc, tr) in self.spikes.iter_mut().zip(&run.traces) {
            *acc += tr.total_spikes();
        }
        if let Some(first) = model.layers.iter().position(|l| l.spec.kind.is_weighted()) {
            for a in &run.weighted_inputs[first] {
                self.input_sum += a.sum();
                self.input_count += a.len();
            }
        }
        self.images += 1;
    }

    pub(crate) fn finish(self, model: &Model) -> Result<ActivityReport> {
        if model.mode == Mode::Ann {
            return Ok(ActivityReport { input_tasa: 1.0, layers: Vec::new() });
        }
        let shapes = model.layer_shapes()?;
        let steps = model.time_steps.max(1);
        let images = self.images.max(1) as f64;
        let mut layers = Vec::new();
        for ((layer, _), &total) in model.neuron_layers().zip(&self.spikes) {
            let neurons: usize = shapes[layer].iter().product();
            let spikes = total / images;
            let sa = spikes / neurons as f64;
            let rec = LayerActivityRecord { layer, neurons, spikes, steps, sa, tasa: sa / steps as f64 };
            rec.check()?;
            layers.push(rec);
        }
        let input_tasa = match model.encoding {
            InputEncoding::Direct => 1.0,
            InputEncoding::Poisson { .. } if self.input_count > 0 => self.input_sum / self.input_count as f64,
            InputEncoding::Poisson { .. } => 0.0,
        };
        Ok(ActivityReport { input_tasa, layers })
    }
}

/// Mean activity of every neuron layer over `data`.
pub fn profile(model: &Model, data: &Dataset) -> Result<ActivityReport> {
    if data.is_empty() {
        return Err(input_err!("cannot profile an empty dataset"));
    }
    let mut acc = ActivityAccumulator::default();
    for x in &data.images {
        let run = recorded_run(model, x)?;
        acc.add(model, &run);
    }
    acc.finish(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn trace(spikes: Vec<Vec<f64>>) -> SpikeTrace {
        let n = spikes[0].len();
        SpikeTrace {
            initial_potential: Tensor::zeros(&[n]),
            initial_spikes: Tensor::zeros(&[n]),
            potentials: spikes.iter().map(|_| Tensor::zeros(&[n])).collect(),
            spikes: spikes.into_iter().map(|s| Tensor::from_vec(&[n], s).unwrap()).collect(),
        }
    }

    #[test]
    fn silent_layer() {
        let t = trace(vec![vec![0.0, 0.0]; 3]);
        assert_eq!(spiking_activity(&t, 2, 3).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn saturated_layer() {
        let t = trace(vec![vec![1.0, 1.0, 1.0]; 5]);
        assert_eq!(spiking_activity(&t, 3, 5).unwrap(), (5.0, 1.0));
    }

    #[test]
    fn two_neurons_three_spikes() {
        let t = trace(vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(spiking_activity(&t, 2, 4).unwrap(), (1.5, 0.375));
    }

    #[test]
    fn zero_neurons_rejected() {
        let t = trace(vec![vec![0.0]]);
        assert!(matches!(spiking_activity(&t, 0, 1), Err(Error::Input(_))));
    }
}
