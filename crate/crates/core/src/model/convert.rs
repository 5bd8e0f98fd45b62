use alloc::vec::Vec;

use super::{LayerKind, Mode, Model, RunOptions};
use crate::error::{config_err, input_err, Result};
use crate::spiking::MIN_THRESHOLD;
use crate::tensorops::Tensor;

/// Linear-interpolated percentile (`p` in `[0, 100]`) of `values`; sorts in
/// place.
pub fn percentile(values: &mut [f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(input_err!("percentile of an empty set"));
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(config_err!("percentile {} outside [0, 100]", p));
    }
    values.sort_unstable_by(f64::total_cmp);
    let rank = p / 100.0 * (values.len() - 1) as f64;
    let lo = libm::floor(rank) as usize;
    let hi = (lo + 1).min(values.len() - 1);
    let frac = rank - lo as f64;
    Ok(values[lo] + frac * (values[hi] - values[lo]))
}

/// Turns a trained ReLU network into an SNN with the same weights.
///
/// Thresholds are calibrated one neuron layer at a time: layer `l` is set to
/// the `pct`-th percentile of the weighted input it receives over
/// `time_steps` steps while every earlier layer already spikes with its
/// calibrated threshold. Leaks start at 1 (IF neurons).
pub fn convert_ann_to_snn(ann: &Model, calibration: &[Tensor], pct: f64, time_steps: usize) -> Result<Model> {
    if calibration.is_empty() {
        return Err(input_err!("calibration batch is empty"));
    }
    if time_steps == 0 {
        return Err(config_err!("conversion needs at least one time step"));
    }
    let mut snn = ann.clone();
    snn.mode = Mode::Snn;
    snn.time_steps = time_steps;
    for layer in &mut snn.layers {
        if layer.spec.kind == LayerKind::Relu {
            layer.spec.kind = LayerKind::Neuron;
        }
        layer.threshold = 1.0;
        layer.leak = 1.0;
    }
    snn.validate()?;
    let neuron_idx: Vec<usize> = snn.neuron_layers().map(|(i, _)| i).collect();
    for &i in &neuron_idx {
        let mut values = Vec::new();
        for x in calibration {
            let opts = RunOptions { capture_input_of: Some(i), ..RunOptions::inference(time_steps) };
            let run = snn.run(x, &opts)?;
            for input in &run.captured {
                values.extend_from_slice(input.data());
            }
        }
        let v = percentile(&mut values, pct)?;
        snn.layers[i].threshold = v.max(MIN_THRESHOLD);
    }
    Ok(snn)
}
