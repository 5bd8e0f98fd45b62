use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::activity::{recorded_run, ActivityAccumulator};
use super::{perturbation_distance, spike_pd, ActivityReport};
use crate::attacks::{attack, AttackConfig};
use crate::data::Dataset;
use crate::error::{input_err, Result};
use crate::model::Model;
use crate::rng;

/// Input and spike-map distances between clean and attacked images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdStats {
    pub mean_input: f64,
    pub max_input: f64,
    /// Mean spike distance per neuron layer.
    pub mean_spike: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Top-1 accuracy in percent.
    pub accuracy: f64,
    pub samples: usize,
    /// Activity measured on the images actually classified.
    pub activity: ActivityReport,
    pub pd: Option<PdStats>,
}

/// Accuracy difference `a - b` in points.
pub fn delta(a: f64, b: f64) -> f64 {
    a - b
}

/// Clean or white-box attacked accuracy with activity and distance stats.
pub fn evaluate(model: &Model, data: &Dataset, attack_cfg: Option<&AttackConfig>) -> Result<EvalReport> {
    if data.is_empty() {
        return Err(input_err!("cannot evaluate on an empty dataset"));
    }
    if let Some(cfg) = attack_cfg {
        cfg.validate()?;
    }
    let mut acc = ActivityAccumulator::default();
    let mut hits = 0usize;
    let mut pd_in = Vec::new();
    let mut pd_spike: Vec<f64> = Vec::new();
    let steps = model.time_steps.max(1);
    for (i, (x, &y)) in data.images.iter().zip(&data.labels).enumerate() {
        let run = match attack_cfg {
            None => recorded_run(model, x)?,
            Some(cfg) => {
                let cfg = AttackConfig { seed: rng::derive(cfg.seed, &[i as u64]), ..*cfg };
                let adv = attack(model, x, y, &cfg)?;
                pd_in.push(perturbation_distance(x, &adv)?);
                let clean = recorded_run(model, x)?;
                let run = recorded_run(model, &adv)?;
                if pd_spike.len() < run.traces.len() {
                    pd_spike.resize(run.traces.len(), 0.0);
                }
                for (slot, (c, a)) in pd_spike.iter_mut().zip(clean.traces.iter().zip(&run.traces)) {
                    *slot += spike_pd(c, a, steps)?;
                }
                run
            }
        };
        if run.logits.argmax() == y {
            hits += 1;
        }
        acc.add(model, &run);
    }
    let n = data.len() as f64;
    let pd = attack_cfg.map(|_| PdStats {
        mean_input: pd_in.iter().sum::<f64>() / n,
        max_input: pd_in.iter().copied().fold(0.0, f64::max),
        mean_spike: pd_spike.iter().map(|s| s / n).collect(),
    });
    Ok(EvalReport { accuracy: 100.0 * hits as f64 / n, samples: data.len(), activity: acc.finish(model)?, pd })
}
