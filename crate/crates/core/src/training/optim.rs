use alloc::vec::Vec;

use super::TrainConfig;
use crate::error::Result;
use crate::model::{Gradients, LayerKind, Model};
use crate::spiking::{MIN_LEAK, MIN_THRESHOLD};
use crate::tensorops::Tensor;

/// SGD with optional momentum and weight decay on conv/linear weights.
/// Thresholds and leaks are clamped to their valid ranges after each step.
#[derive(Debug, Clone)]
pub struct Sgd {
    momentum: f64,
    weight_decay: f64,
    freeze_threshold: bool,
    freeze_leak: bool,
    weight_buf: Vec<Option<Tensor>>,
    scalar_buf: Vec<(f64, f64)>,
}

impl Sgd {
    pub fn new(model: &Model, cfg: &TrainConfig) -> Self {
        Self {
            momentum: cfg.momentum,
            weight_decay: cfg.weight_decay,
            freeze_threshold: cfg.freeze_threshold,
            freeze_leak: cfg.freeze_leak,
            weight_buf: model.layers.iter().map(|l| l.weight.as_ref().map(|w| Tensor::zeros(w.shape()))).collect(),
            scalar_buf: alloc::vec![(0.0, 0.0); model.layers.len()],
        }
    }

    pub fn step(&mut self, model: &mut Model, grads: &Gradients, lr: f64) -> Result<()> {
        let snn = model.mode == crate::model::Mode::Snn;
        for (i, (layer, g)) in model.layers.iter_mut().zip(&grads.layers).enumerate() {
            let trainable = layer.spec.trainable;
            if let (Some(w), Some(gw), true) = (layer.weight.as_mut(), g.weight.as_ref(), trainable.weight) {
                let buf = self.weight_buf[i].as_mut().expect("same layout");
                let (mu, wd) = (self.momentum, self.weight_decay);
                for ((b, &gv), wv) in buf.data_mut().iter_mut().zip(gw.data()).zip(w.data_mut()) {
                    *b = mu * *b + gv + wd * *wv;
                    *wv -= lr * *b;
                }
            }
            if !(snn && layer.spec.kind == LayerKind::Neuron) {
                continue;
            }
            let (bv, bl) = &mut self.scalar_buf[i];
            if trainable.threshold && !self.freeze_threshold {
                *bv = self.momentum * *bv + g.threshold;
                layer.threshold = (layer.threshold - lr * *bv).max(MIN_THRESHOLD);
            }
            if trainable.leak && !self.freeze_leak {
                *bl = self.momentum * *bl + g.leak;
                layer.leak = (layer.leak - lr * *bl).clamp(MIN_LEAK, 1.0);
            }
        }
        Ok(())
    }
}
