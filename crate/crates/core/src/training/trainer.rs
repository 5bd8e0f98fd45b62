use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::RngExt;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Sgd, TrainConfig, TrainMode};
use crate::data::Dataset;
use crate::error::{config_err, Error, Result};
use crate::model::{softmax_cross_entropy, Encoder, Gradients, Mode, Model, RunOptions};
use crate::rng;
use crate::spiking::NeuronState;
use crate::tensorops::Tensor;

/// Input noise `kappa`, one tensor per batch slot. It survives across
/// batches and epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseState {
    pub kappa: Vec<Tensor>,
}

impl NoiseState {
    pub fn zeros(slots: usize, shape: &[usize]) -> Self {
        Self { kappa: (0..slots).map(|_| Tensor::zeros(shape)).collect() }
    }

    /// Fraction of entries sitting on the `+-bound` clip.
    pub fn saturation(&self, bound: f64) -> f64 {
        if bound <= 0.0 {
            return 0.0;
        }
        let (mut hit, mut total) = (0usize, 0usize);
        for k in &self.kappa {
            hit += k.data().iter().filter(|v| v.abs() >= bound).count();
            total += k.len();
        }
        if total == 0 {
            0.0
        } else {
            hit as f64 / total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mode: TrainMode,
    /// Clean accuracy (percent) on a fixed training subset.
    pub train_acc: f64,
    pub val_acc: Option<f64>,
    pub loss: f64,
    pub lr: f64,
    pub kappa_saturation: f64,
    pub updates: usize,
    pub simulated_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    /// Largest number of time steps held for one backward pass.
    pub peak_stored_steps: usize,
    pub invariant_checks: usize,
}

/// State after one parameter update.
pub struct PeriodEvent<'a> {
    pub epoch: usize,
    pub batch: usize,
    pub period: usize,
    pub kappa_before: &'a [Tensor],
    pub kappa_after: &'a [Tensor],
    pub stored_steps: usize,
    pub loss: f64,
    pub model: &'a Model,
}

pub trait TrainHook {
    fn on_period(&mut self, _event: &PeriodEvent<'_>) {}
    fn on_epoch(&mut self, _stats: &EpochStats) {}
}

impl TrainHook for () {}

/// Steps a backward pass has to keep for this configuration.
pub fn gradient_storage_report(cfg: &TrainConfig) -> usize {
    cfg.period_length()
}

/// Clean accuracy in percent.
pub fn accuracy(model: &Model, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut hit = 0usize;
    for (x, &y) in data.images.iter().zip(&data.labels) {
        if model.predict(x)? == y {
            hit += 1;
        }
    }
    Ok(100.0 * hit as f64 / data.len() as f64)
}

pub fn train_ann(model: &mut Model, data: &Dataset, val: Option<&Dataset>, cfg: &TrainConfig) -> Result<TrainReport> {
    expect_mode(cfg, TrainMode::Ann)?;
    train(model, data, val, cfg, &mut ())
}

pub fn train_snn_traditional(
    model: &mut Model,
    data: &Dataset,
    val: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    expect_mode(cfg, TrainMode::SnnTraditional)?;
    train(model, data, val, cfg, &mut ())
}

pub fn train_snn_hire(model: &mut Model, data: &Dataset, val: Option<&Dataset>, cfg: &TrainConfig) -> Result<TrainReport> {
    expect_mode(cfg, TrainMode::SnnHire)?;
    train(model, data, val, cfg, &mut ())
}

pub fn train_snn_gaussian(
    model: &mut Model,
    data: &Dataset,
    val: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    expect_mode(cfg, TrainMode::SnnGaussian)?;
    train(model, data, val, cfg, &mut ())
}

fn expect_mode(cfg: &TrainConfig, mode: TrainMode) -> Result<()> {
    if cfg.mode != mode {
        return Err(config_err!("expected mode {}, got {}", mode.name(), cfg.mode.name()));
    }
    Ok(())
}

/// Trains `model` in place according to `cfg.mode`.
pub fn train(
    model: &mut Model,
    data: &Dataset,
    val: Option<&Dataset>,
    cfg: &TrainConfig,
    hook: &mut dyn TrainHook,
) -> Result<TrainReport> {
    cfg.validate()?;
    data.validate()?;
    if data.is_empty() {
        return Err(Error::Input("empty training set".into()));
    }
    if data.shape != model.input_shape || data.classes != model.classes {
        return Err(Error::Input(format!(
            "dataset {:?} x {} classes does not fit model {:?} x {}",
            data.shape, data.classes, model.input_shape, model.classes
        )));
    }
    let want = if cfg.mode == TrainMode::Ann { Mode::Ann } else { Mode::Snn };
    if model.mode != want {
        return Err(Error::Contract(format!("{} training needs a {:?} model", cfg.mode.name(), want)));
    }
    if want == Mode::Snn {
        model.time_steps = cfg.time_steps;
        model.gamma = cfg.gamma;
        model.detach_reset = cfg.detach_reset;
    }

    let mut opt = Sgd::new(model, cfg);
    let mut noise = NoiseState::zeros(cfg.batch_size, &data.shape);
    let train_eval = data.slice(0..cfg.train_eval_samples.min(data.len()));
    let mut report = TrainReport { epochs: Vec::new(), peak_stored_steps: 0, invariant_checks: 0 };

    for epoch in 0..cfg.epochs {
        let lr = cfg.lr.rate(epoch, cfg.epochs);
        let order = shuffled(data.len(), cfg.seed, epoch);
        let mut ctx = EpochCtx { loss_sum: 0.0, loss_n: 0, updates: 0, simulated: 0 };
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            train_batch(model, data, idx, cfg, &mut opt, &mut noise, lr, epoch, b, &mut ctx, &mut report, hook)?;
        }
        let stats = EpochStats {
            epoch,
            mode: cfg.mode,
            train_acc: accuracy(model, &train_eval)?,
            val_acc: val.map(|v| accuracy(model, v)).transpose()?,
            loss: ctx.loss_sum / ctx.loss_n.max(1) as f64,
            lr,
            kappa_saturation: if cfg.mode.is_periodic() { noise.saturation(cfg.eps_t) } else { 0.0 },
            updates: ctx.updates,
            simulated_steps: ctx.simulated,
        };
        hook.on_epoch(&stats);
        report.epochs.push(stats);
    }
    Ok(report)
}

struct EpochCtx {
    loss_sum: f64,
    loss_n: usize,
    updates: usize,
    simulated: usize,
}

fn shuffled(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut r = rng::stream(seed, &[rng::TAG_SHUFFLE, epoch as u64]);
    for i in (1..n).rev() {
        let j = r.random_range(0..=i);
        order.swap(i, j);
    }
    order
}

#[allow(clippy::too_many_arguments)]
fn train_batch(
    model: &mut Model,
    data: &Dataset,
    idx: &[usize],
    cfg: &TrainConfig,
    opt: &mut Sgd,
    noise: &mut NoiseState,
    lr: f64,
    epoch: usize,
    batch: usize,
    ctx: &mut EpochCtx,
    report: &mut TrainReport,
    hook: &mut dyn TrainHook,
) -> Result<()> {
    let steps = cfg.period_length();
    let need_input_grad = cfg.mode == TrainMode::SnnHire;
    let mut carried: Vec<Option<Vec<NeuronState>>> = vec![None; idx.len()];
    // A short final batch truncates the noise slots; the next full batch
    // zero-extends them again.
    noise.kappa.resize(idx.len(), Tensor::zeros(&data.shape));

    for period in 0..cfg.updates_per_batch() {
        if cfg.mode == TrainMode::SnnGaussian {
            draw_gaussian(noise, cfg, epoch, batch, period)?;
        }
        let kappa_before = noise.kappa.clone();
        let mut grads = Gradients::zeros_like(model);
        let mut input_grads = Vec::with_capacity(idx.len());
        let mut loss_sum = 0.0;
        let mut stored = 0;

        for (slot, &i) in idx.iter().enumerate() {
            let x = if cfg.mode.is_periodic() {
                let k = &noise.kappa[slot];
                check_kappa(k, cfg.eps_t)?;
                let x = data.images[i].zip_map(k, |a, b| (a + b).clamp(0.0, 1.0))?;
                check_pixels(&x)?;
                report.invariant_checks += 1;
                x
            } else {
                data.images[i].clone()
            };
            let seed = rng::derive(cfg.seed, &[rng::TAG_DROPOUT, epoch as u64, batch as u64, slot as u64, period as u64]);
            let opts = RunOptions {
                steps,
                encoder: Encoder::Direct,
                initial_states: carried[slot].as_deref(),
                ..RunOptions::training(steps, seed)
            };
            let run = model.run(&x, &opts)?;
            stored = stored.max(run.stored_steps());
            let (loss, gl) = softmax_cross_entropy(&run.logits, data.labels[i])?;
            if !loss.is_finite() {
                return Err(Error::Diverged(format!("loss {} at epoch {} batch {}", loss, epoch, batch)));
            }
            loss_sum += loss;
            let g = model.backward(&run, &gl, need_input_grad)?;
            grads.accumulate(&g)?;
            if need_input_grad {
                input_grads.push(g.input.ok_or_else(|| Error::Contract("missing input gradient".into()))?);
            }
            if cfg.carry_membrane {
                carried[slot] = Some(run.final_states);
            }
        }

        grads.scale(1.0 / idx.len() as f64);
        if !grads.all_finite() {
            return Err(Error::Diverged(format!("non-finite gradient at epoch {} batch {}", epoch, batch)));
        }
        if need_input_grad {
            for (k, g) in noise.kappa.iter_mut().zip(&input_grads) {
                *k = k.zip_map(g, |kv, gv| (kv + cfg.eps_s * crate::attacks::sign(gv)).clamp(-cfg.eps_t, cfg.eps_t))?;
            }
        }
        opt.step(model, &grads, lr)?;

        report.peak_stored_steps = report.peak_stored_steps.max(stored);
        ctx.loss_sum += loss_sum / idx.len() as f64;
        ctx.loss_n += 1;
        ctx.updates += 1;
        ctx.simulated += steps * idx.len();
        hook.on_period(&PeriodEvent {
            epoch,
            batch,
            period,
            kappa_before: &kappa_before,
            kappa_after: &noise.kappa,
            stored_steps: stored,
            loss: loss_sum / idx.len() as f64,
            model,
        });
    }
    Ok(())
}

fn draw_gaussian(noise: &mut NoiseState, cfg: &TrainConfig, epoch: usize, batch: usize, period: usize) -> Result<()> {
    let dist = Normal::new(0.0, cfg.eps_s).map_err(|e| config_err!("gaussian noise: {}", e))?;
    let mut r = rng::stream(cfg.seed, &[rng::TAG_GAUSS, epoch as u64, batch as u64, period as u64]);
    for k in noise.kappa.iter_mut() {
        for v in k.data_mut() {
            *v = dist.sample(&mut r).clamp(-cfg.eps_t, cfg.eps_t);
        }
    }
    Ok(())
}

fn check_kappa(k: &Tensor, bound: f64) -> Result<()> {
    if k.data().iter().any(|v| !(v.abs() <= bound)) {
        return Err(Error::Invariant(format!("noise outside +-{}", bound)));
    }
    Ok(())
}

fn check_pixels(x: &Tensor) -> Result<()> {
    if x.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Invariant("perturbed input left [0, 1]".into()));
    }
    Ok(())
}
