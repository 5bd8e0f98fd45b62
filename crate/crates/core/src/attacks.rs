//! L-infinity gradient-sign attacks (FGSM, PGD) and the white-box /
//! black-box evaluation harnesses built on them.

use alloc::vec::Vec;
use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{config_err, input_err, Result};
use crate::model::{softmax_cross_entropy, Encoder, InputEncoding, Mode, Model, RunOptions};
use crate::rng;
use crate::tensorops::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackFamily {
    Fgsm,
    Pgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    pub family: AttackFamily,
    /// L-infinity radius in pixel units.
    pub epsilon: f64,
    /// PGD step size.
    pub alpha: f64,
    /// PGD iterations `K`.
    pub iterations: usize,
    /// Start PGD from a uniform point in the epsilon box.
    pub random_start: bool,
    pub seed: u64,
}

impl AttackConfig {
    pub fn fgsm(epsilon: f64) -> Self {
        Self { family: AttackFamily::Fgsm, epsilon, alpha: epsilon, iterations: 1, random_start: false, seed: 0 }
    }

    pub fn pgd(epsilon: f64, alpha: f64, iterations: usize) -> Self {
        Self { family: AttackFamily::Pgd, epsilon, alpha, iterations, random_start: false, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) {
            return Err(config_err!("epsilon must be non-negative, got {}", self.epsilon));
        }
        if self.family == AttackFamily::Pgd && (!(self.alpha > 0.0) || self.iterations == 0) {
            return Err(config_err!("PGD needs alpha > 0 and K >= 1"));
        }
        Ok(())
    }
}

/// Anything with logits and a loss gradient w.r.t. its input.
pub trait Classifier {
    fn input_shape(&self) -> &[usize];
    fn classes(&self) -> usize;
    fn logits(&self, x: &Tensor) -> Result<Tensor>;
    /// Cross-entropy loss and its gradient w.r.t. `x`, in evaluation mode.
    fn loss_and_input_grad(&self, x: &Tensor, label: usize) -> Result<(f64, Tensor)>;

    fn predict(&self, x: &Tensor) -> Result<usize> {
        Ok(self.logits(x)?.argmax())
    }
}

impl Classifier for Model {
    fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    fn classes(&self) -> usize {
        self.classes
    }

    fn logits(&self, x: &Tensor) -> Result<Tensor> {
        Model::logits(self, x)
    }

    fn loss_and_input_grad(&self, x: &Tensor, label: usize) -> Result<(f64, Tensor)> {
        if label >= self.classes {
            return Err(input_err!("label {} out of range for {} classes", label, self.classes));
        }
        let encoders: Vec<Encoder> = match (self.mode, self.encoding) {
            (Mode::Snn, InputEncoding::Poisson { seed, samples }) => {
                (0..samples.max(1)).map(|k| Encoder::Poisson { seed: rng::derive(seed, &[k as u64]) }).collect()
            }
            _ => alloc::vec![Encoder::Direct],
        };
        let mut loss = 0.0;
        let mut grad = Tensor::zeros(x.shape());
        for &encoder in &encoders {
            let opts = RunOptions { encoder, record: true, ..RunOptions::inference(self.steps()) };
            let run = self.run(x, &opts)?;
            let (l, gl) = softmax_cross_entropy(&run.logits, label)?;
            let g = self.backward(&run, &gl, true)?;
            loss += l;
            grad.add_assign(g.input.as_ref().expect("requested"))?;
        }
        let k = encoders.len() as f64;
        grad.scale(1.0 / k);
        Ok((loss / k, grad))
    }
}

/// Gradient of the cross-entropy loss w.r.t. each input pixel. For SNNs this
/// is the sum of the per-step input gradients.
pub fn input_gradient<C: Classifier + ?Sized>(model: &C, x: &Tensor, label: usize) -> Result<Tensor> {
    Ok(model.loss_and_input_grad(x, label)?.1)
}

#[inline]
pub(crate) fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Projects `v` into the epsilon box around `x0` and the pixel range. The
/// box is enforced on the computed difference, which plain clamping can miss
/// by one ulp.
#[inline]
pub(crate) fn project(x0: f64, v: f64, eps: f64) -> f64 {
    let mut a = v.clamp(x0 - eps, x0 + eps);
    while a - x0 > eps {
        a = a.next_down();
    }
    while x0 - a > eps {
        a = a.next_up();
    }
    a.clamp(0.0, 1.0)
}

/// `clip(x + eps * sign(grad), 0, 1)`
pub fn fgsm<C: Classifier + ?Sized>(model: &C, x: &Tensor, label: usize, cfg: &AttackConfig) -> Result<Tensor> {
    cfg.validate()?;
    if cfg.epsilon == 0.0 {
        return Ok(x.clone());
    }
    let g = input_gradient(model, x, label)?;
    x.zip_map(&g, |xv, gv| project(xv, xv + cfg.epsilon * sign(gv), cfg.epsilon))
}

/// `K` projected sign-gradient steps of size `alpha` inside the epsilon box
/// around `x`, clipped to `[0, 1]` after every step.
pub fn pgd<C: Classifier + ?Sized>(model: &C, x: &Tensor, label: usize, cfg: &AttackConfig) -> Result<Tensor> {
    cfg.validate()?;
    let eps = cfg.epsilon;
    if eps == 0.0 {
        return Ok(x.clone());
    }
    let mut adv = x.clone();
    if cfg.random_start {
        let mut rng = rng::stream(cfg.seed, &[rng::TAG_RANDOM_START]);
        for v in adv.data_mut() {
            *v = project(*v, *v + rng.random_range(-eps..=eps), eps);
        }
    }
    for _ in 0..cfg.iterations {
        let g = input_gradient(model, &adv, label)?;
        let stepped = adv.zip_map(&g, |a, gv| a + cfg.alpha * sign(gv))?;
        adv = stepped.zip_map(x, |s, x0| project(x0, s, eps))?;
    }
    Ok(adv)
}

pub fn attack<C: Classifier + ?Sized>(model: &C, x: &Tensor, label: usize, cfg: &AttackConfig) -> Result<Tensor> {
    match cfg.family {
        AttackFamily::Fgsm => fgsm(model, x, label, cfg),
        AttackFamily::Pgd => pgd(model, x, label, cfg),
    }
}

/// Crafts on `source`, for evaluation on `target`.
pub fn blackbox_generate<S, T>(source: &S, target: &T, x: &Tensor, label: usize, cfg: &AttackConfig) -> Result<Tensor>
where
    S: Classifier + ?Sized,
    T: Classifier + ?Sized,
{
    if source.input_shape() != target.input_shape() {
        return Err(config_err!(
            "source input {:?} differs from target input {:?}",
            source.input_shape(),
            target.input_shape()
        ));
    }
    attack(source, x, label, cfg)
}

/// Per-image attack outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutcome {
    pub adversarial: Tensor,
    pub clean_correct: bool,
    pub adversarial_correct: bool,
}

/// Attacks every image of `data`, crafting on `source` (white-box when it is
/// `target` itself) and classifying with `target`.
pub fn attack_dataset<S, T>(source: &S, target: &T, data: &Dataset, cfg: &AttackConfig) -> Result<Vec<AttackOutcome>>
where
    S: Classifier + ?Sized,
    T: Classifier + ?Sized,
{
    let mut out = Vec::with_capacity(data.len());
    for (i, (x, &y)) in data.images.iter().zip(&data.labels).enumerate() {
        let cfg = AttackConfig { seed: rng::derive(cfg.seed, &[i as u64]), ..*cfg };
        let adv = blackbox_generate(source, target, x, y, &cfg)?;
        out.push(AttackOutcome {
            clean_correct: target.predict(x)? == y,
            adversarial_correct: target.predict(&adv)? == y,
            adversarial: adv,
        });
    }
    Ok(out)
}

/// Top-1 accuracy in percent on adversarial images.
pub fn robust_accuracy<S, T>(source: &S, target: &T, data: &Dataset, cfg: &AttackConfig) -> Result<f64>
where
    S: Classifier + ?Sized,
    T: Classifier + ?Sized,
{
    if data.is_empty() {
        return Err(input_err!("cannot evaluate on an empty dataset"));
    }
    let outcomes = attack_dataset(source, target, data, cfg)?;
    let hits = outcomes.iter().filter(|o| o.adversarial_correct).count();
    Ok(100.0 * hits as f64 / data.len() as f64)
}

/// The knob a sweep varies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Sweep {
    /// Attack bounds. With `scale_alpha`, PGD uses `alpha = 2.5 * eps / K`
    /// so that large boxes can be crossed in `K` steps.
    Epsilon { values: Vec<f64>, scale_alpha: bool },
    /// PGD iteration counts.
    Iterations(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub accuracy: f64,
}

/// Robust accuracy at every point of `sweep`, attacking `model` itself.
pub fn attack_sweep<C: Classifier + ?Sized>(
    model: &C,
    data: &Dataset,
    base: &AttackConfig,
    sweep: &Sweep,
) -> Result<Vec<SweepPoint>> {
    let points: Vec<(f64, AttackConfig)> = match sweep {
        Sweep::Epsilon { values, scale_alpha } => values
            .iter()
            .map(|&eps| {
                let mut cfg = AttackConfig { epsilon: eps, ..*base };
                if *scale_alpha && cfg.family == AttackFamily::Pgd && eps > 0.0 {
                    cfg.alpha = 2.5 * eps / cfg.iterations as f64;
                }
                (eps, cfg)
            })
            .collect(),
        Sweep::Iterations(ks) => ks
            .iter()
            .map(|&k| (k as f64, AttackConfig { family: AttackFamily::Pgd, iterations: k, ..*base }))
            .collect(),
    };
    if points.is_empty() {
        return Err(config_err!("sweep has no points"));
    }
    points
        .into_iter()
        .map(|(value, cfg)| Ok(SweepPoint { value, accuracy: robust_accuracy(model, model, data, &cfg)? }))
        .collect()
}
