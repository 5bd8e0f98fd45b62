use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::model::DEFAULT_GAMMA;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    Ann,
    SnnTraditional,
    SnnHire,
    SnnGaussian,
}

impl TrainMode {
    pub fn name(self) -> &'static str {
        match self {
            TrainMode::Ann => "ann",
            TrainMode::SnnTraditional => "snn-traditional",
            TrainMode::SnnHire => "snn-hire",
            TrainMode::SnnGaussian => "snn-gaussian",
        }
    }

    pub fn is_periodic(self) -> bool {
        matches!(self, TrainMode::SnnHire | TrainMode::SnnGaussian)
    }
}

/// Step decay: the rate is multiplied by `decay` once per milestone passed.
/// Milestones are fractions of the total epoch count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrSchedule {
    pub initial: f64,
    pub decay: f64,
    pub milestones: Vec<f64>,
}

impl LrSchedule {
    /// 0.01, divided by 10 after 150/180/210 of 240 epochs.
    pub fn ann() -> Self {
        Self { initial: 0.01, decay: 0.1, milestones: vec![150.0 / 240.0, 180.0 / 240.0, 210.0 / 240.0] }
    }

    /// 1e-4, divided by 5 at 60%, 80% and 90% of training.
    pub fn snn() -> Self {
        Self { initial: 1e-4, decay: 0.2, milestones: vec![0.6, 0.8, 0.9] }
    }

    pub fn with_initial(mut self, initial: f64) -> Self {
        self.initial = initial;
        self
    }

    /// Epoch index at which each milestone takes effect.
    pub fn milestone_epochs(&self, epochs: usize) -> Vec<usize> {
        self.milestones.iter().map(|&f| libm::round(f * epochs as f64) as usize).collect()
    }

    pub fn rate(&self, epoch: usize, epochs: usize) -> f64 {
        let passed = self.milestone_epochs(epochs).into_iter().filter(|&m| epoch >= m).count();
        let mut lr = self.initial;
        for _ in 0..passed {
            lr *= self.decay;
        }
        lr
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub mode: TrainMode,
    /// SNN time steps `T` per image.
    pub time_steps: usize,
    /// Number of periods `N` the `T` steps are split into.
    pub periods: usize,
    /// Noise step `eps_s` (Gaussian standard deviation in Gaussian mode).
    pub eps_s: f64,
    /// Noise bound `eps_t`.
    pub eps_t: f64,
    pub lr: LrSchedule,
    pub momentum: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub freeze_threshold: bool,
    pub freeze_leak: bool,
    pub gamma: f64,
    /// Keep membrane potentials across the periods of one batch.
    pub carry_membrane: bool,
    pub detach_reset: bool,
    pub seed: u64,
    /// Training images re-evaluated without noise for the epoch report.
    pub train_eval_samples: usize,
}

impl TrainConfig {
    pub fn ann(epochs: usize, seed: u64) -> Self {
        Self {
            mode: TrainMode::Ann,
            time_steps: 1,
            periods: 1,
            eps_s: 0.0,
            eps_t: 0.0,
            lr: LrSchedule::ann(),
            momentum: 0.0,
            weight_decay: 0.0,
            epochs,
            batch_size: 32,
            freeze_threshold: false,
            freeze_leak: false,
            gamma: DEFAULT_GAMMA,
            carry_membrane: false,
            detach_reset: false,
            seed,
            train_eval_samples: 256,
        }
    }

    /// Traditional SNN training defaults; `T = 6`.
    pub fn snn(mode: TrainMode, epochs: usize, seed: u64) -> Self {
        let (eps_s, periods) = if mode.is_periodic() { (0.013, 2) } else { (0.0, 1) };
        Self {
            mode,
            time_steps: 6,
            periods,
            eps_s,
            eps_t: eps_s,
            lr: LrSchedule::snn(),
            ..Self::ann(epochs, seed)
        }
    }

    /// Steps simulated per parameter update.
    pub fn period_length(&self) -> usize {
        match self.mode {
            TrainMode::Ann => 1,
            TrainMode::SnnTraditional => self.time_steps,
            TrainMode::SnnHire | TrainMode::SnnGaussian => self.time_steps / self.periods.max(1),
        }
    }

    /// Parameter updates per batch.
    pub fn updates_per_batch(&self) -> usize {
        if self.mode.is_periodic() {
            self.periods
        } else {
            1
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(config_err!("batch size must be positive"));
        }
        if self.mode != TrainMode::Ann && self.time_steps == 0 {
            return Err(config_err!("T must be at least 1"));
        }
        if self.mode.is_periodic() {
            if self.periods == 0 || self.time_steps / self.periods == 0 {
                return Err(config_err!(
                    "T = {} cannot be split into N = {} periods of at least one step",
                    self.time_steps,
                    self.periods
                ));
            }
            if !(self.eps_s >= 0.0) || !(self.eps_t >= self.eps_s) {
                return Err(config_err!("need eps_t >= eps_s >= 0, got eps_s = {}, eps_t = {}", self.eps_s, self.eps_t));
            }
        }
        if !(self.gamma > 0.0) {
            return Err(config_err!("gamma must be positive"));
        }
        if !(self.lr.initial >= 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(config_err!("invalid learning rate {} or momentum {}", self.lr.initial, self.momentum));
        }
        Ok(())
    }
}
