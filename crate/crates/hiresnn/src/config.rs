//! Experiment configuration. A TOML file is merged over the built-in desk
//! defaults; command-line flags are applied on top of the result.

use std::path::{Path, PathBuf};

use hiresnn_core::attacks::AttackConfig;
use hiresnn_core::data::SyntheticConfig;
use hiresnn_core::metrics::ChecklistConfig;
use hiresnn_core::training::{TrainConfig, TrainMode};
use serde::{Deserialize, Serialize};

use crate::dataset::DataFormat;
use crate::error::{AppError, AppResult};

/// Environment variable that overrides the configured output directory.
pub const OUT_ENV: &str = "HIRESNN_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub format: DataFormat,
    pub path: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    pub classes: usize,
    /// Caps on the number of images used; 0 means all.
    pub train_samples: usize,
    pub test_samples: usize,
    pub synthetic: SyntheticConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchConfig {
    /// Output channels of each conv/spike/pool stage.
    pub channels: Vec<usize>,
    pub hidden: usize,
    pub dropout: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvertConfig {
    pub percentile: f64,
    /// Training images used to calibrate thresholds.
    pub calibration: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub data: DataConfig,
    pub model: ArchConfig,
    pub ann: TrainConfig,
    pub snn: TrainConfig,
    pub convert: ConvertConfig,
    pub attacks: Vec<AttackConfig>,
    pub checklist: ChecklistConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk(0)
    }
}

impl ExperimentConfig {
    /// Desk-scale setup: synthetic 28x28 two-class task, two conv stages,
    /// T = 6, N = 2, eps_s = eps_t = 0.013.
    pub fn desk(seed: u64) -> Self {
        let mut ann = TrainConfig::ann(8, seed);
        ann.momentum = 0.9;
        let mut snn = TrainConfig::snn(TrainMode::SnnHire, 4, seed);
        snn.lr = snn.lr.with_initial(0.005);
        snn.momentum = 0.9;
        Self {
            seed,
            out_dir: PathBuf::from("out"),
            data: DataConfig {
                format: DataFormat::Synthetic,
                path: None,
                labels: None,
                test_path: None,
                test_labels: None,
                classes: 2,
                train_samples: 2000,
                test_samples: 500,
                synthetic: SyntheticConfig { seed, ..SyntheticConfig::default() },
            },
            model: ArchConfig { channels: vec![8, 16], hidden: 64, dropout: 0.0 },
            ann,
            snn,
            convert: ConvertConfig { percentile: 99.7, calibration: 64 },
            attacks: vec![AttackConfig::fgsm(8.0 / 255.0), AttackConfig::pgd(8.0 / 255.0, 0.01, 7)],
            checklist: ChecklistConfig::default(),
        }
    }

    /// Parses TOML text merged over the defaults. Errors name the field.
    pub fn from_toml(text: &str) -> AppResult<Self> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| AppError::Config(e.to_string()))?;
        // A top-level seed reseeds every stage; per-stage seeds in the file
        // still override it.
        let seed = match user.get("seed") {
            Some(toml::Value::Integer(s)) if *s >= 0 => *s as u64,
            _ => 0,
        };
        let mut base = match toml::Value::try_from(Self::desk(seed)) {
            Ok(toml::Value::Table(t)) => t,
            _ => unreachable!("config serializes to a table"),
        };
        merge(&mut base, user);
        let value = toml::Value::Table(base);
        serde_path_to_error::deserialize(value)
            .map_err(|e| AppError::Config(format!("field `{}`: {}", e.path(), e.inner())))
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::Config(format!("cannot read {}: {}", path.display(), e)))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Sets the root seed and every seed derived from it.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.ann.seed = seed;
        self.snn.seed = seed;
        self.data.synthetic.seed = seed;
    }

    pub fn validate(&self) -> AppResult<()> {
        if self.model.channels.is_empty() && self.model.hidden == 0 {
            return Err(AppError::Config("field `model`: needs at least one layer".into()));
        }
        if !(0.0..=100.0).contains(&self.convert.percentile) || self.convert.calibration == 0 {
            return Err(AppError::Config("field `convert`: percentile in [0, 100] and calibration >= 1".into()));
        }
        self.ann.validate().map_err(|e| AppError::Config(format!("field `ann`: {}", e)))?;
        self.snn.validate().map_err(|e| AppError::Config(format!("field `snn`: {}", e)))?;
        for (i, a) in self.attacks.iter().enumerate() {
            a.validate().map_err(|e| AppError::Config(format!("field `attacks[{}]`: {}", i, e)))?;
        }
        Ok(())
    }
}

fn merge(base: &mut toml::Table, user: toml::Table) {
    for (k, v) in user {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) => merge(b, u),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Parses `8/255`, `0.5` or `1e-3`.
pub fn parse_number(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n.trim().parse().map_err(|_| format!("bad numerator in '{}'", s))?;
            let d: f64 = d.trim().parse().map_err(|_| format!("bad denominator in '{}'", s))?;
            if d == 0.0 {
                return Err(format!("zero denominator in '{}'", s));
            }
            n / d
        }
        None => s.parse().map_err(|_| format!("'{}' is not a number", s))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{}' is not finite", s))
    }
}

/// Parses a comma list (`0,2/255,8/255`) or a range `start:end[:count]`
/// with `count` evenly spaced points (5 by default).
pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() > 3 {
            return Err(format!("range '{}' has too many parts", s));
        }
        let (a, b) = (parse_number(parts[0])?, parse_number(parts[1])?);
        let n: usize = match parts.get(2) {
            Some(c) => c.trim().parse().map_err(|_| format!("bad point count in '{}'", s))?,
            None => 5,
        };
        if n < 2 {
            return Err(format!("range '{}' needs at least two points", s));
        }
        Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
    } else {
        s.split(',').map(parse_number).collect()
    }
}
