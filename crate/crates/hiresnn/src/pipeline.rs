//! The experiment stages shared by the CLI and the test suites.

use std::path::Path;

use hiresnn_core::attacks::{AttackConfig, AttackFamily};
use hiresnn_core::data::{synthetic_bars, Dataset, SyntheticConfig};
use hiresnn_core::metrics::evaluate;
use hiresnn_core::model::{convert_ann_to_snn, vgg_like, Mode, Model};
use hiresnn_core::training::{train, TrainConfig, TrainHook, TrainMode, TrainReport};

use crate::config::{DataConfig, ExperimentConfig};
use crate::dataset::{ingest, DataFormat};
use crate::error::{AppError, AppResult};
use crate::report::EvalRow;

fn cap(d: Dataset, n: usize) -> Dataset {
    if n == 0 || n >= d.len() {
        d
    } else {
        d.slice(0..n)
    }
}

/// Train and test splits. Synthetic data is generated in one pass and split;
/// file formats need a `test_path`, or the train file is split at
/// `train_samples`.
pub fn load_data(cfg: &DataConfig) -> AppResult<(Dataset, Dataset)> {
    if cfg.format == DataFormat::Synthetic {
        let samples = cfg.train_samples + cfg.test_samples;
        let all = synthetic_bars(&SyntheticConfig { samples, ..cfg.synthetic })?;
        return Ok(all.split_at(cfg.train_samples));
    }
    let path = cfg.path.as_deref().ok_or_else(|| AppError::Config("field `data.path`: required".into()))?;
    let train = ingest(path, cfg.labels.as_deref(), cfg.format, cfg.classes)?;
    match &cfg.test_path {
        Some(tp) => {
            let test = ingest(tp, cfg.test_labels.as_deref(), cfg.format, cfg.classes)?;
            Ok((cap(train, cfg.train_samples), cap(test, cfg.test_samples)))
        }
        None => {
            if cfg.train_samples == 0 || cfg.train_samples >= train.len() {
                return Err(AppError::Config("field `data.test_path`: required unless train_samples splits the file".into()));
            }
            let (a, b) = train.split_at(cfg.train_samples);
            Ok((a, cap(b, cfg.test_samples)))
        }
    }
}

pub fn build_ann(cfg: &ExperimentConfig, data: &Dataset) -> AppResult<Model> {
    let specs = vgg_like(&data.shape, data.classes, &cfg.model.channels, cfg.model.hidden, cfg.model.dropout)?;
    Ok(Model::new(&data.shape, data.classes, &specs, Mode::Ann, cfg.ann.seed)?)
}

pub fn train_ann_stage(
    cfg: &ExperimentConfig,
    train_set: &Dataset,
    test: &Dataset,
    hook: &mut dyn TrainHook,
) -> AppResult<(Model, TrainReport)> {
    let mut ann = build_ann(cfg, train_set)?;
    let tc = TrainConfig { mode: TrainMode::Ann, ..cfg.ann.clone() };
    let report = train(&mut ann, train_set, Some(test), &tc, hook)?;
    Ok((ann, report))
}

pub fn convert_stage(cfg: &ExperimentConfig, ann: &Model, train_set: &Dataset) -> AppResult<Model> {
    let n = cfg.convert.calibration.min(train_set.len());
    Ok(convert_ann_to_snn(ann, &train_set.images[..n], cfg.convert.percentile, cfg.snn.time_steps)?)
}

/// Fine-tunes a converted SNN under `tc.mode`.
pub fn train_snn_stage(
    init: &Model,
    tc: &TrainConfig,
    train_set: &Dataset,
    test: Option<&Dataset>,
    hook: &mut dyn TrainHook,
) -> AppResult<(Model, TrainReport)> {
    if tc.mode == TrainMode::Ann {
        return Err(AppError::Config("field `snn.mode`: must be a spiking mode".into()));
    }
    let mut snn = init.clone();
    let report = train(&mut snn, train_set, test, tc, hook)?;
    Ok((snn, report))
}

pub fn attack_name(a: &AttackConfig) -> &'static str {
    match a.family {
        AttackFamily::Fgsm => "fgsm",
        AttackFamily::Pgd => "pgd",
    }
}

/// Clean accuracy followed by one row per attack. With a `source`, the
/// perturbations are crafted on it (black-box); otherwise on `model`.
pub fn eval_rows(
    model: &Model,
    name: &str,
    source: Option<(&Model, &str)>,
    test: &Dataset,
    attacks: &[AttackConfig],
) -> AppResult<Vec<EvalRow>> {
    let clean = evaluate(model, test, None)?;
    let mut rows = vec![EvalRow {
        model: name.into(),
        attack: "clean".into(),
        source: name.into(),
        epsilon: 0.0,
        alpha: 0.0,
        iterations: 0,
        accuracy: clean.accuracy,
        samples: clean.samples,
        pd_mean: None,
        pd_max: None,
    }];
    for a in attacks {
        let (acc, pd_mean, pd_max, src) = match source {
            None => {
                let r = evaluate(model, test, Some(a))?;
                let pd = r.pd.expect("attacked");
                (r.accuracy, pd.mean_input, pd.max_input, name)
            }
            Some((src, src_name)) => {
                let outcomes = hiresnn_core::attacks::attack_dataset(src, model, test, a)?;
                let hits = outcomes.iter().filter(|o| o.adversarial_correct).count();
                let pds: Vec<f64> = outcomes
                    .iter()
                    .zip(&test.images)
                    .map(|(o, x)| hiresnn_core::metrics::perturbation_distance(x, &o.adversarial))
                    .collect::<Result<_, _>>()?;
                let n = test.len() as f64;
                (
                    100.0 * hits as f64 / n,
                    pds.iter().sum::<f64>() / n,
                    pds.iter().copied().fold(0.0, f64::max),
                    src_name,
                )
            }
        };
        rows.push(EvalRow {
            model: name.into(),
            attack: attack_name(a).into(),
            source: src.into(),
            epsilon: a.epsilon,
            alpha: if a.family == AttackFamily::Pgd { a.alpha } else { a.epsilon },
            iterations: if a.family == AttackFamily::Pgd { a.iterations } else { 1 },
            accuracy: acc,
            samples: test.len(),
            pd_mean: Some(pd_mean),
            pd_max: Some(pd_max),
        });
    }
    Ok(rows)
}

/// File stem used to name reports derived from a checkpoint.
pub fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into())
}
