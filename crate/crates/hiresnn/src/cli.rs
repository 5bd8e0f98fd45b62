//! Command-line surface. Precedence: built-in defaults < `--config` file <
//! `HIRESNN_OUT` (output directory only) < flags.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hiresnn_core::attacks::{attack_sweep, AttackConfig, Sweep};
use hiresnn_core::metrics::{
    energy, flops, layer_report, obfuscation_checklist, profile, EnergyConstants, EnergyScheme, Precision,
};
use hiresnn_core::model::{InputEncoding, Mode};
use hiresnn_core::training::{accuracy, TrainConfig, TrainMode};
use serde::Serialize;

use crate::checkpoint::Checkpoint;
use crate::config::{parse_list, parse_number, ExperimentConfig, OUT_ENV};
use crate::dataset::DataFormat;
use crate::error::{AppError, AppResult};
use crate::pipeline::{self, stem};
use crate::report::{self, SweepRow, Table};

#[derive(Debug, Parser)]
#[command(name = "hiresnn", version, about = "Train, convert, attack and profile spiking networks")]
pub struct Cli {
    /// TOML experiment config merged over the built-in desk defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the config and HIRESNN_OUT).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long = "data-format", global = true, value_enum)]
    pub format: Option<DataFormat>,
    #[arg(long = "data", global = true)]
    pub path: Option<PathBuf>,
    #[arg(long, global = true)]
    pub labels: Option<PathBuf>,
    #[arg(long = "test-data", global = true)]
    pub test_path: Option<PathBuf>,
    #[arg(long = "test-labels", global = true)]
    pub test_labels: Option<PathBuf>,
    #[arg(long, global = true)]
    pub classes: Option<usize>,
    #[arg(long = "train-samples", global = true)]
    pub train_samples: Option<usize>,
    #[arg(long = "test-samples", global = true)]
    pub test_samples: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SnnMode {
    Traditional,
    Hire,
    Gaussian,
}

impl From<SnnMode> for TrainMode {
    fn from(m: SnnMode) -> Self {
        match m {
            SnnMode::Traditional => TrainMode::SnnTraditional,
            SnnMode::Hire => TrainMode::SnnHire,
            SnnMode::Gaussian => TrainMode::SnnGaussian,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Fgsm,
    Pgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PrecisionArg {
    Fp32,
    Int32,
}

fn number(s: &str) -> Result<f64, String> {
    parse_number(s)
}

/// Optimizer flags shared by both training commands.
#[derive(Debug, Args)]
pub struct OptArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, value_parser = number)]
    pub lr: Option<f64>,
    #[arg(long, value_parser = number)]
    pub momentum: Option<f64>,
    #[arg(long = "weight-decay", value_parser = number)]
    pub weight_decay: Option<f64>,
    #[arg(long = "batch-size")]
    pub batch_size: Option<usize>,
}

impl OptArgs {
    fn apply(&self, t: &mut TrainConfig) {
        if let Some(v) = self.epochs {
            t.epochs = v;
        }
        if let Some(v) = self.lr {
            t.lr.initial = v;
        }
        if let Some(v) = self.momentum {
            t.momentum = v;
        }
        if let Some(v) = self.weight_decay {
            t.weight_decay = v;
        }
        if let Some(v) = self.batch_size {
            t.batch_size = v;
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the ReLU network that is later converted.
    TrainAnn {
        #[command(flatten)]
        opt: OptArgs,
        #[arg(long, default_value = "ann.ckpt")]
        save: PathBuf,
    },
    /// Convert a trained ANN into an SNN with calibrated thresholds.
    Convert {
        #[arg(long, default_value = "ann.ckpt")]
        ann: PathBuf,
        #[arg(long = "T")]
        t: Option<usize>,
        #[arg(long, value_parser = number)]
        percentile: Option<f64>,
        #[arg(long)]
        calibration: Option<usize>,
        #[arg(long, default_value = "snn_init.ckpt")]
        save: PathBuf,
    },
    /// Fine-tune a converted SNN (traditional, crafted-noise or Gaussian).
    TrainSnn {
        #[arg(long, default_value = "snn_init.ckpt")]
        init: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<SnnMode>,
        #[arg(long = "T")]
        t: Option<usize>,
        #[arg(long = "N")]
        n: Option<usize>,
        #[arg(long = "eps-s", value_parser = number)]
        eps_s: Option<f64>,
        #[arg(long = "eps-t", value_parser = number)]
        eps_t: Option<f64>,
        #[arg(long, value_parser = number)]
        gamma: Option<f64>,
        #[arg(long = "freeze-vt")]
        freeze_vt: bool,
        #[arg(long = "freeze-lk")]
        freeze_lk: bool,
        #[arg(long = "carry-membrane")]
        carry_membrane: bool,
        #[command(flatten)]
        opt: OptArgs,
        /// Defaults to `snn_<mode>.ckpt`.
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Attack a model (white-box, or black-box with `--source`).
    Attack {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        source: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "fgsm")]
        family: Family,
        #[arg(long, value_parser = number, default_value = "8/255")]
        eps: f64,
        #[arg(long, value_parser = number, default_value = "0.01")]
        alpha: f64,
        #[arg(long = "K", default_value_t = 7)]
        k: usize,
        #[arg(long = "random-start")]
        random_start: bool,
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Clean and attacked accuracy, activity and optionally the masking checklist.
    Eval {
        #[arg(long)]
        model: PathBuf,
        /// Black-box source for the attacks and the checklist.
        #[arg(long)]
        source: Option<PathBuf>,
        #[arg(long)]
        checklist: bool,
    },
    /// Accuracy across attack bounds, PGD iterations or the training noise step.
    Sweep {
        /// Model to attack (eps / K sweeps).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Converted SNN to retrain for an eps-s sweep.
        #[arg(long)]
        init: Option<PathBuf>,
        /// `a,b,c` or `start:stop[:count]`; fractions like `8/255` allowed.
        #[arg(long)]
        eps: Option<String>,
        #[arg(long = "K", value_delimiter = ',')]
        k: Option<Vec<usize>>,
        #[arg(long = "eps-s")]
        eps_s: Option<String>,
        #[arg(long = "alpha", value_parser = number)]
        alpha: Option<f64>,
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Per-layer FLOPs and compute energy.
    EnergyReport {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value = "fp32")]
        precision: PrecisionArg,
    },
    /// Row-wise deltas between two CSV reports.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value = "compare.csv")]
        save: PathBuf,
    },
}

/// Fully resolved settings for one invocation.
pub struct Context {
    pub cfg: ExperimentConfig,
    pub out: PathBuf,
}

impl Context {
    pub fn resolve(cli: &Cli) -> AppResult<Self> {
        let mut cfg = match &cli.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = cli.seed {
            cfg.set_seed(s);
        }
        let d = &cli.data;
        if let Some(f) = d.format {
            cfg.data.format = f;
        }
        if d.path.is_some() {
            cfg.data.path = d.path.clone();
        }
        if d.labels.is_some() {
            cfg.data.labels = d.labels.clone();
        }
        if d.test_path.is_some() {
            cfg.data.test_path = d.test_path.clone();
        }
        if d.test_labels.is_some() {
            cfg.data.test_labels = d.test_labels.clone();
        }
        if let Some(c) = d.classes {
            cfg.data.classes = c;
        }
        if let Some(n) = d.train_samples {
            cfg.data.train_samples = n;
        }
        if let Some(n) = d.test_samples {
            cfg.data.test_samples = n;
        }
        let out = cli
            .out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| cfg.out_dir.clone());
        cfg.out_dir = out.clone();
        Ok(Self { cfg, out })
    }

    /// Inputs are looked up as given, then inside the output directory.
    pub fn input(&self, p: &Path) -> PathBuf {
        if p.exists() || p.is_absolute() {
            p.to_path_buf()
        } else {
            self.out.join(p)
        }
    }

    pub fn output(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.out.join(p)
        }
    }
}

fn write_csv<T: Serialize>(ctx: &Context, name: &str, rows: &[T]) -> AppResult<PathBuf> {
    let path = ctx.output(Path::new(name));
    report::write_rows(&path, rows)?;
    Ok(path)
}

/// Runs one command and returns the files it wrote.
pub fn run(cli: Cli) -> AppResult<Vec<PathBuf>> {
    let mut ctx = Context::resolve(&cli)?;
    let mut written = Vec::new();
    match cli.command {
        Command::TrainAnn { opt, save } => {
            opt.apply(&mut ctx.cfg.ann);
            ctx.cfg.validate()?;
            let (train_set, test) = pipeline::load_data(&ctx.cfg.data)?;
            let (ann, rep) = pipeline::train_ann_stage(&ctx.cfg, &train_set, &test, &mut ())?;
            let path = ctx.output(&save);
            Checkpoint::new(ann).with_meta("stage", "ann").with_meta("seed", ctx.cfg.seed).save(&path)?;
            written.push(path);
            let csv = ctx.output(Path::new(&format!("{}_epochs.csv", stem(&save))));
            report::write_epochs(&csv, &rep.epochs)?;
            written.push(csv);
        }
        Command::Convert { ann, t, percentile, calibration, save } => {
            if let Some(t) = t {
                ctx.cfg.snn.time_steps = t;
            }
            if let Some(p) = percentile {
                ctx.cfg.convert.percentile = p;
            }
            if let Some(c) = calibration {
                ctx.cfg.convert.calibration = c;
            }
            ctx.cfg.validate()?;
            let ann = Checkpoint::load(&ctx.input(&ann))?.model;
            if ann.mode != Mode::Ann {
                return Err(AppError::Config("convert needs an ANN checkpoint".into()));
            }
            let (train_set, _) = pipeline::load_data(&ctx.cfg.data)?;
            let snn = pipeline::convert_stage(&ctx.cfg, &ann, &train_set)?;
            let path = ctx.output(&save);
            Checkpoint::new(snn).with_meta("stage", "converted").save(&path)?;
            written.push(path);
        }
        Command::TrainSnn {
            init,
            mode,
            t,
            n,
            eps_s,
            eps_t,
            gamma,
            freeze_vt,
            freeze_lk,
            carry_membrane,
            opt,
            save,
        } => {
            let tc = &mut ctx.cfg.snn;
            if let Some(m) = mode {
                tc.mode = m.into();
            }
            if let Some(v) = t {
                tc.time_steps = v;
            }
            if let Some(v) = n {
                tc.periods = v;
            }
            if let Some(v) = eps_s {
                tc.eps_s = v;
                if eps_t.is_none() && tc.eps_t < v {
                    tc.eps_t = v;
                }
            }
            if let Some(v) = eps_t {
                tc.eps_t = v;
            }
            if tc.mode == TrainMode::SnnTraditional {
                tc.periods = 1;
            }
            if let Some(v) = gamma {
                tc.gamma = v;
            }
            tc.freeze_threshold |= freeze_vt;
            tc.freeze_leak |= freeze_lk;
            tc.carry_membrane |= carry_membrane;
            opt.apply(tc);
            ctx.cfg.validate()?;
            let init = Checkpoint::load(&ctx.input(&init))?.model;
            let (train_set, test) = pipeline::load_data(&ctx.cfg.data)?;
            let tc = ctx.cfg.snn.clone();
            let (snn, rep) = pipeline::train_snn_stage(&init, &tc, &train_set, Some(&test), &mut ())?;
            let save = save.unwrap_or_else(|| PathBuf::from(format!("snn_{}.ckpt", short_mode(tc.mode))));
            let path = ctx.output(&save);
            Checkpoint::new(snn)
                .with_meta("stage", tc.mode.name())
                .with_meta("seed", tc.seed)
                .with_meta("peak_stored_steps", rep.peak_stored_steps)
                .save(&path)?;
            written.push(path);
            let csv = ctx.output(Path::new(&format!("{}_epochs.csv", stem(&save))));
            report::write_epochs(&csv, &rep.epochs)?;
            written.push(csv);
        }
        Command::Attack { model, source, family, eps, alpha, k, random_start, save } => {
            let cfg = AttackConfig {
                random_start,
                seed: ctx.cfg.seed,
                ..match family {
                    Family::Fgsm => AttackConfig::fgsm(eps),
                    Family::Pgd => AttackConfig::pgd(eps, alpha, k),
                }
            };
            cfg.validate()?;
            let target = Checkpoint::load(&ctx.input(&model))?.model;
            let src = source.as_ref().map(|s| Checkpoint::load(&ctx.input(s))).transpose()?;
            let (_, test) = pipeline::load_data(&ctx.cfg.data)?;
            let name = stem(&model);
            let src_ref = src.as_ref().map(|c| (&c.model, stem(source.as_ref().expect("set"))));
            let rows = pipeline::eval_rows(&target, &name, src_ref.as_ref().map(|(m, s)| (*m, s.as_str())), &test, &[cfg])?;
            let file = save.unwrap_or_else(|| PathBuf::from(format!("attack_{}_{}.csv", name, pipeline::attack_name(&cfg))));
            written.push(write_csv(&ctx, &file.to_string_lossy(), &rows)?);
        }
        Command::Eval { model, source, checklist } => {
            ctx.cfg.validate()?;
            let target = Checkpoint::load(&ctx.input(&model))?.model;
            let src = source.as_ref().map(|s| Checkpoint::load(&ctx.input(s))).transpose()?;
            let (_, test) = pipeline::load_data(&ctx.cfg.data)?;
            let name = stem(&model);
            let src_name = source.as_ref().map(|s| stem(s));
            let src_ref = src.as_ref().map(|c| (&c.model, src_name.as_deref().expect("set")));
            let rows = pipeline::eval_rows(&target, &name, src_ref, &test, &ctx.cfg.attacks)?;
            written.push(write_csv(&ctx, &format!("eval_{}.csv", name), &rows)?);
            let scheme = scheme_for(&target);
            let act = profile(&target, &test)?;
            let layers = layer_report(&target, Some(&act), &EnergyConstants::default(), scheme, Precision::Fp32)?;
            written.push(write_csv(&ctx, &format!("activity_{}.csv", name), &layers)?);
            if checklist {
                let src = src
                    .as_ref()
                    .ok_or_else(|| AppError::Config("--checklist needs --source for the black-box test".into()))?;
                let cc = hiresnn_core::metrics::ChecklistConfig { seed: ctx.cfg.seed, ..ctx.cfg.checklist.clone() };
                let rows = obfuscation_checklist(&target, &src.model, &test, &cc)?;
                written.push(write_csv(&ctx, &format!("checklist_{}.csv", name), &rows)?);
            }
        }
        Command::Sweep { model, init, eps, k, eps_s, alpha, save } => {
            ctx.cfg.validate()?;
            let (train_set, test) = pipeline::load_data(&ctx.cfg.data)?;
            let mut rows = Vec::new();
            let knob;
            let list = |s: Option<String>| s.map(|s| parse_list(&s).map_err(AppError::Config)).transpose();
            let (eps, eps_s) = (list(eps)?, list(eps_s)?);
            if let Some(values) = eps_s {
                knob = "eps_s";
                let init = init.ok_or_else(|| AppError::Config("--eps-s sweep needs --init".into()))?;
                let init = Checkpoint::load(&ctx.input(&init))?.model;
                for v in values {
                    let tc = TrainConfig { eps_s: v, eps_t: ctx.cfg.snn.eps_t.max(v), ..ctx.cfg.snn.clone() };
                    let (snn, _) = pipeline::train_snn_stage(&init, &tc, &train_set, None, &mut ())?;
                    rows.push(SweepRow { knob: knob.into(), value: v, attack: "clean".into(), accuracy: accuracy(&snn, &test)? });
                    for r in pipeline::eval_rows(&snn, "sweep", None, &test, &ctx.cfg.attacks)?.into_iter().skip(1) {
                        rows.push(SweepRow { knob: knob.into(), value: v, attack: r.attack, accuracy: r.accuracy });
                    }
                }
            } else {
                let model = model.ok_or_else(|| AppError::Config("eps and K sweeps need --model".into()))?;
                let m = Checkpoint::load(&ctx.input(&model))?.model;
                let base = AttackConfig {
                    seed: ctx.cfg.seed,
                    ..AttackConfig::pgd(ctx.cfg.checklist.epsilon, alpha.unwrap_or(ctx.cfg.checklist.pgd_alpha), ctx.cfg.checklist.pgd_iterations)
                };
                let sweep = match (eps, k) {
                    (Some(values), None) => {
                        knob = "eps";
                        Sweep::Epsilon { values, scale_alpha: alpha.is_none() }
                    }
                    (None, Some(ks)) => {
                        knob = "K";
                        Sweep::Iterations(ks)
                    }
                    _ => return Err(AppError::Config("give exactly one of --eps, --K, --eps-s".into())),
                };
                for p in attack_sweep(&m, &test, &base, &sweep)? {
                    rows.push(SweepRow { knob: knob.into(), value: p.value, attack: "pgd".into(), accuracy: p.accuracy });
                }
            }
            let file = save.unwrap_or_else(|| PathBuf::from(format!("sweep_{}.csv", knob)));
            written.push(write_csv(&ctx, &file.to_string_lossy(), &rows)?);
        }
        Command::EnergyReport { model, precision } => {
            let m = Checkpoint::load(&ctx.input(&model))?.model;
            let (_, test) = pipeline::load_data(&ctx.cfg.data)?;
            let p = match precision {
                PrecisionArg::Fp32 => Precision::Fp32,
                PrecisionArg::Int32 => Precision::Int32,
            };
            let c = EnergyConstants::default();
            let name = stem(&model);
            let act = if m.mode == Mode::Snn { Some(profile(&m, &test)?) } else { None };
            let layers = layer_report(&m, act.as_ref(), &c, scheme_for(&m), p)?;
            written.push(write_csv(&ctx, &format!("energy_{}.csv", name), &layers)?);
            written.push(write_csv(&ctx, &format!("energy_{}_summary.csv", name), &energy_summary(&m, &test, &c, p)?)?);
        }
        Command::Compare { a, b, save } => {
            let ta = Table::read(&ctx.input(&a))?;
            let tb = Table::read(&ctx.input(&b))?;
            let out = report::compare(&ta, &tb)?;
            let path = ctx.output(&save);
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir)?;
            }
            out.write(&path)?;
            written.push(path);
        }
    }
    Ok(written)
}

fn short_mode(m: TrainMode) -> &'static str {
    match m {
        TrainMode::Ann => "ann",
        TrainMode::SnnTraditional => "traditional",
        TrainMode::SnnHire => "hire",
        TrainMode::SnnGaussian => "gaussian",
    }
}

fn scheme_for(m: &hiresnn_core::model::Model) -> EnergyScheme {
    match (m.mode, m.encoding) {
        (Mode::Ann, _) => EnergyScheme::Ann,
        (Mode::Snn, InputEncoding::Direct) => EnergyScheme::SnnDirect,
        (Mode::Snn, InputEncoding::Poisson { .. }) => EnergyScheme::SnnRate,
    }
}

#[derive(Debug, Serialize)]
struct EnergyRow {
    scheme: &'static str,
    precision: &'static str,
    energy_pj_per_step: f64,
    energy_pj_per_inference: f64,
}

/// Total energy of the model as an ANN (its MAC count), with direct input
/// and with Poisson rate-coded input.
fn energy_summary(
    m: &hiresnn_core::model::Model,
    test: &hiresnn_core::data::Dataset,
    c: &EnergyConstants,
    p: Precision,
) -> AppResult<Vec<EnergyRow>> {
    let prec = match p {
        Precision::Fp32 => "fp32",
        Precision::Int32 => "int32",
    };
    let ann_fl = flops(&hiresnn_core::model::Model { mode: Mode::Ann, ..m.clone() }, None)?;
    let mut rows = vec![{
        let e = energy(&ann_fl, c, EnergyScheme::Ann, p)?;
        EnergyRow { scheme: "ann", precision: prec, energy_pj_per_step: e, energy_pj_per_inference: e }
    }];
    if m.mode == Mode::Snn {
        let t = m.time_steps as f64;
        let direct = hiresnn_core::model::Model { encoding: InputEncoding::Direct, ..m.clone() };
        let fl = flops(&direct, Some(&profile(&direct, test)?))?;
        let e = energy(&fl, c, EnergyScheme::SnnDirect, p)?;
        rows.push(EnergyRow { scheme: "snn-direct", precision: prec, energy_pj_per_step: e, energy_pj_per_inference: e * t });
        let rate = hiresnn_core::model::Model { encoding: InputEncoding::Poisson { seed: 0, samples: 1 }, ..m.clone() };
        let fl = flops(&rate, Some(&profile(&rate, test)?))?;
        let e = energy(&fl, c, EnergyScheme::SnnRate, p)?;
        rows.push(EnergyRow { scheme: "snn-rate", precision: prec, energy_pj_per_step: e, energy_pj_per_inference: e * t });
    }
    Ok(rows)
}
