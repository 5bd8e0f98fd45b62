use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::attacks::{attack_dataset, attack_sweep, AttackConfig, Classifier, Sweep};
use crate::data::Dataset;
use crate::error::{config_err, input_err, Result};
use crate::model::Model;

/// Attack settings and tolerances for the gradient-masking checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecklistConfig {
    pub epsilon: f64,
    pub pgd_alpha: f64,
    pub pgd_iterations: usize,
    /// Bounds for the monotonicity check; the last one is also used for the
    /// unbounded-attack check and should be 1.
    pub eps_sweep: Vec<f64>,
    /// Accuracy points by which a check may miss before it fails.
    pub tolerance: f64,
    /// Allowed accuracy above chance for the unbounded attack.
    pub chance_margin: f64,
    pub seed: u64,
}

impl Default for ChecklistConfig {
    fn default() -> Self {
        Self {
            epsilon: 8.0 / 255.0,
            pgd_alpha: 0.01,
            pgd_iterations: 7,
            eps_sweep: vec![0.0, 2.0 / 255.0, 4.0 / 255.0, 8.0 / 255.0, 16.0 / 255.0, 32.0 / 255.0, 64.0 / 255.0, 1.0],
            tolerance: 2.0,
            chance_margin: 5.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChecklistRow {
    pub test: String,
    pub pass: bool,
    pub measured: String,
}

fn row(test: &str, pass: bool, measured: String) -> ChecklistRow {
    ChecklistRow { test: test.into(), pass, measured }
}

fn acc_of(outcomes: &[crate::attacks::AttackOutcome]) -> f64 {
    100.0 * outcomes.iter().filter(|o| o.adversarial_correct).count() as f64 / outcomes.len().max(1) as f64
}

/// Runs the five gradient-masking checks on `model`. Black-box attacks are
/// crafted on `source`, typically the same architecture trained with
/// another seed.
pub fn obfuscation_checklist<S: Classifier + ?Sized>(
    model: &Model,
    source: &S,
    data: &Dataset,
    cfg: &ChecklistConfig,
) -> Result<Vec<ChecklistRow>> {
    if data.is_empty() {
        return Err(input_err!("checklist needs data"));
    }
    let last = *cfg.eps_sweep.last().ok_or_else(|| config_err!("empty epsilon sweep"))?;
    let fgsm = AttackConfig { seed: cfg.seed, ..AttackConfig::fgsm(cfg.epsilon) };
    let pgd = AttackConfig { seed: cfg.seed, ..AttackConfig::pgd(cfg.epsilon, cfg.pgd_alpha, cfg.pgd_iterations) };

    let wb_fgsm = attack_dataset(model, model, data, &fgsm)?;
    let wb_pgd = attack_dataset(model, model, data, &pgd)?;
    let bb_fgsm = attack_dataset(source, model, data, &fgsm)?;
    let bb_pgd = attack_dataset(source, model, data, &pgd)?;
    let (a_wf, a_wp, a_bf, a_bp) = (acc_of(&wb_fgsm), acc_of(&wb_pgd), acc_of(&bb_fgsm), acc_of(&bb_pgd));
    let tol = cfg.tolerance;

    let sweep = attack_sweep(model, data, &pgd, &Sweep::Epsilon { values: cfg.eps_sweep.clone(), scale_alpha: true })?;
    let monotone = sweep.windows(2).all(|w| w[1].accuracy <= w[0].accuracy + tol);
    let curve: Vec<String> = sweep.iter().map(|p| format!("{:.4}:{:.1}", p.value, p.accuracy)).collect();
    let unbounded = sweep.last().expect("non-empty").accuracy;
    let chance = 100.0 / model.classes as f64;

    let fooled = [&wb_fgsm, &wb_pgd].iter().flat_map(|o| o.iter()).filter(|o| !o.adversarial_correct).count();

    Ok(vec![
        row("i single-step weaker than iterative", a_wf + tol >= a_wp, format!("fgsm={:.2} pgd={:.2}", a_wf, a_wp)),
        row(
            "ii black-box weaker than white-box",
            a_bf + tol >= a_wf && a_bp + tol >= a_wp,
            format!("bb_fgsm={:.2} wb_fgsm={:.2} bb_pgd={:.2} wb_pgd={:.2}", a_bf, a_wf, a_bp, a_wp),
        ),
        row("iii larger bound never helps", monotone, curve.join(" ")),
        row(
            "iv unbounded attack succeeds",
            (last - 1.0).abs() < 1e-12 && unbounded <= chance + cfg.chance_margin,
            format!("eps={} acc={:.2} chance={:.2}", last, unbounded, chance),
        ),
        row("v gradient attacks find adversarial examples", fooled > 0, format!("misclassified={}", fooled)),
    ])
}
