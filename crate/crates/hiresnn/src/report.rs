//! CSV reports and the generic comparison of two reports.

use std::path::Path;

use hiresnn_core::metrics::{ChecklistRow, LayerReport};
use hiresnn_core::training::EpochStats;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub mode: String,
    pub clean_train_acc: f64,
    pub clean_val_acc: Option<f64>,
    pub loss: f64,
    pub lr: f64,
    pub kappa_saturation: f64,
}

impl From<&EpochStats> for EpochRow {
    fn from(s: &EpochStats) -> Self {
        Self {
            epoch: s.epoch,
            mode: s.mode.name().into(),
            clean_train_acc: s.train_acc,
            clean_val_acc: s.val_acc,
            loss: s.loss,
            lr: s.lr,
            kappa_saturation: s.kappa_saturation,
        }
    }
}

/// One accuracy measurement. `attack` is `clean`, `fgsm` or `pgd`, and
/// `source` names the checkpoint that crafted the perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub model: String,
    pub attack: String,
    pub source: String,
    pub epsilon: f64,
    pub alpha: f64,
    pub iterations: usize,
    pub accuracy: f64,
    pub samples: usize,
    pub pd_mean: Option<f64>,
    pub pd_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub knob: String,
    pub value: f64,
    pub attack: String,
    pub accuracy: f64,
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> AppResult<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<T: DeserializeOwned>(path: &Path) -> AppResult<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| missing_or(path, e))?;
    r.deserialize().map(|row| row.map_err(AppError::from)).collect()
}

fn missing_or(path: &Path, e: csv::Error) -> AppError {
    match e.kind() {
        csv::ErrorKind::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
            AppError::Dependency(format!("{} not found", path.display()))
        }
        _ => e.into(),
    }
}

pub fn write_epochs(path: &Path, stats: &[EpochStats]) -> AppResult<()> {
    write_rows(path, &stats.iter().map(EpochRow::from).collect::<Vec<_>>())
}

pub fn write_layers(path: &Path, rows: &[LayerReport]) -> AppResult<()> {
    write_rows(path, rows)
}

pub fn write_checklist(path: &Path, rows: &[ChecklistRow]) -> AppResult<()> {
    write_rows(path, rows)
}

/// A CSV file as header plus string cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> AppResult<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| missing_or(path, e))?;
        let header = r.headers()?.iter().map(String::from).collect();
        let rows = r.records().map(|rec| Ok(rec?.iter().map(String::from).collect())).collect::<AppResult<_>>()?;
        Ok(Self { header, rows })
    }

    pub fn write(&self, path: &Path) -> AppResult<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn numeric_column(t: &Table, c: usize) -> bool {
    t.rows.iter().all(|r| r[c].is_empty() || r[c].parse::<f64>().is_ok())
        && t.rows.iter().any(|r| !r[c].is_empty())
}

/// Row-by-row comparison of two reports with the same header. Text columns
/// must agree and are kept as keys; every numeric column `c` becomes
/// `c_a`, `c_b` and `c_delta = a - b`. Input cells are copied verbatim.
pub fn compare(a: &Table, b: &Table) -> AppResult<Table> {
    if a.header != b.header {
        return Err(AppError::Format(format!("headers differ: {:?} vs {:?}", a.header, b.header)));
    }
    if a.rows.len() != b.rows.len() {
        return Err(AppError::Format(format!("{} rows vs {} rows", a.rows.len(), b.rows.len())));
    }
    let numeric: Vec<bool> = (0..a.header.len()).map(|c| numeric_column(a, c) && numeric_column(b, c)).collect();
    let mut header = Vec::new();
    for (c, name) in a.header.iter().enumerate() {
        if numeric[c] {
            header.extend([format!("{}_a", name), format!("{}_b", name), format!("{}_delta", name)]);
        } else {
            header.push(name.clone());
        }
    }
    let mut rows = Vec::with_capacity(a.rows.len());
    for (i, (ra, rb)) in a.rows.iter().zip(&b.rows).enumerate() {
        let mut out = Vec::with_capacity(header.len());
        for c in 0..a.header.len() {
            if numeric[c] {
                let delta = match (ra[c].parse::<f64>(), rb[c].parse::<f64>()) {
                    (Ok(x), Ok(y)) => (x - y).to_string(),
                    _ => String::new(),
                };
                out.extend([ra[c].clone(), rb[c].clone(), delta]);
            } else if ra[c] != rb[c] {
                return Err(AppError::Format(format!(
                    "row {} column {}: '{}' vs '{}'",
                    i + 1,
                    a.header[c],
                    ra[c],
                    rb[c]
                )));
            } else {
                out.push(ra[c].clone());
            }
        }
        rows.push(out);
    }
    Ok(Table { header, rows })
}
