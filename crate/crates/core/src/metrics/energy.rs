use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::ActivityReport;
use crate::error::{input_err, Error, Result};
use crate::model::{LayerKind, Mode, Model};
use crate::tensorops::linear_flops;

/// Per-operation energy in pJ for 32-bit integer and floating point units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyConstants {
    pub e_mult_32int: f64,
    pub e_add_32int: f64,
    pub e_mac_32int: f64,
    pub e_ac_32int: f64,
    pub e_mult_32fp: f64,
    pub e_add_32fp: f64,
    pub e_mac_32fp: f64,
    pub e_ac_32fp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Precision {
    Int32,
    Fp32,
}

impl EnergyConstants {
    /// 45 nm CMOS estimates.
    pub const CMOS_45NM: Self = Self {
        e_mult_32int: 3.1,
        e_add_32int: 0.1,
        e_mac_32int: 3.2,
        e_ac_32int: 0.1,
        e_mult_32fp: 3.7,
        e_add_32fp: 0.9,
        e_mac_32fp: 4.6,
        e_ac_32fp: 0.9,
    };

    pub fn mac(&self, p: Precision) -> f64 {
        match p {
            Precision::Int32 => self.e_mac_32int,
            Precision::Fp32 => self.e_mac_32fp,
        }
    }

    pub fn ac(&self, p: Precision) -> f64 {
        match p {
            Precision::Int32 => self.e_ac_32int,
            Precision::Fp32 => self.e_ac_32fp,
        }
    }

    /// A MAC must cost one multiply plus one add. Compared in tenths of a
    /// pJ, the resolution the constants are quoted in, since 3.7 + 0.9 is
    /// not 4.6 in binary floating point.
    pub fn validate(&self) -> Result<()> {
        let tenths = |v: f64| libm::round(v * 10.0) as i64;
        for (mult, add, mac) in [
            (self.e_mult_32int, self.e_add_32int, self.e_mac_32int),
            (self.e_mult_32fp, self.e_add_32fp, self.e_mac_32fp),
        ] {
            if tenths(mult) + tenths(add) != tenths(mac) {
                return Err(Error::Invariant(format!("MAC {} pJ != mult {} + add {}", mac, mult, add)));
            }
        }
        Ok(())
    }
}

impl Default for EnergyConstants {
    fn default() -> Self {
        Self::CMOS_45NM
    }
}

/// FLOPs of one weighted layer. SNN counts are per time step: the ANN
/// count scaled by `zeta`, the activity of the layer's input map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerFlops {
    pub layer: usize,
    pub ann: f64,
    pub snn: Option<f64>,
    pub zeta: Option<f64>,
}

/// FLOPs of every conv/linear layer. SNN counts need `activity` when the
/// model is spiking; ANN counts are always filled.
pub fn flops(model: &Model, activity: Option<&ActivityReport>) -> Result<Vec<LayerFlops>> {
    let shapes = model.layer_shapes()?;
    if model.mode == Mode::Snn && activity.is_none() {
        return Err(input_err!("SNN FLOPs need measured spiking activity"));
    }
    let mut out = Vec::new();
    for (i, layer) in model.layers.iter().enumerate() {
        let ann = match layer.spec.kind {
            LayerKind::Conv(spec) => spec.flops(shapes[i][0], shapes[i][1])? as f64,
            LayerKind::Linear { inputs, outputs } => linear_flops(inputs, outputs) as f64,
            _ => continue,
        };
        let zeta = activity.map(|a| a.zeta(model, i));
        out.push(LayerFlops { layer: i, ann, snn: zeta.map(|z| ann * z), zeta });
    }
    Ok(out)
}

/// Which energy model to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnergyScheme {
    /// Every FLOP is a MAC.
    Ann,
    /// Spiking input: every FLOP is an accumulate.
    SnnRate,
    /// Analog input: the first layer multiplies, the rest accumulate.
    SnnDirect,
}

/// Energy in pJ of per-layer FLOP counts ordered from the input.
pub fn energy_of(fl: &[f64], c: &EnergyConstants, scheme: EnergyScheme, p: Precision) -> f64 {
    match scheme {
        EnergyScheme::Ann => fl.iter().sum::<f64>() * c.mac(p),
        EnergyScheme::SnnRate => fl.iter().sum::<f64>() * c.ac(p),
        EnergyScheme::SnnDirect => match fl.split_first() {
            Some((first, rest)) => first * c.mac(p) + rest.iter().sum::<f64>() * c.ac(p),
            None => 0.0,
        },
    }
}

/// Total energy in pJ, using ANN counts for `EnergyScheme::Ann` and SNN
/// counts otherwise.
pub fn energy(flops: &[LayerFlops], c: &EnergyConstants, scheme: EnergyScheme, p: Precision) -> Result<f64> {
    Ok(energy_of(&pick(flops, scheme)?, c, scheme, p))
}

fn pick(flops: &[LayerFlops], scheme: EnergyScheme) -> Result<Vec<f64>> {
    flops
        .iter()
        .map(|f| match scheme {
            EnergyScheme::Ann => Ok(f.ann),
            _ => f.snn.ok_or_else(|| input_err!("layer {} has no SNN FLOP count", f.layer)),
        })
        .collect()
}

/// One row of the per-layer energy report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    pub layer: usize,
    /// Size of the map feeding the layer.
    pub neurons: usize,
    #[serde(rename = "SA")]
    pub sa: f64,
    #[serde(rename = "TASA")]
    pub tasa: f64,
    pub flops_ann: f64,
    pub flops_snn: f64,
    #[serde(rename = "energy_pJ")]
    pub energy_pj: f64,
}

/// Per-layer rows whose energies sum to [`energy`] under the same scheme.
pub fn layer_report(
    model: &Model,
    activity: Option<&ActivityReport>,
    c: &EnergyConstants,
    scheme: EnergyScheme,
    p: Precision,
) -> Result<Vec<LayerReport>> {
    let shapes = model.layer_shapes()?;
    let fl = flops(model, activity)?;
    let mut rows = Vec::with_capacity(fl.len());
    for (k, f) in fl.iter().enumerate() {
        let neurons: usize = shapes[f.layer].iter().product();
        let tasa = f.zeta.unwrap_or(1.0);
        let steps = if model.mode == Mode::Snn { model.time_steps as f64 } else { 1.0 };
        let snn = f.snn.unwrap_or(f.ann);
        let per_op = match scheme {
            EnergyScheme::Ann => c.mac(p),
            EnergyScheme::SnnDirect if k == 0 => c.mac(p),
            _ => c.ac(p),
        };
        let counted = if scheme == EnergyScheme::Ann { f.ann } else { snn };
        rows.push(LayerReport {
            layer: f.layer,
            neurons,
            sa: tasa * steps,
            tasa,
            flops_ann: f.ann,
            flops_snn: snn,
            energy_pj: counted * per_op,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_consistent() {
        let c = EnergyConstants::default();
        c.validate().unwrap();
        assert_eq!((c.mac(Precision::Fp32), c.ac(Precision::Fp32)), (4.6, 0.9));
        assert_eq!((c.mac(Precision::Int32), c.ac(Precision::Int32)), (3.2, 0.1));
        let bad = EnergyConstants { e_mac_32fp: 4.7, ..c };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn ann_thousand_flops_fp() {
        let e = energy_of(&[1000.0], &EnergyConstants::default(), EnergyScheme::Ann, Precision::Fp32);
        assert_eq!(e, 4600.0);
    }

    #[test]
    fn direct_two_layer_fp() {
        let e = energy_of(&[100.0, 1000.0], &EnergyConstants::default(), EnergyScheme::SnnDirect, Precision::Fp32);
        assert_eq!(e, 1360.0);
    }

    #[test]
    fn rate_is_all_accumulates() {
        let e = energy_of(&[100.0, 1000.0], &EnergyConstants::default(), EnergyScheme::SnnRate, Precision::Int32);
        assert!((e - 110.0).abs() < 1e-9);
    }
}
