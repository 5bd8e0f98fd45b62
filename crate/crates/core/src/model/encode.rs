use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::error::{input_err, Result};
use crate::rng;
use crate::tensorops::Tensor;

/// Per-step input source for SNN simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Encoder {
    /// The analog image at every step.
    Direct,
    /// Independent Bernoulli spikes with `P(spike) = pixel`.
    Poisson { seed: u64 },
}

impl Encoder {
    pub fn encode(&self, x: &Tensor, t: usize) -> Result<Tensor> {
        match *self {
            Encoder::Direct => encode_direct(x, t),
            Encoder::Poisson { seed } => encode_poisson(x, t, seed),
        }
    }
}

fn check_pixels(x: &Tensor) -> Result<()> {
    if let Some(v) = x.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(input_err!("pixel value {} outside [0, 1]", v));
    }
    Ok(())
}

pub fn encode_direct(x: &Tensor, _t: usize) -> Result<Tensor> {
    check_pixels(x)?;
    Ok(x.clone())
}

pub fn encode_poisson(x: &Tensor, t: usize, seed: u64) -> Result<Tensor> {
    check_pixels(x)?;
    let mut rng = rng::stream(seed, &[rng::TAG_POISSON, t as u64]);
    let mut out = x.clone();
    for v in out.data_mut() {
        *v = if rng.random::<f64>() < *v { 1.0 } else { 0.0 };
    }
    Ok(out)
}
