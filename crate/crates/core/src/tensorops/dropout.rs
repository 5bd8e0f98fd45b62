use rand::RngExt;

use super::Tensor;
use crate::error::{config_err, Result};
use crate::rng;

/// Inverted-dropout mask: each entry is `1 / (1 - rate)` with probability
/// `1 - rate` and `0` otherwise. The same seed always yields the same mask.
pub fn dropout_mask(shape: &[usize], rate: f64, seed: u64) -> Result<Tensor> {
    if !(0.0..1.0).contains(&rate) {
        return Err(config_err!("dropout rate must lie in [0, 1), got {}", rate));
    }
    let mut mask = Tensor::full(shape, 1.0);
    if rate == 0.0 {
        return Ok(mask);
    }
    let keep = 1.0 / (1.0 - rate);
    let mut rng = rng::stream(seed, &[rng::TAG_DROPOUT]);
    for v in mask.data_mut() {
        *v = if rng.random::<f64>() < rate { 0.0 } else { keep };
    }
    Ok(mask)
}
