use crate::error::{input_err, Result};
use crate::spiking::SpikeTrace;
use crate::tensorops::Tensor;

/// L2 norm of `|x - x_adv|`.
pub fn perturbation_distance(x: &Tensor, x_adv: &Tensor) -> Result<f64> {
    if x.shape() != x_adv.shape() {
        return Err(input_err!("shape {:?} vs {:?}", x.shape(), x_adv.shape()));
    }
    let ss: f64 = x.data().iter().zip(x_adv.data()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(libm::sqrt(ss))
}

/// Distance between per-neuron spike counts normalized by `steps`.
pub fn spike_pd(clean: &SpikeTrace, adv: &SpikeTrace, steps: usize) -> Result<f64> {
    if steps == 0 {
        return Err(input_err!("spike distance over zero steps"));
    }
    let (mut a, mut b) = (clean.counts(), adv.counts());
    a.scale(1.0 / steps as f64);
    b.scale(1.0 / steps as f64);
    perturbation_distance(&a, &b)
}
