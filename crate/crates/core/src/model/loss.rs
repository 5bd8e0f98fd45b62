use crate::error::{input_err, Result};
use crate::tensorops::Tensor;

/// Softmax cross-entropy and its gradient w.r.t. the logits.
pub fn softmax_cross_entropy(logits: &Tensor, label: usize) -> Result<(f64, Tensor)> {
    let z = logits.data();
    if label >= z.len() {
        return Err(input_err!("label {} out of range for {} classes", label, z.len()));
    }
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut grad = logits.map(|v| libm::exp(v - max));
    let norm: f64 = grad.sum();
    grad.scale(1.0 / norm);
    let loss = libm::log(norm) + max - z[label];
    grad.data_mut()[label] -= 1.0;
    Ok((loss, grad))
}
