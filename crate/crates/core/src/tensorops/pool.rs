use super::Tensor;
use crate::error::{config_err, Result};

fn out_dims(shape: &[usize], window: usize) -> Result<(usize, usize, usize)> {
    if shape.len() != 3 || window == 0 {
        return Err(config_err!("avgpool needs [H, W, C] input and window > 0, got {:?}/{}", shape, window));
    }
    if !shape[0].is_multiple_of(window) || !shape[1].is_multiple_of(window) {
        return Err(config_err!("spatial dims {:?} not divisible by window {}", &shape[..2], window));
    }
    Ok((shape[0] / window, shape[1] / window, shape[2]))
}

/// Non-overlapping `window x window` means per channel.
pub fn avgpool_forward(x: &Tensor, window: usize) -> Result<Tensor> {
    let (h_o, w_o, c) = out_dims(x.shape(), window)?;
    let w_in = x.shape()[1];
    let inv = 1.0 / (window * window) as f64;
    let mut y = Tensor::zeros(&[h_o, w_o, c]);
    let (xd, yd) = (x.data(), y.data_mut());
    for ih in 0..h_o * window {
        for iw in 0..w_in {
            let src = &xd[(ih * w_in + iw) * c..][..c];
            let dst = &mut yd[((ih / window) * w_o + iw / window) * c..][..c];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += s * inv;
            }
        }
    }
    Ok(y)
}

/// Spreads each output gradient uniformly over its window.
pub fn avgpool_backward(grad_y: &Tensor, window: usize) -> Result<Tensor> {
    let s = grad_y.shape();
    if s.len() != 3 || window == 0 {
        return Err(config_err!("avgpool grad needs [H, W, C] and window > 0"));
    }
    let (h_in, w_in, c) = (s[0] * window, s[1] * window, s[2]);
    let inv = 1.0 / (window * window) as f64;
    let mut gx = Tensor::zeros(&[h_in, w_in, c]);
    let (gyd, gxd) = (grad_y.data(), gx.data_mut());
    for ih in 0..h_in {
        for iw in 0..w_in {
            let src = &gyd[((ih / window) * s[1] + iw / window) * c..][..c];
            for (d, &g) in gxd[(ih * w_in + iw) * c..][..c].iter_mut().zip(src) {
                *d = g * inv;
            }
        }
    }
    Ok(gx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn mean_of_window() {
        let x = Tensor::from_vec(&[2, 2, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(avgpool_forward(&x, 2).unwrap().data(), &[2.5]);
    }

    #[test]
    fn constant_is_preserved() {
        let x = Tensor::full(&[4, 6, 3], 0.37);
        let y = avgpool_forward(&x, 2).unwrap();
        assert_eq!(y.shape(), &[2, 3, 3]);
        assert!(y.data().iter().all(|&v| (v - 0.37).abs() < 1e-15));
    }

    #[test]
    fn backward_spreads_quarter() {
        let g = Tensor::from_vec(&[1, 1, 1], vec![1.0]).unwrap();
        assert_eq!(avgpool_backward(&g, 2).unwrap().data(), &[0.25; 4]);
    }

    #[test]
    fn non_divisible_rejected() {
        assert!(avgpool_forward(&Tensor::zeros(&[3, 4, 1]), 2).is_err());
    }
}
