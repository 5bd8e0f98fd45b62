use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{config_err, Result};

/// Geometry of a square-kernel 2-D convolution with zero padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub kernel_size: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvSpec {
    pub fn new(kernel_size: usize, in_channels: usize, out_channels: usize) -> Self {
        Self { kernel_size, in_channels, out_channels, stride: 1, padding: 0 }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn with_padding(mut self, padding: usize) -> Self {
        self.padding = padding;
        self
    }

    pub fn weight_shape(&self) -> [usize; 4] {
        [self.kernel_size, self.kernel_size, self.in_channels, self.out_channels]
    }

    /// Output spatial size `(H_o, W_o)` for an `H_i x W_i` input.
    pub fn output_hw(&self, h_in: usize, w_in: usize) -> Result<(usize, usize)> {
        if self.kernel_size == 0 || self.in_channels == 0 || self.out_channels == 0 || self.stride == 0 {
            return Err(config_err!("degenerate convolution {:?}", self));
        }
        let span = |n: usize| -> Result<usize> {
            let padded = n + 2 * self.padding;
            if padded < self.kernel_size {
                return Err(config_err!(
                    "kernel {} larger than padded input {}",
                    self.kernel_size,
                    padded
                ));
            }
            Ok((padded - self.kernel_size) / self.stride + 1)
        };
        Ok((span(h_in)?, span(w_in)?))
    }

    /// Dense multiply-accumulate count `k^2 * H_o * W_o * C_o * C_i`.
    pub fn flops(&self, h_in: usize, w_in: usize) -> Result<u64> {
        let (h_o, w_o) = self.output_hw(h_in, w_in)?;
        Ok((self.kernel_size * self.kernel_size) as u64
            * h_o as u64
            * w_o as u64
            * self.out_channels as u64
            * self.in_channels as u64)
    }

    fn check_input(&self, x: &Tensor) -> Result<(usize, usize, usize, usize)> {
        let s = x.shape();
        if s.len() != 3 || s[2] != self.in_channels {
            return Err(config_err!(
                "conv expects [H, W, {}] input, got {:?}",
                self.in_channels,
                s
            ));
        }
        let (h_o, w_o) = self.output_hw(s[0], s[1])?;
        Ok((s[0], s[1], h_o, w_o))
    }

    fn check_weight(&self, w: &Tensor) -> Result<()> {
        if w.shape() != self.weight_shape() {
            return Err(config_err!(
                "conv weight must be {:?}, got {:?}",
                self.weight_shape(),
                w.shape()
            ));
        }
        Ok(())
    }

    /// Input coordinate for output coordinate `o` and kernel offset `k`, if
    /// it falls inside the unpadded input.
    #[inline]
    fn source(&self, o: usize, k: usize, extent: usize) -> Option<usize> {
        let pos = o * self.stride + k;
        if pos < self.padding || pos - self.padding >= extent {
            None
        } else {
            Some(pos - self.padding)
        }
    }
}

/// `y[h, w, co] = sum_{kh, kw, ci} W[kh, kw, ci, co] * x[h*s + kh - p, w*s + kw - p, ci]`
pub fn conv2d_forward(x: &Tensor, w: &Tensor, spec: &ConvSpec) -> Result<Tensor> {
    let (h_in, w_in, h_o, w_o) = spec.check_input(x)?;
    spec.check_weight(w)?;
    let (k, ci_n, co_n) = (spec.kernel_size, spec.in_channels, spec.out_channels);
    let mut y = Tensor::zeros(&[h_o, w_o, co_n]);
    let (xd, wd) = (x.data(), w.data());
    let yd = y.data_mut();
    for oh in 0..h_o {
        for kh in 0..k {
            let Some(ih) = spec.source(oh, kh, h_in) else { continue };
            for ow in 0..w_o {
                let y_row = &mut yd[(oh * w_o + ow) * co_n..][..co_n];
                for kw in 0..k {
                    let Some(iw) = spec.source(ow, kw, w_in) else { continue };
                    let x_off = (ih * w_in + iw) * ci_n;
                    let w_off = (kh * k + kw) * ci_n * co_n;
                    for ci in 0..ci_n {
                        let xv = xd[x_off + ci];
                        // spike maps are mostly zero
                        if xv == 0.0 {
                            continue;
                        }
                        let w_row = &wd[w_off + ci * co_n..][..co_n];
                        for (yv, &wv) in y_row.iter_mut().zip(w_row) {
                            *yv += xv * wv;
                        }
                    }
                }
            }
        }
    }
    Ok(y)
}

/// Adjoints of [`conv2d_forward`]: `(grad_x, grad_W)`.
pub fn conv2d_backward(
    grad_y: &Tensor,
    x: &Tensor,
    w: &Tensor,
    spec: &ConvSpec,
) -> Result<(Tensor, Tensor)> {
    let (gx, gw) = conv2d_backward_opt(grad_y, x, w, spec, true)?;
    Ok((gx.expect("requested"), gw))
}

pub(crate) fn conv2d_backward_opt(
    grad_y: &Tensor,
    x: &Tensor,
    w: &Tensor,
    spec: &ConvSpec,
    need_grad_x: bool,
) -> Result<(Option<Tensor>, Tensor)> {
    let (h_in, w_in, h_o, w_o) = spec.check_input(x)?;
    spec.check_weight(w)?;
    if grad_y.shape() != [h_o, w_o, spec.out_channels] {
        return Err(config_err!(
            "conv grad must be {:?}, got {:?}",
            [h_o, w_o, spec.out_channels],
            grad_y.shape()
        ));
    }
    let (k, ci_n, co_n) = (spec.kernel_size, spec.in_channels, spec.out_channels);
    let mut gx = need_grad_x.then(|| Tensor::zeros(x.shape()));
    let mut gw = Tensor::zeros(w.shape());
    let (xd, wd, gyd) = (x.data(), w.data(), grad_y.data());
    let gwd = gw.data_mut();
    for oh in 0..h_o {
        for ow in 0..w_o {
            let gy_row = &gyd[(oh * w_o + ow) * co_n..][..co_n];
            if gy_row.iter().all(|&g| g == 0.0) {
                continue;
            }
            for kh in 0..k {
                let Some(ih) = spec.source(oh, kh, h_in) else { continue };
                for kw in 0..k {
                    let Some(iw) = spec.source(ow, kw, w_in) else { continue };
                    let x_off = (ih * w_in + iw) * ci_n;
                    let w_off = (kh * k + kw) * ci_n * co_n;
                    for ci in 0..ci_n {
                        let row = w_off + ci * co_n;
                        if let Some(gx) = gx.as_mut() {
                            let w_row = &wd[row..][..co_n];
                            let acc: f64 = w_row.iter().zip(gy_row).map(|(a, b)| a * b).sum();
                            gx.data_mut()[x_off + ci] += acc;
                        }
                        let xv = xd[x_off + ci];
                        if xv == 0.0 {
                            continue;
                        }
                        for (g, &gy) in gwd[row..][..co_n].iter_mut().zip(gy_row) {
                            *g += xv * gy;
                        }
                    }
                }
            }
        }
    }
    Ok((gx, gw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn scalar_product() {
        let x = Tensor::from_vec(&[1, 1, 1], vec![2.0]).unwrap();
        let w = Tensor::from_vec(&[1, 1, 1, 1], vec![3.0]).unwrap();
        let spec = ConvSpec::new(1, 1, 1);
        assert_eq!(conv2d_forward(&x, &w, &spec).unwrap().data(), &[6.0]);
        let gy = Tensor::from_vec(&[1, 1, 1], vec![1.0]).unwrap();
        let (gx, gw) = conv2d_backward(&gy, &x, &w, &spec).unwrap();
        assert_eq!(gx.data(), &[3.0]);
        assert_eq!(gw.data(), &[2.0]);
    }

    #[test]
    fn zero_kernel_annihilates() {
        let x = Tensor::from_vec(&[3, 3, 2], (0..18).map(|v| v as f64 * 0.3 - 1.0).collect()).unwrap();
        let spec = ConvSpec::new(2, 2, 3).with_padding(1);
        let y = conv2d_forward(&x, &Tensor::zeros(&spec.weight_shape()), &spec).unwrap();
        assert_eq!(y.shape(), &[4, 4, 3]);
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ramp_local_sums() {
        // nested-loop oracle over the 4 output positions
        let ramp: vec::Vec<f64> = (1..=9).map(f64::from).collect();
        let x = Tensor::from_vec(&[3, 3, 1], ramp.clone()).unwrap();
        let w = Tensor::full(&[2, 2, 1, 1], 1.0);
        let y = conv2d_forward(&x, &w, &ConvSpec::new(2, 1, 1)).unwrap();
        let mut expected = vec![];
        for oh in 0..2 {
            for ow in 0..2 {
                let mut s = 0.0;
                for dh in 0..2 {
                    for dw in 0..2 {
                        s += ramp[(oh + dh) * 3 + ow + dw];
                    }
                }
                expected.push(s);
            }
        }
        assert_eq!(expected, vec![12.0, 16.0, 24.0, 28.0]);
        assert_eq!(y.data(), expected.as_slice());
    }

    #[test]
    fn zero_grad_gives_zero_adjoints() {
        let spec = ConvSpec::new(3, 2, 2).with_padding(1).with_stride(2);
        let x = Tensor::full(&[5, 5, 2], 0.7);
        let w = Tensor::full(&spec.weight_shape(), -0.2);
        let (h, wo) = spec.output_hw(5, 5).unwrap();
        let (gx, gw) = conv2d_backward(&Tensor::zeros(&[h, wo, 2]), &x, &w, &spec).unwrap();
        assert!(gx.data().iter().chain(gw.data()).all(|&v| v == 0.0));
    }

    #[test]
    fn shape_errors() {
        let spec = ConvSpec::new(3, 2, 1);
        let x = Tensor::zeros(&[4, 4, 1]);
        assert!(conv2d_forward(&x, &Tensor::zeros(&spec.weight_shape()), &spec).is_err());
        let x = Tensor::zeros(&[2, 2, 2]);
        assert!(conv2d_forward(&x, &Tensor::zeros(&spec.weight_shape()), &spec).is_err());
    }

    #[test]
    fn flops_formula() {
        let spec = ConvSpec::new(3, 4, 16).with_padding(1);
        assert_eq!(spec.flops(8, 8).unwrap(), 9 * 64 * 16 * 4);
        assert_eq!(spec.flops(8, 8).unwrap(), 36864);
    }
}
