use super::Tensor;
use crate::error::{config_err, Result};

fn check(x: &Tensor, w: &Tensor) -> Result<(usize, usize)> {
    let s = w.shape();
    if s.len() != 2 || s[0] != x.len() {
        return Err(config_err!(
            "linear weight {:?} does not accept {} inputs",
            s,
            x.len()
        ));
    }
    Ok((s[0], s[1]))
}

/// `y = W^T x`. Any input shape is accepted and read flat.
pub fn linear_forward(x: &Tensor, w: &Tensor) -> Result<Tensor> {
    let (d_in, d_out) = check(x, w)?;
    let mut y = Tensor::zeros(&[d_out]);
    let yd = y.data_mut();
    for (i, &xv) in x.data().iter().enumerate() {
        if xv == 0.0 {
            continue;
        }
        let row = &w.data()[i * d_out..][..d_out];
        for (yv, &wv) in yd.iter_mut().zip(row) {
            *yv += xv * wv;
        }
    }
    debug_assert_eq!(d_in, x.len());
    Ok(y)
}

/// Adjoints of [`linear_forward`]; `grad_x` takes the shape of `x`.
pub fn linear_backward(grad_y: &Tensor, x: &Tensor, w: &Tensor) -> Result<(Tensor, Tensor)> {
    let (gx, gw) = linear_backward_opt(grad_y, x, w, true)?;
    Ok((gx.expect("requested"), gw))
}

pub(crate) fn linear_backward_opt(
    grad_y: &Tensor,
    x: &Tensor,
    w: &Tensor,
    need_grad_x: bool,
) -> Result<(Option<Tensor>, Tensor)> {
    let (_, d_out) = check(x, w)?;
    if grad_y.len() != d_out {
        return Err(config_err!("linear grad has {} entries, expected {}", grad_y.len(), d_out));
    }
    let gy = grad_y.data();
    let mut gw = Tensor::zeros(w.shape());
    let mut gx = need_grad_x.then(|| Tensor::zeros(x.shape()));
    for (i, &xv) in x.data().iter().enumerate() {
        if let Some(gx) = gx.as_mut() {
            let row = &w.data()[i * d_out..][..d_out];
            gx.data_mut()[i] = row.iter().zip(gy).map(|(a, b)| a * b).sum();
        }
        if xv != 0.0 {
            for (g, &gyv) in gw.data_mut()[i * d_out..][..d_out].iter_mut().zip(gy) {
                *g += xv * gyv;
            }
        }
    }
    Ok((gx, gw))
}

/// Dense multiply-accumulate count `D_in * D_out`.
pub fn linear_flops(d_in: usize, d_out: usize) -> u64 {
    d_in as u64 * d_out as u64
}
