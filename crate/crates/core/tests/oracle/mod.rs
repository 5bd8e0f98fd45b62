//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

pub mod checks;

use std::ops::{Add, Div, Mul, Sub};

/// Central finite-difference gradient of `f` at `x`.
pub fn fd_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + h;
            let up = f(&p);
            p[i] = x[i] - h;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Forward-mode dual number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub d: f64,
}

impl Dual {
    pub fn c(v: f64) -> Self {
        Self { v, d: 0.0 }
    }
    pub fn var(v: f64) -> Self {
        Self { v, d: 1.0 }
    }
    pub fn exp(self) -> Self {
        let e = self.v.exp();
        Self { v: e, d: e * self.d }
    }
    pub fn ln(self) -> Self {
        Self { v: self.v.ln(), d: self.d / self.v }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual { v: self.v + o.v, d: self.d + o.d }
    }
}
impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual { v: self.v - o.v, d: self.d - o.d }
    }
}
impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual { v: self.v * o.v, d: self.d * o.v + self.v * o.d }
    }
}
impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        Dual { v: self.v / o.v, d: (self.d * o.v - self.v * o.d) / (o.v * o.v) }
    }
}

/// Heaviside spike whose derivative is the piecewise-linear surrogate.
pub fn spike(z: Dual, gamma: f64) -> Dual {
    let v = if z.v > 0.0 { 1.0 } else { 0.0 };
    Dual { v, d: gamma * (1.0 - z.v.abs()).max(0.0) * z.d }
}

/// Parameters of the scalar chain `x -> w1 -> LIF(v, leak) -> w2 -> logits`.
#[derive(Debug, Clone, Copy)]
pub struct Chain<T> {
    pub x: T,
    pub w1: T,
    pub v: T,
    pub leak: T,
    pub w2: [T; 2],
}

/// Cross-entropy of the time-averaged logits of the unrolled chain with a
/// soft-reset LIF neuron emitting on its freshly integrated potential.
pub fn chain_loss(p: Chain<Dual>, steps: usize, label: usize, gamma: f64) -> Dual {
    let mut u = Dual::c(0.0);
    let mut s = Dual::c(0.0);
    let mut acc = [Dual::c(0.0); 2];
    for _ in 0..steps {
        u = p.leak * u + p.w1 * p.x - p.v * s;
        s = spike(u / p.v - Dual::c(1.0), gamma);
        for k in 0..2 {
            acc[k] = acc[k] + p.w2[k] * s;
        }
    }
    let t = Dual::c(steps as f64);
    let z = [acc[0] / t, acc[1] / t];
    let m = z[0].v.max(z[1].v);
    let lse = ((z[0] - Dual::c(m)).exp() + (z[1] - Dual::c(m)).exp()).ln() + Dual::c(m);
    lse - z[label]
}
