//! Gradient checks returning their worst error, so both the unit tests and
//! the acceptance runner can use them.

use hiresnn_core::model::{softmax_cross_entropy, LayerSpec, Mode, Model, RunOptions};
use hiresnn_core::spiking::SpikeFn;
use hiresnn_core::tensorops::{
    avgpool_backward, avgpool_forward, conv2d_backward, conv2d_forward, linear_backward, linear_forward, ConvSpec,
};
use hiresnn_core::Tensor;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{chain_loss, fd_grad, max_abs_diff, Chain, Dual};

const H: f64 = 1e-3;

pub fn random(shape: &[usize], lo: f64, hi: f64, seed: u64) -> Tensor {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| r.random_range(lo..hi)).collect()).unwrap()
}

fn weighted_sum(y: &Tensor, g: &Tensor) -> f64 {
    y.data().iter().zip(g.data()).map(|(a, b)| a * b).sum()
}

/// Worst input/weight gradient error over three conv geometries.
pub fn conv_error() -> f64 {
    let mut worst = 0.0f64;
    for (spec, hw) in [
        (ConvSpec::new(3, 2, 3).with_padding(1), 5),
        (ConvSpec::new(2, 1, 2).with_stride(2), 6),
        (ConvSpec::new(3, 3, 1), 4),
    ] {
        let x = random(&[hw, hw, spec.in_channels], -1.0, 1.0, 1);
        let w = random(&spec.weight_shape(), -1.0, 1.0, 2);
        let y = conv2d_forward(&x, &w, &spec).unwrap();
        let g = random(y.shape(), -1.0, 1.0, 3);
        let (gx, gw) = conv2d_backward(&g, &x, &w, &spec).unwrap();

        let fx = |v: &[f64]| {
            let xv = Tensor::from_vec(x.shape(), v.to_vec()).unwrap();
            weighted_sum(&conv2d_forward(&xv, &w, &spec).unwrap(), &g)
        };
        let fw = |v: &[f64]| {
            let wv = Tensor::from_vec(w.shape(), v.to_vec()).unwrap();
            weighted_sum(&conv2d_forward(&x, &wv, &spec).unwrap(), &g)
        };
        worst = worst.max(max_abs_diff(gx.data(), &fd_grad(fx, x.data(), H)));
        worst = worst.max(max_abs_diff(gw.data(), &fd_grad(fw, w.data(), H)));
    }
    worst
}

pub fn linear_error() -> f64 {
    let x = random(&[7], -1.0, 1.0, 4);
    let w = random(&[7, 3], -1.0, 1.0, 5);
    let g = random(&[3], -1.0, 1.0, 6);
    let (gx, gw) = linear_backward(&g, &x, &w).unwrap();
    let fx = |v: &[f64]| {
        weighted_sum(&linear_forward(&Tensor::from_vec(&[7], v.to_vec()).unwrap(), &w).unwrap(), &g)
    };
    let fw = |v: &[f64]| {
        weighted_sum(&linear_forward(&x, &Tensor::from_vec(&[7, 3], v.to_vec()).unwrap()).unwrap(), &g)
    };
    max_abs_diff(gx.data(), &fd_grad(fx, x.data(), H)).max(max_abs_diff(gw.data(), &fd_grad(fw, w.data(), H)))
}

pub fn avgpool_error() -> f64 {
    let x = random(&[4, 6, 2], -1.0, 1.0, 7);
    let g = random(&[2, 3, 2], -1.0, 1.0, 8);
    let gx = avgpool_backward(&g, 2).unwrap();
    let f = |v: &[f64]| {
        weighted_sum(&avgpool_forward(&Tensor::from_vec(x.shape(), v.to_vec()).unwrap(), 2).unwrap(), &g)
    };
    max_abs_diff(gx.data(), &fd_grad(f, x.data(), H))
}

/// Small spiking net with smooth spikes so that the surrogate gradient is
/// the exact derivative of the loss.
pub fn smooth_snn(steps: usize, seed: u64) -> Model {
    let specs = [
        LayerSpec::conv(ConvSpec::new(3, 1, 2).with_padding(1)),
        LayerSpec::neuron(),
        LayerSpec::avgpool(2),
        LayerSpec::linear(8, 2),
        LayerSpec::output(),
    ];
    let mut m = Model::new(&[4, 4, 1], 2, &specs, Mode::Snn, seed).unwrap();
    m.time_steps = steps;
    m.spike_fn = SpikeFn::Smoothed;
    m.layers[1].threshold = 0.6;
    m.layers[1].leak = 0.8;
    m
}

fn snn_loss(m: &Model, x: &Tensor, label: usize) -> f64 {
    let run = m.run(x, &RunOptions::inference(m.time_steps)).unwrap();
    softmax_cross_entropy(&run.logits, label).unwrap().0
}

/// Worst error per parameter group of a full SNN for T = 1..4, as
/// `(name, T, error)`.
pub fn snn_errors() -> Vec<(&'static str, usize, f64)> {
    // The smoothed loss is piecewise quadratic, so a small step keeps the
    // central difference clear of the kinks.
    let h = 1e-5;
    let mut out = Vec::new();
    for (steps, seed) in [(1, 11), (2, 12), (3, 13), (4, 14)] {
        let m = smooth_snn(steps, seed);
        let x = random(&[4, 4, 1], 0.1, 0.9, seed + 100);
        let label = (seed % 2) as usize;
        let run = m.run(&x, &RunOptions { record: true, ..RunOptions::inference(steps) }).unwrap();
        let (_, gl) = softmax_cross_entropy(&run.logits, label).unwrap();
        let g = m.backward(&run, &gl, true).unwrap();

        let mut w_err = 0.0f64;
        for li in [0, 3] {
            let w = m.layers[li].weight.clone().unwrap();
            let f = |v: &[f64]| {
                let mut p = m.clone();
                p.layers[li].weight = Some(Tensor::from_vec(w.shape(), v.to_vec()).unwrap());
                snn_loss(&p, &x, label)
            };
            let fd = fd_grad(f, w.data(), h);
            w_err = w_err.max(max_abs_diff(g.layers[li].weight.as_ref().unwrap().data(), &fd));
        }
        out.push(("weights", steps, w_err));

        let scalar = |set: &dyn Fn(&mut Model, f64), at: f64| {
            let f = |v: &[f64]| {
                let mut p = m.clone();
                set(&mut p, v[0]);
                snn_loss(&p, &x, label)
            };
            fd_grad(f, &[at], h)[0]
        };
        out.push(("threshold", steps, (g.layers[1].threshold - scalar(&|p, v| p.layers[1].threshold = v, 0.6)).abs()));
        out.push(("leak", steps, (g.layers[1].leak - scalar(&|p, v| p.layers[1].leak = v, 0.8)).abs()));

        let fx = |v: &[f64]| snn_loss(&m, &Tensor::from_vec(x.shape(), v.to_vec()).unwrap(), label);
        let fd_x = fd_grad(fx, x.data(), h);
        out.push(("input", steps, max_abs_diff(g.input.as_ref().unwrap().data(), &fd_x)));
    }
    out
}

fn chain_model(p: &Chain<f64>) -> Model {
    let specs = [LayerSpec::linear(1, 1), LayerSpec::neuron(), LayerSpec::linear(1, 2), LayerSpec::output()];
    let mut m = Model::new(&[1], 2, &specs, Mode::Snn, 0).unwrap();
    m.time_steps = 3;
    m.layers[0].weight = Some(Tensor::from_vec(&[1, 1], vec![p.w1]).unwrap());
    m.layers[1].threshold = p.v;
    m.layers[1].leak = p.leak;
    m.layers[2].weight = Some(Tensor::from_vec(&[1, 2], p.w2.to_vec()).unwrap());
    m
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

/// Worst relative error of the 3-step scalar chain against forward-mode
/// unrolling, and the smallest |dL/dv|, |dL/dleak| seen (to show the
/// neuron is exercised).
pub fn lif_chain_errors() -> (f64, f64) {
    // Inputs chosen so every step lands inside the surrogate's support.
    let cases = [
        Chain { x: 0.7, w1: 1.1, v: 1.0, leak: 0.9, w2: [0.8, -0.5] },
        Chain { x: 0.4, w1: 1.5, v: 0.8, leak: 0.7, w2: [-0.3, 1.2] },
        Chain { x: 0.9, w1: 0.6, v: 0.75, leak: 0.95, w2: [1.0, 0.2] },
    ];
    let mut worst = 0.0f64;
    let mut smallest = f64::INFINITY;
    for p in &cases {
        for label in 0..2 {
            let m = chain_model(p);
            let x = Tensor::from_vec(&[1], vec![p.x]).unwrap();
            let run = m.run(&x, &RunOptions { record: true, ..RunOptions::inference(3) }).unwrap();
            let (loss, gl) = softmax_cross_entropy(&run.logits, label).unwrap();
            let g = m.backward(&run, &gl, true).unwrap();

            let c = Dual::c;
            let base = Chain { x: c(p.x), w1: c(p.w1), v: c(p.v), leak: c(p.leak), w2: [c(p.w2[0]), c(p.w2[1])] };
            let d = |q: Chain<Dual>| chain_loss(q, 3, label, 0.3);
            worst = worst.max(rel_err(d(base).v, loss));

            let dx = d(Chain { x: Dual::var(p.x), ..base }).d;
            let dw1 = d(Chain { w1: Dual::var(p.w1), ..base }).d;
            let dv = d(Chain { v: Dual::var(p.v), ..base }).d;
            let dl = d(Chain { leak: Dual::var(p.leak), ..base }).d;
            let dw20 = d(Chain { w2: [Dual::var(p.w2[0]), base.w2[1]], ..base }).d;
            let dw21 = d(Chain { w2: [base.w2[0], Dual::var(p.w2[1])], ..base }).d;

            let an_w2 = g.layers[2].weight.as_ref().unwrap().data();
            for (an, sym) in [
                (g.input.as_ref().unwrap().data()[0], dx),
                (g.layers[0].weight.as_ref().unwrap().data()[0], dw1),
                (g.layers[1].threshold, dv),
                (g.layers[1].leak, dl),
                (an_w2[0], dw20),
                (an_w2[1], dw21),
            ] {
                worst = worst.max(rel_err(an, sym));
            }
            smallest = smallest.min(dv.abs()).min(dl.abs());
        }
    }
    (worst, smallest)
}
