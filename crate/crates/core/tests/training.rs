use hiresnn_core::data::{synthetic_bars, Dataset, SyntheticConfig};
use hiresnn_core::model::{vgg_like, Mode, Model};
use hiresnn_core::training::{
    accuracy, gradient_storage_report, train, train_ann, EpochStats, PeriodEvent, TrainConfig, TrainHook, TrainMode,
};
use hiresnn_core::{Error, Tensor};

fn tiny_data(samples: usize, seed: u64) -> Dataset {
    synthetic_bars(&SyntheticConfig { height: 8, width: 8, samples, jitter: 1, seed, ..Default::default() }).unwrap()
}

fn tiny_snn(seed: u64) -> Model {
    let specs = vgg_like(&[8, 8, 1], 2, &[4], 8, 0.2).unwrap();
    let mut m = Model::new(&[8, 8, 1], 2, &specs, Mode::Snn, seed).unwrap();
    for l in &mut m.layers {
        l.threshold = 0.3;
        l.leak = 0.9;
    }
    m
}

fn snn_cfg(mode: TrainMode, epochs: usize) -> TrainConfig {
    let mut c = TrainConfig::snn(mode, epochs, 5);
    c.time_steps = 4;
    c.batch_size = 8;
    c.lr = c.lr.with_initial(0.01);
    c.momentum = 0.5;
    c
}

#[derive(Default)]
struct Recorder {
    events: Vec<(usize, usize, usize, Vec<Tensor>, Vec<Tensor>, usize)>,
    params: Vec<Vec<f64>>,
    epochs: Vec<EpochStats>,
}

fn flat_params(m: &Model) -> Vec<f64> {
    let mut v = Vec::new();
    for l in &m.layers {
        if let Some(w) = &l.weight {
            v.extend_from_slice(w.data());
        }
        v.push(l.threshold);
        v.push(l.leak);
    }
    v
}

impl TrainHook for Recorder {
    fn on_period(&mut self, e: &PeriodEvent<'_>) {
        self.events.push((e.epoch, e.batch, e.period, e.kappa_before.to_vec(), e.kappa_after.to_vec(), e.stored_steps));
        self.params.push(flat_params(e.model));
    }
    fn on_epoch(&mut self, s: &EpochStats) {
        self.epochs.push(s.clone());
    }
}

#[test]
fn zero_epochs_keep_initial_weights() {
    let data = tiny_data(16, 0);
    let specs = vgg_like(&[8, 8, 1], 2, &[4], 8, 0.0).unwrap();
    let mut m = Model::new(&[8, 8, 1], 2, &specs, Mode::Ann, 0).unwrap();
    let before = m.clone();
    train_ann(&mut m, &data, None, &TrainConfig::ann(0, 0)).unwrap();
    assert_eq!(m, before);
}

#[test]
fn ann_fits_a_separable_toy_set() {
    // At 12x12 every bar is longer than it is thick, so the classes separate.
    let data =
        synthetic_bars(&SyntheticConfig { height: 12, width: 12, samples: 200, jitter: 1, seed: 1, ..Default::default() })
            .unwrap();
    let specs = vgg_like(&[12, 12, 1], 2, &[4], 16, 0.0).unwrap();
    let mut m = Model::new(&[12, 12, 1], 2, &specs, Mode::Ann, 1).unwrap();
    let mut cfg = TrainConfig::ann(50, 1);
    cfg.momentum = 0.9;
    let mut rec = Recorder::default();
    train(&mut m, &data, None, &cfg, &mut rec).unwrap();
    let reached = rec.epochs.iter().position(|e| e.train_acc >= 99.0);
    assert!(reached.is_some(), "final train acc {}", rec.epochs.last().unwrap().train_acc);
    assert!(accuracy(&m, &data).unwrap() >= 99.0);
}

#[test]
fn hire_without_noise_replays_traditional_exactly() {
    let data = tiny_data(40, 2);
    let mut trad = tiny_snn(2);
    let mut hire = trad.clone();
    let mut ct = snn_cfg(TrainMode::SnnTraditional, 3);
    ct.eps_s = 0.0;
    ct.eps_t = 0.0;
    let ch = TrainConfig { mode: TrainMode::SnnHire, periods: 1, ..ct.clone() };
    let (mut rt, mut rh) = (Recorder::default(), Recorder::default());
    train(&mut trad, &data, None, &ct, &mut rt).unwrap();
    train(&mut hire, &data, None, &ch, &mut rh).unwrap();
    assert_eq!(rt.params.len(), rh.params.len());
    for (a, b) in rt.params.iter().zip(&rh.params) {
        assert_eq!(a, b);
    }
    assert_eq!(trad, hire);
}

#[test]
fn update_counts_and_stored_steps() {
    let data = tiny_data(24, 3);
    for (mode, periods, updates, stored) in [
        (TrainMode::SnnHire, 2, 2, 2),
        (TrainMode::SnnGaussian, 4, 4, 1),
        (TrainMode::SnnTraditional, 2, 1, 4),
    ] {
        let mut m = tiny_snn(3);
        let cfg = TrainConfig { periods, ..snn_cfg(mode, 1) };
        let mut rec = Recorder::default();
        let report = train(&mut m, &data, None, &cfg, &mut rec).unwrap();
        let batches = 3;
        assert_eq!(rec.events.len(), batches * updates, "{:?}", mode);
        assert_eq!(report.epochs[0].updates, batches * updates);
        assert_eq!(report.peak_stored_steps, stored);
        assert_eq!(gradient_storage_report(&cfg), stored);
        assert!(rec.events.iter().all(|e| e.5 == stored));
        assert_eq!(report.epochs[0].simulated_steps, 24 * 4, "same simulated time for {:?}", mode);
    }
}

#[test]
fn storage_ratio_for_six_steps() {
    let hire = TrainConfig::snn(TrainMode::SnnHire, 1, 0);
    let trad = TrainConfig::snn(TrainMode::SnnTraditional, 1, 0);
    assert_eq!((gradient_storage_report(&hire), gradient_storage_report(&trad)), (3, 6));
    let long = TrainConfig { time_steps: 10, periods: 1, ..hire };
    assert_eq!(gradient_storage_report(&long), 10);
}

#[test]
fn noise_carries_across_batches() {
    let data = tiny_data(16, 4);
    let mut m = tiny_snn(4);
    let cfg = snn_cfg(TrainMode::SnnHire, 1);
    let mut rec = Recorder::default();
    train(&mut m, &data, None, &cfg, &mut rec).unwrap();
    assert_eq!(rec.events.len(), 4);
    let zero = |k: &[Tensor]| k.iter().all(|t| t.data().iter().all(|&v| v == 0.0));
    assert!(zero(&rec.events[0].3), "noise starts at zero");
    let last_of_first = &rec.events[1];
    let first_of_second = &rec.events[2];
    assert_eq!((last_of_first.1, last_of_first.2), (0, 1));
    assert_eq!((first_of_second.1, first_of_second.2), (1, 0));
    assert!(!zero(&last_of_first.4));
    assert_eq!(first_of_second.3, last_of_first.4);
    for e in &rec.events {
        for k in &e.4 {
            assert!(k.data().iter().all(|v| v.abs() <= cfg.eps_t));
        }
    }
}

#[test]
fn crafted_noise_steps_by_sign() {
    let data = tiny_data(8, 5);
    let mut m = tiny_snn(5);
    let cfg = TrainConfig { eps_s: 0.01, eps_t: 0.025, ..snn_cfg(TrainMode::SnnHire, 2) };
    let mut rec = Recorder::default();
    train(&mut m, &data, None, &cfg, &mut rec).unwrap();
    for e in &rec.events {
        for (before, after) in e.3.iter().zip(&e.4) {
            for (b, a) in before.data().iter().zip(after.data()) {
                let step = (a - b).abs();
                assert!(step <= 0.01 + 1e-15 && a.abs() <= 0.025);
            }
        }
    }
    let sat = rec.epochs.last().unwrap().kappa_saturation;
    assert!((0.0..=1.0).contains(&sat));
}

#[test]
fn gaussian_noise_has_requested_spread() {
    let data = tiny_data(64, 6);
    let mut m = tiny_snn(6);
    let cfg = TrainConfig { eps_s: 0.05, eps_t: 10.0, batch_size: 32, ..snn_cfg(TrainMode::SnnGaussian, 13) };
    let mut rec = Recorder::default();
    train(&mut m, &data, None, &cfg, &mut rec).unwrap();
    let draws: Vec<f64> =
        rec.events.iter().flat_map(|e| e.3.iter().flat_map(|t| t.data().to_vec())).collect();
    assert!(draws.len() >= 100_000);
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let sd = (draws.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    assert!((sd - 0.05).abs() <= 0.05 * 0.05, "sd {}", sd);

    let mut again = tiny_snn(6);
    let mut rec2 = Recorder::default();
    train(&mut again, &data, None, &TrainConfig { epochs: 1, ..cfg.clone() }, &mut rec2).unwrap();
    assert_eq!(rec2.events[0].3, rec.events[0].3);
}

#[test]
fn frozen_neuron_parameters_do_not_move() {
    let data = tiny_data(16, 7);
    let mut m = tiny_snn(7);
    let before: Vec<(f64, f64)> = m.layers.iter().map(|l| (l.threshold, l.leak)).collect();
    let w0 = m.layers[0].weight.clone();
    let cfg = TrainConfig { freeze_threshold: true, freeze_leak: true, ..snn_cfg(TrainMode::SnnTraditional, 2) };
    train(&mut m, &data, None, &cfg, &mut ()).unwrap();
    let after: Vec<(f64, f64)> = m.layers.iter().map(|l| (l.threshold, l.leak)).collect();
    assert_eq!(before, after);
    assert_ne!(w0, m.layers[0].weight);
}

#[test]
fn membrane_carry_changes_later_periods_only() {
    let data = tiny_data(8, 8);
    let base = snn_cfg(TrainMode::SnnHire, 1);
    let mut a = tiny_snn(8);
    let mut b = a.clone();
    let (mut ra, mut rb) = (Recorder::default(), Recorder::default());
    train(&mut a, &data, None, &base, &mut ra).unwrap();
    train(&mut b, &data, None, &TrainConfig { carry_membrane: true, ..base }, &mut rb).unwrap();
    assert_eq!(ra.params[0], rb.params[0]);
    assert_ne!(ra.params[1], rb.params[1]);
}

#[test]
fn bad_configs_are_rejected() {
    let data = tiny_data(8, 9);
    let mut m = tiny_snn(9);
    let cfg = TrainConfig { time_steps: 2, periods: 3, ..snn_cfg(TrainMode::SnnHire, 1) };
    assert!(matches!(train(&mut m, &data, None, &cfg, &mut ()), Err(Error::Config(_))));
    let ann_cfg = TrainConfig::ann(1, 0);
    assert!(matches!(train(&mut m, &data, None, &ann_cfg, &mut ()), Err(Error::Contract(_))));
}

#[test]
fn divergence_is_reported() {
    let data = tiny_data(16, 10);
    let specs = vgg_like(&[8, 8, 1], 2, &[4], 8, 0.0).unwrap();
    let mut m = Model::new(&[8, 8, 1], 2, &specs, Mode::Ann, 10).unwrap();
    let mut cfg = TrainConfig::ann(5, 0);
    cfg.lr = cfg.lr.with_initial(1e200);
    assert!(matches!(train(&mut m, &data, None, &cfg, &mut ()), Err(Error::Diverged(_))));
}
