use hiresnn_core::attacks::AttackConfig;
use hiresnn_core::data::{synthetic_bars, Dataset, SyntheticConfig};
use hiresnn_core::metrics::{
    delta, energy, evaluate, flops, layer_report, obfuscation_checklist, profile, ActivityReport, ChecklistConfig,
    EnergyConstants, EnergyScheme, LayerActivityRecord, Precision,
};
use hiresnn_core::model::{vgg_like, Encoder, InputEncoding, LayerSpec, Mode, Model};
use hiresnn_core::tensorops::ConvSpec;
use hiresnn_core::Tensor;

fn data(samples: usize) -> Dataset {
    synthetic_bars(&SyntheticConfig { height: 8, width: 8, samples, jitter: 1, ..Default::default() }).unwrap()
}

fn conv_net(mode: Mode) -> Model {
    let specs = [
        LayerSpec::conv(ConvSpec::new(3, 4, 16).with_padding(1)),
        LayerSpec::neuron(),
        LayerSpec::linear(8 * 8 * 16, 10),
        LayerSpec::output(),
    ];
    Model::new(&[8, 8, 4], 10, &specs, mode, 0).unwrap()
}

fn activity(input: f64, hidden: f64) -> ActivityReport {
    ActivityReport {
        input_tasa: input,
        layers: vec![LayerActivityRecord { layer: 1, neurons: 1024, spikes: 0.0, steps: 4, sa: 4.0 * hidden, tasa: hidden }],
    }
}

#[test]
fn conv_flops_follow_the_formula() {
    let fl = flops(&conv_net(Mode::Ann), None).unwrap();
    assert_eq!(fl[0].ann, 36864.0);
    assert_eq!(fl[1].ann, 10240.0);
}

#[test]
fn snn_flops_scale_with_input_activity() {
    let m = conv_net(Mode::Snn);
    assert!(flops(&m, None).is_err());
    let fl = flops(&m, Some(&activity(1.0, 0.0))).unwrap();
    assert_eq!((fl[0].snn, fl[1].snn), (Some(36864.0), Some(0.0)));
    let fl = flops(&m, Some(&activity(1.0, 1.0))).unwrap();
    assert_eq!(fl[1].snn, Some(fl[1].ann));
    let fl = flops(&m, Some(&activity(0.25, 0.5))).unwrap();
    assert_eq!((fl[0].snn, fl[1].snn), (Some(9216.0), Some(5120.0)));
}

#[test]
fn energy_is_linear_and_monotone_in_activity() {
    let m = conv_net(Mode::Snn);
    let c = EnergyConstants::default();
    let mut last = -1.0;
    for k in 0..=10 {
        let z = k as f64 / 10.0;
        let fl = flops(&m, Some(&activity(1.0, z))).unwrap();
        let e = energy(&fl, &c, EnergyScheme::SnnDirect, Precision::Fp32).unwrap();
        assert!(e > last);
        assert_eq!(e, 36864.0 * 4.6 + 10240.0 * z * 0.9);
        last = e;
    }
    let fl = flops(&m, Some(&activity(1.0, 0.3))).unwrap();
    let rows = layer_report(&m, Some(&activity(1.0, 0.3)), &c, EnergyScheme::SnnDirect, Precision::Fp32).unwrap();
    let total: f64 = rows.iter().map(|r| r.energy_pj).sum();
    assert!((total - energy(&fl, &c, EnergyScheme::SnnDirect, Precision::Fp32).unwrap()).abs() < 1e-9);
    let ann = energy(&flops(&conv_net(Mode::Ann), None).unwrap(), &c, EnergyScheme::Ann, Precision::Int32).unwrap();
    assert!((ann - (36864.0 + 10240.0) * 3.2).abs() < 1e-6);
}

#[test]
fn snn_integrates_to_a_spike_on_the_second_step() {
    let specs = [LayerSpec::linear(1, 1), LayerSpec::neuron(), LayerSpec::linear(1, 1), LayerSpec::output()];
    let mut m = Model::new(&[1], 1, &specs, Mode::Snn, 0).unwrap();
    m.layers[0].weight = Some(Tensor::from_vec(&[1, 1], vec![1.0]).unwrap());
    m.layers[2].weight = Some(Tensor::from_vec(&[1, 1], vec![1.0]).unwrap());
    m.layers[1].threshold = 1.0;
    m.layers[1].leak = 1.0;
    let (logits, traces) = m.forward_snn(&Tensor::from_vec(&[1], vec![0.6]).unwrap(), Encoder::Direct, 2).unwrap();
    let s: Vec<f64> = traces[0].spikes.iter().map(|t| t.data()[0]).collect();
    assert_eq!(s, vec![0.0, 1.0]);
    assert_eq!(logits.data(), &[0.5]);
}

#[test]
fn high_threshold_neurons_integrate_linearly() {
    let specs = [LayerSpec::linear(2, 3), LayerSpec::neuron(), LayerSpec::linear(3, 2), LayerSpec::output()];
    let mut m = Model::new(&[2], 2, &specs, Mode::Snn, 3).unwrap();
    m.layers[1].threshold = 1e9;
    m.layers[1].leak = 0.7;
    let x = Tensor::from_vec(&[2], vec![0.3, 0.8]).unwrap();
    let (logits, traces) = m.forward_snn(&x, Encoder::Direct, 5).unwrap();
    assert_eq!(traces[0].total_spikes(), 0.0);
    assert!(logits.data().iter().all(|&v| v == 0.0));
    let w = m.layers[0].weight.as_ref().unwrap().data();
    for j in 0..3 {
        let i = 0.3 * w[j] + 0.8 * w[3 + j];
        let mut u = 0.0;
        for (t, p) in traces[0].potentials.iter().enumerate() {
            u = 0.7 * u + i;
            assert!((p.data()[j] - u).abs() < 1e-12, "step {}", t);
        }
    }
}

#[test]
fn zero_budget_attack_matches_clean_accuracy() {
    let d = data(40);
    let specs = vgg_like(&[8, 8, 1], 2, &[4], 8, 0.0).unwrap();
    for mode in [Mode::Ann, Mode::Snn] {
        let mut m = Model::new(&[8, 8, 1], 2, &specs, mode, 1).unwrap();
        m.time_steps = 3;
        for l in &mut m.layers {
            l.threshold = 0.3;
        }
        let clean = evaluate(&m, &d, None).unwrap();
        for cfg in [AttackConfig::fgsm(0.0), AttackConfig::pgd(0.0, 0.01, 3)] {
            let adv = evaluate(&m, &d, Some(&cfg)).unwrap();
            assert_eq!(adv.accuracy, clean.accuracy);
            assert_eq!(adv.pd.as_ref().unwrap().max_input, 0.0);
            assert!(adv.pd.unwrap().mean_spike.iter().all(|&v| v == 0.0));
        }
        assert_eq!(delta(clean.accuracy, clean.accuracy), 0.0);
    }
}

#[test]
fn activity_profile_is_in_range() {
    let d = data(10);
    let specs = vgg_like(&[8, 8, 1], 2, &[4], 8, 0.0).unwrap();
    let mut m = Model::new(&[8, 8, 1], 2, &specs, Mode::Snn, 2).unwrap();
    m.time_steps = 4;
    for l in &mut m.layers {
        l.threshold = 0.2;
    }
    let direct = profile(&m, &d).unwrap();
    assert_eq!(direct.input_tasa, 1.0);
    assert_eq!(direct.layers.len(), 2);
    for r in &direct.layers {
        assert!((0.0..=4.0).contains(&r.sa) && (0.0..=1.0).contains(&r.tasa));
    }
    assert!(direct.layers[0].tasa > 0.0);
    m.encoding = InputEncoding::Poisson { seed: 9, samples: 1 };
    let rate = profile(&m, &d).unwrap();
    let mean: f64 = d.images.iter().map(|x| x.sum() / x.len() as f64).sum::<f64>() / d.len() as f64;
    assert!((rate.input_tasa - mean).abs() < 0.05, "{} vs {}", rate.input_tasa, mean);
}

#[test]
fn untrained_model_still_has_adversarial_examples() {
    let d = data(12);
    let specs = vgg_like(&[8, 8, 1], 2, &[4], 8, 0.0).unwrap();
    let m = Model::new(&[8, 8, 1], 2, &specs, Mode::Ann, 4).unwrap();
    let other = Model::new(&[8, 8, 1], 2, &specs, Mode::Ann, 5).unwrap();
    let cfg = ChecklistConfig { eps_sweep: vec![0.0, 0.1, 1.0], ..Default::default() };
    let rows = obfuscation_checklist(&m, &other, &d, &cfg).unwrap();
    assert_eq!(rows.len(), 5);
    assert!(rows[4].pass, "{:?}", rows[4]);
}

#[test]
fn evaluate_rejects_empty_data() {
    let d = data(2).slice(0..0);
    assert!(evaluate(&conv_net(Mode::Ann), &d, None).is_err());
}
