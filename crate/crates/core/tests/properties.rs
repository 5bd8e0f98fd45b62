use hiresnn_core::attacks::{attack, AttackConfig};
use hiresnn_core::metrics::{perturbation_distance, spiking_activity};
use hiresnn_core::model::{vgg_like, Encoder, Mode, Model};
use hiresnn_core::spiking::{lif_step, NeuronState};
use hiresnn_core::tensorops::{conv2d_forward, ConvSpec};
use hiresnn_core::Tensor;
use proptest::prelude::*;

fn tensor(shape: &'static [usize], lo: f64, hi: f64) -> impl Strategy<Value = Tensor> {
    let n: usize = shape.iter().product();
    prop::collection::vec(lo..hi, n).prop_map(move |v| Tensor::from_vec(shape, v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conv_is_linear_in_input(
        a in tensor(&[5, 5, 2], -1.0, 1.0),
        b in tensor(&[5, 5, 2], -1.0, 1.0),
        w in tensor(&[3, 3, 2, 3], -1.0, 1.0),
        alpha in -2.0f64..2.0,
        beta in -2.0f64..2.0,
    ) {
        let spec = ConvSpec::new(3, 2, 3).with_padding(1);
        let mix = a.zip_map(&b, |x, y| alpha * x + beta * y).unwrap();
        let lhs = conv2d_forward(&mix, &w, &spec).unwrap();
        let ya = conv2d_forward(&a, &w, &spec).unwrap();
        let yb = conv2d_forward(&b, &w, &spec).unwrap();
        let rhs = ya.zip_map(&yb, |x, y| alpha * x + beta * y).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-10);
    }

    #[test]
    fn perturbation_distance_is_a_metric(
        x in tensor(&[12], 0.0, 1.0),
        y in tensor(&[12], 0.0, 1.0),
        z in tensor(&[12], 0.0, 1.0),
    ) {
        let dxy = perturbation_distance(&x, &y).unwrap();
        let dyx = perturbation_distance(&y, &x).unwrap();
        let dxz = perturbation_distance(&x, &z).unwrap();
        let dzy = perturbation_distance(&z, &y).unwrap();
        prop_assert_eq!(dxy, dyx);
        prop_assert_eq!(perturbation_distance(&x, &x).unwrap(), 0.0);
        prop_assert!(dxy >= 0.0);
        prop_assert_eq!(dxy == 0.0, x == y);
        prop_assert!(dxy <= dxz + dzy + 1e-12);
    }

    #[test]
    fn lif_soft_reset_conserves_charge(u0 in -2.0f64..2.0, i in -2.0f64..3.0, v in 0.1f64..2.0, leak in 0.0f64..1.0) {
        let state = NeuronState { u: Tensor::from_vec(&[1], vec![u0]).unwrap(), threshold: v, leak, t: 0 };
        let (o, next) = lif_step(&state, &Tensor::from_vec(&[1], vec![i]).unwrap()).unwrap();
        let spiked = o.data()[0];
        prop_assert_eq!(spiked, if u0 > v { 1.0 } else { 0.0 });
        prop_assert!((next.u.data()[0] - (leak * u0 + i - v * spiked)).abs() < 1e-12);
    }

    #[test]
    fn activity_is_bounded(x in tensor(&[8, 8, 1], 0.0, 1.0), steps in 1usize..6, seed in 0u64..1000) {
        let specs = vgg_like(&[8, 8, 1], 2, &[3], 6, 0.0).unwrap();
        let mut m = Model::new(&[8, 8, 1], 2, &specs, Mode::Snn, seed).unwrap();
        for l in &mut m.layers {
            l.threshold = 0.2;
        }
        let (_, traces) = m.forward_snn(&x, Encoder::Direct, steps).unwrap();
        for tr in &traces {
            let n = tr.initial_potential.len();
            let (sa, tasa) = spiking_activity(tr, n, steps).unwrap();
            prop_assert!((0.0..=steps as f64).contains(&sa));
            prop_assert!((0.0..=1.0).contains(&tasa));
        }
    }

    #[test]
    fn attacks_stay_in_the_box(x in tensor(&[8, 8, 1], 0.0, 1.0), eps in 0.0f64..0.2, seed in 0u64..1000, pgd: bool) {
        let specs = vgg_like(&[8, 8, 1], 2, &[3], 6, 0.0).unwrap();
        let m = Model::new(&[8, 8, 1], 2, &specs, Mode::Ann, seed).unwrap();
        let cfg = if pgd { AttackConfig::pgd(eps, eps / 3.0, 4) } else { AttackConfig::fgsm(eps) };
        let adv = attack(&m, &x, (seed % 2) as usize, &cfg).unwrap();
        for (a, b) in adv.data().iter().zip(x.data()) {
            prop_assert!((a - b).abs() <= eps);
            prop_assert!((0.0..=1.0).contains(a));
        }
    }
}
