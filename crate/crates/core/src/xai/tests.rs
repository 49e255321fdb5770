use alloc::vec;
use alloc::vec::Vec;

use proptest::prelude::*;
use rand::Rng;

use super::*;
use crate::nn::{digit_classifier, Head, Layer};
use crate::rng::stream;

fn random_digit(rng: &mut crate::rng::StreamRng) -> Tensor {
    // A few bright strokes on a dark canvas.
    let mut data = vec![0.0f32; 28 * 28];
    for _ in 0..3 {
        let (r, c) = (rng.random_range(6..22), rng.random_range(6..22));
        let horizontal = rng.random_bool(0.5);
        for t in 0..8usize {
            let (rr, cc) = if horizontal { (r, (c + t).min(27)) } else { ((r + t).min(27), c) };
            data[rr * 28 + cc] = 1.0;
        }
    }
    Tensor::image(28, 28, data).unwrap()
}

fn l2(a: &Heatmap, b: &Heatmap) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[test]
fn smoothgrad_without_noise_is_vanilla_gradient() {
    let mut rng = stream(1, 0);
    let net = digit_classifier(&mut rng).unwrap();
    let x = random_digit(&mut rng);
    let cfg = XaiConfig { sigma: 0.0, n_samples: 1, ..XaiConfig::default() };
    let h = smoothgrad(&net, &x, Target::Logit(3), &cfg, &mut rng).unwrap();
    let g = net.input_gradient(&x, Target::Logit(3)).unwrap();
    let raw: Vec<f64> = g.data().iter().map(|v| (*v as f64).abs()).collect();
    assert_eq!(h, Heatmap::from_raw(28, 28, &raw));
}

#[test]
fn smoothgrad_is_seeded() {
    let mut rng = stream(2, 0);
    let net = digit_classifier(&mut rng).unwrap();
    let x = random_digit(&mut rng);
    let cfg = XaiConfig { n_samples: 5, ..XaiConfig::default() };
    let a = smoothgrad(&net, &x, Target::Logit(0), &cfg, &mut stream(9, 1)).unwrap();
    let b = smoothgrad(&net, &x, Target::Logit(0), &cfg, &mut stream(9, 1)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn more_smoothgrad_samples_approach_the_reference() {
    let mut rng = stream(3, 0);
    let net = digit_classifier(&mut rng).unwrap();
    for i in 0..20 {
        let x = random_digit(&mut rng);
        let run = |n: usize, s: u64| {
            let cfg = XaiConfig { n_samples: n, ..XaiConfig::default() };
            smoothgrad(&net, &x, Target::Logit(i % 10), &cfg, &mut stream(s, i as u64)).unwrap()
        };
        let reference = run(500, 100);
        assert!(l2(&run(25, 200), &reference) < l2(&run(1, 300), &reference));
    }
}

fn smooth_net(rng: &mut crate::rng::StreamRng) -> Network {
    let mut net = Network::initialized(
        [1, 4, 4],
        vec![
            Layer::Dense { inputs: 16, outputs: 8 },
            Layer::Tanh,
            Layer::Dense { inputs: 8, outputs: 3 },
            Layer::Softmax,
        ],
        Head::Classifier { classes: 3 },
        rng,
    )
    .unwrap();
    for p in net.params_mut() {
        for b in p.bias.data_mut() {
            *b = rng.random_range(-0.3..0.3);
        }
    }
    net
}

#[test]
fn integrated_gradients_are_complete() {
    let mut rng = stream(4, 0);
    for _ in 0..20 {
        let net = smooth_net(&mut rng);
        let x = Tensor::image(4, 4, (0..16).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
        let cfg = XaiConfig { ig_steps: 128, ..XaiConfig::default() };
        let ig = integrated_gradients(&net, &x, Target::Output(1), &cfg).unwrap();
        let total: f64 = ig.attributions.iter().sum();
        let delta = ig.output - ig.baseline_output;
        assert!((total - delta).abs() <= 1e-2 * delta.abs().max(1e-3), "{total} vs {delta}");
    }
}

#[test]
fn integrated_gradients_vanish_at_the_baseline() {
    let mut rng = stream(5, 0);
    let net = smooth_net(&mut rng);
    let ig = integrated_gradients(&net, &Tensor::zeros(vec![1, 4, 4]), Target::Output(0), &XaiConfig::default()).unwrap();
    assert!(ig.attributions.iter().all(|&a| a == 0.0));
    assert!(ig.heatmap.is_degenerate());
}

#[test]
fn integrated_gradients_of_linear_score_is_weight_times_input() {
    let mut rng = stream(6, 0);
    let net = Network::initialized(
        [1, 3, 3],
        vec![Layer::Dense { inputs: 9, outputs: 4 }, Layer::Softmax],
        Head::Classifier { classes: 4 },
        &mut rng,
    )
    .unwrap();
    let w = net.params()[0].as_ref().unwrap().weight.data().to_vec();
    let x = Tensor::image(3, 3, (0..9).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let ig = integrated_gradients(&net, &x, Target::Logit(2), &XaiConfig { ig_steps: 7, ..XaiConfig::default() }).unwrap();
    for i in 0..9 {
        let expected = w[2 * 9 + i] as f64 * x.data()[i] as f64;
        assert!((ig.attributions[i] - expected).abs() < 1e-6);
    }
}

#[test]
fn gradcam_map_is_nonnegative_and_input_sized() {
    let mut rng = stream(7, 0);
    let net = digit_classifier(&mut rng).unwrap();
    for k in 0..5 {
        let x = random_digit(&mut rng);
        let g = gradcam_pp(&net, &x, Target::Logit(k)).unwrap();
        assert!(g.cam.iter().all(|&v| v >= 0.0));
        assert_eq!((g.heatmap.height(), g.heatmap.width()), (28, 28));
        assert!(g.heatmap.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}

#[test]
fn gradcam_matches_hand_calculation() {
    // 1x1 convolution with unit weight keeps the 3x3 input as the single
    // feature map; the dense layer is linear so d y / d A = v.
    let mut net = Network::zeroed(
        [1, 3, 3],
        vec![
            Layer::Conv2d { in_channels: 1, out_channels: 1, kernel: 1, stride: 1 },
            Layer::Relu,
            Layer::Dense { inputs: 9, outputs: 2 },
            Layer::Softmax,
        ],
        Head::Classifier { classes: 2 },
    )
    .unwrap();
    let v = [0.5f32, -1.0, 2.0, 1.0, 0.0, -0.5, 0.25, 1.5, -2.0];
    let mut dense_w = vec![0.0f32; 18];
    dense_w[..9].copy_from_slice(&v);
    net.set_params(vec![
        crate::nn::Param {
            weight: Tensor::new(vec![1, 1, 1, 1], vec![1.0]).unwrap(),
            bias: Tensor::zeros(vec![1]),
        },
        crate::nn::Param {
            weight: Tensor::new(vec![2, 9], dense_w).unwrap(),
            bias: Tensor::zeros(vec![2]),
        },
    ])
    .unwrap();
    let a = [1.0f32, 2.0, 0.0, 0.0, 1.0, 3.0, 2.0, 0.0, 1.0];
    let x = Tensor::image(3, 3, a.to_vec()).unwrap();
    let g = gradcam_pp(&net, &x, Target::Logit(0)).unwrap();

    // sum A = 10. For g > 0: alpha = g^2 / (2 g^2 + 10 g^3) = 1 / (2 + 10 g).
    // Positive gradients: 0.5, 2.0, 1.0, 0.25, 1.5.
    let weight = 0.5 / (2.0 + 5.0) + 2.0 / (2.0 + 20.0) + 1.0 / (2.0 + 10.0) + 0.25 / (2.0 + 2.5) + 1.5 / (2.0 + 15.0);
    assert!((g.weights[0] - weight).abs() < 1e-6);
    for i in 0..9 {
        assert!((g.cam[i] - weight * a[i] as f64).abs() < 1e-6);
    }
    let expected = Heatmap::from_raw(3, 3, &a.iter().map(|&v| weight * v as f64).collect::<Vec<_>>());
    for (got, want) in g.heatmap.values().iter().zip(expected.values()) {
        assert!((got - want).abs() < 1e-9);
    }
}

#[test]
fn gradcam_with_zero_gradient_is_degenerate() {
    let net = Network::zeroed(
        [1, 3, 3],
        vec![
            Layer::Conv2d { in_channels: 1, out_channels: 2, kernel: 2, stride: 1 },
            Layer::Relu,
            Layer::Dense { inputs: 8, outputs: 2 },
            Layer::Softmax,
        ],
        Head::Classifier { classes: 2 },
    )
    .unwrap();
    let g = gradcam_pp(&net, &Tensor::zeros(vec![1, 3, 3]), Target::Logit(1)).unwrap();
    assert!(g.heatmap.is_degenerate());
    assert!(g.heatmap.values().iter().all(|&v| v == 0.0));
}

#[test]
fn threshold_examples() {
    let h = Heatmap::from_normalized(1, 2, vec![0.05, 0.5]);
    assert_eq!(h.threshold(0.0), h);
    assert_eq!(h.threshold(0.1).values(), &[0.0, 0.5]);
    let cold = Heatmap::from_normalized(1, 2, vec![0.05, 0.02]).threshold(0.1);
    assert!(cold.is_degenerate());
    assert_eq!(cold.values(), &[0.0, 0.0]);
}

#[test]
fn entropy_examples() {
    let uniform = Heatmap::from_normalized(4, 4, vec![0.7; 16]);
    assert!((uniform.stats().entropy - 4.0).abs() < 1e-12);
    let mut one_hot = vec![0.0; 16];
    one_hot[5] = 1.0;
    assert_eq!(Heatmap::from_normalized(4, 4, one_hot).stats().entropy, 0.0);
    let half = Heatmap::from_normalized(2, 2, vec![0.5, 0.5, 0.0, 0.0]);
    assert!((half.stats().entropy - 1.0).abs() < 1e-12);
    assert_eq!(Heatmap::from_normalized(2, 2, vec![0.0; 4]).stats().entropy, 0.0);
}

#[test]
fn stats_report_the_raw_mean() {
    let h = Heatmap::from_raw(1, 4, &[2.0, 4.0, 6.0, 8.0]);
    assert_eq!(h.stats().mean_intensity, 5.0);
    assert_eq!(h.values(), &[0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]);
}

#[test]
fn uniform_raw_map_is_degenerate() {
    let h = Heatmap::from_raw(2, 2, &[3.0; 4]);
    assert!(h.is_degenerate());
    assert!(h.values().iter().all(|&v| v == 0.0));
}

#[test]
fn resize_identity_and_constant() {
    let src: Vec<f64> = (0..9).map(|v| v as f64).collect();
    assert_eq!(bilinear_resize(&src, 3, 3, 3, 3), src);
    let up = bilinear_resize(&[2.0; 4], 2, 2, 5, 7);
    assert!(up.iter().all(|&v| (v - 2.0).abs() < 1e-12));
}

#[test]
fn config_validation() {
    assert!(XaiConfig::default().validate().is_ok());
    assert!(XaiConfig { n_samples: 0, ..XaiConfig::default() }.validate().is_err());
    assert!(XaiConfig { epsilon: 1.0, ..XaiConfig::default() }.validate().is_err());
    assert_eq!(XaiMethod::from_name("gradcampp"), Some(XaiMethod::GradCamPlusPlus));
}

proptest! {
    #[test]
    fn normalisation_is_idempotent_and_scale_invariant(
        raw in proptest::collection::vec(0.0f64..100.0, 16),
        scale in 0.01f64..1000.0,
    ) {
        let h = Heatmap::from_raw(4, 4, &raw);
        let again = h.renormalized();
        for (a, b) in h.values().iter().zip(again.values()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        let scaled: Vec<f64> = raw.iter().map(|v| v * scale).collect();
        let hs = Heatmap::from_raw(4, 4, &scaled);
        for (a, b) in h.values().iter().zip(hs.values()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        prop_assert!(h.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}
