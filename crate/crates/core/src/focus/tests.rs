use alloc::vec;
use alloc::vec::Vec;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};

use super::*;
use crate::rng::StreamRng;

fn cp(index: usize, x: f64, y: f64) -> ControlPointRef {
    ControlPointRef {
        index,
        position: Vec2::new(x, y),
    }
}

fn map(h: usize, w: usize, cells: &[(usize, usize, f64)]) -> Heatmap {
    let mut v = vec![0.0; h * w];
    for &(r, c, x) in cells {
        v[r * w + c] = x;
    }
    Heatmap::from_normalized(h, w, v)
}

/// Mean over every in-bounds pixel within Chebyshev distance `d` of the
/// rounded point.
fn window_oracle(h: &Heatmap, p: Vec2, d: usize) -> f64 {
    let (pr, pc) = (libm::round(p.y), libm::round(p.x));
    let (mut sum, mut n) = (0.0, 0usize);
    for r in 0..h.height() {
        for c in 0..h.width() {
            if (r as f64 - pr).abs() <= d as f64 && (c as f64 - pc).abs() <= d as f64 {
                sum += h.at(r, c);
                n += 1;
            }
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn nearest_oracle(points: &[ControlPointRef], r: usize, c: usize) -> usize {
    let d: Vec<f64> = points
        .iter()
        .map(|q| (q.position.x - c as f64).powi(2) + (q.position.y - r as f64).powi(2))
        .collect();
    let min = d.iter().copied().fold(f64::INFINITY, f64::min);
    d.iter().position(|&x| x == min).unwrap()
}

fn random_instance(rng: &mut StreamRng) -> (Heatmap, Vec<ControlPointRef>) {
    let v: Vec<f64> = (0..28 * 28)
        .map(|_| if rng.random_bool(0.4) { rng.random::<f64>() } else { 0.0 })
        .collect();
    let n = rng.random_range(1..=13);
    let pts = (0..n)
        .map(|i| cp(i, rng.random_range(-4.0..32.0), rng.random_range(-4.0..32.0)))
        .collect();
    (Heatmap::from_normalized(28, 28, v), pts)
}

#[test]
fn constant_heatmap_gives_uniform_window_weights() {
    let h = Heatmap::from_normalized(10, 10, vec![0.5; 100]);
    let pts = [cp(0, 0.0, 0.0), cp(1, 5.0, 5.0), cp(2, 9.0, 3.0)];
    let w = window_weights(&h, &pts, SquareWindowParams::default());
    for &x in w.weights() {
        assert!((x - 1.0 / 3.0).abs() < 1e-12);
    }
    assert!(!w.is_degenerate());
}

#[test]
fn single_centre_peak_averages_over_window() {
    let h = map(10, 10, &[(4, 4, 9.0)]);
    let w = window_weights(&h, &[cp(0, 4.0, 4.0), cp(1, 8.0, 8.0)], SquareWindowParams { d: 1 });
    assert_eq!(w.raw(), &[1.0, 0.0]);
    assert_eq!(w.weights(), &[1.0, 0.0]);
}

#[test]
fn default_window_size_is_three() {
    assert_eq!(SquareWindowParams::default().window_size(), 3);
}

#[test]
fn border_windows_average_in_bounds_cells() {
    let h = map(5, 5, &[(0, 0, 1.0)]);
    let w = window_weights(&h, &[cp(0, 0.0, 0.0)], SquareWindowParams { d: 1 });
    assert_eq!(w.raw(), &[0.25]);
    let outside = window_weights(&h, &[cp(0, -3.0, -3.0)], SquareWindowParams { d: 1 });
    assert_eq!(outside.raw(), &[0.0]);
}

#[test]
fn cold_map_falls_back_to_uniform() {
    let h = Heatmap::from_normalized(6, 6, vec![0.0; 36]);
    let pts = [cp(0, 1.0, 1.0), cp(1, 4.0, 4.0)];
    let w = window_weights(&h, &pts, SquareWindowParams::default());
    assert!(w.is_degenerate());
    assert_eq!(w.weights(), &[0.5, 0.5]);
    let a = cluster_partition(&h, &pts);
    assert!(a.is_degenerate());
    assert!(cluster_weights(&a, &pts).is_degenerate());
    assert_eq!(attractor(&a, 0), None);
}

#[test]
fn one_point_takes_every_hot_pixel() {
    let h = map(6, 6, &[(0, 0, 0.3), (5, 5, 1.0), (2, 3, 0.7)]);
    let a = cluster_partition(&h, &[cp(0, 2.0, 2.0)]);
    assert_eq!(a.cluster(0).len(), 3);
    assert_eq!(a.label(1, 1), None);
}

#[test]
fn nearest_point_wins_and_ties_go_low() {
    let h = map(3, 12, &[(0, 2, 1.0), (0, 5, 1.0)]);
    let a = cluster_partition(&h, &[cp(0, 0.0, 0.0), cp(1, 10.0, 0.0)]);
    assert_eq!(a.label(0, 2), Some(0));
    assert_eq!(a.label(0, 5), Some(0));
}

#[test]
fn cluster_weight_examples() {
    let h = map(5, 5, &[(2, 2, 0.7)]);
    let pts = [cp(0, 2.0, 2.0)];
    let a = cluster_partition(&h, &pts);
    assert_eq!(cluster_weights(&a, &pts).raw(), &[0.7]);

    let h = map(5, 5, &[(2, 4, 1.0)]);
    let a = cluster_partition(&h, &pts);
    assert_eq!(cluster_weights(&a, &pts).raw(), &[0.5]);
}

#[test]
fn attractor_examples() {
    let h = map(3, 3, &[(0, 0, 0.5), (0, 2, 0.5)]);
    let a = cluster_partition(&h, &[cp(0, 1.0, 1.0)]);
    assert_eq!(attractor(&a, 0), Some(Vec2::new(1.0, 0.0)));

    let h = map(3, 3, &[(2, 1, 0.4)]);
    let a = cluster_partition(&h, &[cp(0, 0.0, 0.0), cp(1, 2.0, 2.0)]);
    assert_eq!(attractor(&a, 1), Some(Vec2::new(1.0, 2.0)));
    assert_eq!(attractor(&a, 0), None);
    assert_eq!(attractor(&a, 7), None);
}

#[test]
fn brute_force_oracles_agree() {
    let mut rng = StreamRng::seed_from_u64(11);
    for _ in 0..200 {
        let (h, pts) = random_instance(&mut rng);
        let d = rng.random_range(0..3);
        let w = window_weights(&h, &pts, SquareWindowParams { d });
        for (k, p) in pts.iter().enumerate() {
            assert!((w.raw()[k] - window_oracle(&h, p.position, d)).abs() <= 1e-9);
        }

        let a = cluster_partition(&h, &pts);
        let mut raw = vec![0.0; pts.len()];
        let mut mass = vec![(0.0, Vec2::ZERO); pts.len()];
        for r in 0..28 {
            for c in 0..28 {
                let v = h.at(r, c);
                if v <= 0.0 {
                    assert_eq!(a.label(r, c), None);
                    continue;
                }
                let k = nearest_oracle(&pts, r, c);
                assert_eq!(a.label(r, c), Some(k));
                let p = Vec2::new(c as f64, r as f64);
                let dist = libm::sqrt((p - pts[k].position).norm_sq());
                raw[k] += v / if dist < 1.0 { 1.0 } else { dist };
                mass[k].0 += v;
                mass[k].1 += p * v;
            }
        }
        let cw = cluster_weights(&a, &pts);
        for k in 0..pts.len() {
            assert!((cw.raw()[k] - raw[k]).abs() <= 1e-9);
            match attractor(&a, k) {
                Some(c) => {
                    let o = mass[k].1 * (1.0 / mass[k].0);
                    assert!(c.distance(o) <= 1e-9);
                }
                None => assert_eq!(mass[k].0, 0.0),
            }
        }
    }
}

#[test]
fn sampling_examples() {
    let mut rng = StreamRng::seed_from_u64(3);
    let w = WeightVector::from_raw(vec![1.0, 0.0, 0.0]);
    assert!((0..1000).all(|_| sample_concept(&w, &mut rng) == 0));

    let w = WeightVector::from_raw(vec![0.5, 0.5]);
    let ones = (0..10_000).filter(|_| sample_concept(&w, &mut rng) == 1).count();
    assert!((4_700..=5_300).contains(&ones), "{ones}");

    let draws = |seed| {
        let mut r = StreamRng::seed_from_u64(seed);
        let w = WeightVector::from_raw(vec![0.2, 0.3, 0.5]);
        (0..50).map(|_| sample_concept(&w, &mut r)).collect::<Vec<_>>()
    };
    assert_eq!(draws(9), draws(9));
}

proptest! {
    #[test]
    fn weights_are_a_distribution(seed in any::<u64>()) {
        let mut rng = StreamRng::seed_from_u64(seed);
        let (h, pts) = random_instance(&mut rng);
        let a = cluster_partition(&h, &pts);
        for w in [window_weights(&h, &pts, SquareWindowParams::default()), cluster_weights(&a, &pts)] {
            prop_assert_eq!(w.len(), pts.len());
            prop_assert!(w.weights().iter().all(|&x| x >= 0.0));
            prop_assert!((w.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn scaling_raw_map_keeps_argmax(seed in any::<u64>(), scale in 0.01f64..100.0) {
        let mut rng = StreamRng::seed_from_u64(seed);
        let (h, pts) = random_instance(&mut rng);
        let scaled: Vec<f64> = h.values().iter().map(|v| v * scale).collect();
        let a = Heatmap::from_raw(28, 28, h.values());
        let b = Heatmap::from_raw(28, 28, &scaled);
        let wa = window_weights(&a, &pts, SquareWindowParams::default());
        let wb = window_weights(&b, &pts, SquareWindowParams::default());
        prop_assert_eq!(wa.argmax(), wb.argmax());
        let ca = cluster_weights(&cluster_partition(&a, &pts), &pts);
        let cb = cluster_weights(&cluster_partition(&b, &pts), &pts);
        prop_assert_eq!(ca.argmax(), cb.argmax());
    }

    #[test]
    fn attractor_lies_in_cluster_bounding_box(seed in any::<u64>()) {
        let mut rng = StreamRng::seed_from_u64(seed);
        let (h, pts) = random_instance(&mut rng);
        let a = cluster_partition(&h, &pts);
        for k in 0..pts.len() {
            if let Some(c) = attractor(&a, k) {
                let px = a.cluster(k);
                let xs = px.iter().map(|p| p.col as f64);
                let ys = px.iter().map(|p| p.row as f64);
                let (xmin, xmax) = xs.clone().fold((f64::MAX, f64::MIN), |(l, h), v| (l.min(v), h.max(v)));
                let (ymin, ymax) = ys.clone().fold((f64::MAX, f64::MIN), |(l, h), v| (l.min(v), h.max(v)));
                prop_assert!(c.x >= xmin - 1e-9 && c.x <= xmax + 1e-9);
                prop_assert!(c.y >= ymin - 1e-9 && c.y <= ymax + 1e-9);
            }
        }
    }
}
