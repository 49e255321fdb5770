use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};

use super::*;
use crate::focus::WeightVector;
use crate::nn::{driver_regressor, Network};
use crate::rng::{stream, StreamRng};
use crate::xai::Heatmap;

fn straight() -> Road {
    Road::new((0..12).map(|i| Vec2::new(125.0, 10.0 + 20.0 * i as f64)).collect(), ROAD_WIDTH).unwrap()
}

fn generated(n: u64) -> Vec<Road> {
    (0..n)
        .map(|i| generate_road(&mut stream(42, i), &RoadGenConfig::default()).unwrap())
        .collect()
}

fn zero_driver() -> Network {
    let init = driver_regressor(&mut stream(0, 0)).unwrap();
    Network::zeroed([1, 64, 64], init.layers().to_vec(), init.head()).unwrap()
}

fn step(section: usize, cte: f64, steering: f64) -> SimStep {
    SimStep {
        pose: Pose {
            position: Vec2::ZERO,
            heading: 0.0,
        },
        steering,
        cte,
        section,
        frame: Vec::new(),
    }
}

fn trace(steps: Vec<SimStep>) -> SimTrace {
    SimTrace {
        steps,
        oob: false,
        completed: true,
    }
}

fn flat(v: f64) -> Heatmap {
    Heatmap::from_normalized(4, 4, vec![v; 16])
}

#[test]
fn validity_examples() {
    assert!(validate_road(&straight()));
    let crossing = Road::new(
        vec![
            Vec2::new(50.0, 50.0),
            Vec2::new(150.0, 50.0),
            Vec2::new(150.0, 150.0),
            Vec2::new(100.0, 150.0),
            Vec2::new(100.0, 20.0),
        ],
        ROAD_WIDTH,
    )
    .unwrap();
    assert!(!validate_road(&crossing));
    let mut pts = straight().control_points().to_vec();
    pts[5].x = 300.0;
    assert!(!validate_road(&Road::new(pts, ROAD_WIDTH).unwrap()));
    let loop_back = Road::new(
        vec![
            Vec2::new(50.0, 50.0),
            Vec2::new(100.0, 50.0),
            Vec2::new(100.0, 100.0),
            Vec2::new(50.0, 50.0),
        ],
        ROAD_WIDTH,
    )
    .unwrap();
    assert!(!validate_road(&loop_back));
    assert_eq!(Road::new(vec![Vec2::ZERO], 8.0).unwrap_err(), RoadError::TooFewPoints(1));
}

#[test]
fn parallel_pass_closer_than_the_width_is_invalid() {
    // A hairpin whose legs run 6 units apart.
    let pts = vec![
        Vec2::new(100.0, 20.0),
        Vec2::new(100.0, 60.0),
        Vec2::new(100.0, 100.0),
        Vec2::new(103.0, 104.0),
        Vec2::new(106.0, 100.0),
        Vec2::new(106.0, 60.0),
        Vec2::new(106.0, 20.0),
    ];
    assert!(!validate_road(&Road::new(pts, ROAD_WIDTH).unwrap()));
}

#[test]
fn generated_roads_are_valid_and_bounded_in_turn() {
    let roads = generated(60);
    for r in &roads {
        assert!(validate_road(r));
        assert_eq!(r.control_points().len(), CONTROL_POINTS);
        for a in turn_angles(r) {
            assert!(a.abs() <= 70.0_f64.to_radians() + 1e-12);
        }
    }
    assert_eq!(roads[3], generate_road(&mut stream(42, 3), &RoadGenConfig::default()).unwrap());
}

#[test]
fn generation_gives_up_after_max_attempts() {
    let cfg = RoadGenConfig {
        box_size: 30.0,
        max_attempts: 5,
        ..Default::default()
    };
    assert_eq!(generate_road(&mut stream(0, 0), &cfg), Err(RoadError::GenerationFailed(5)));
}

#[test]
fn centerline_sections_partition_the_road() {
    for r in generated(5) {
        let s = r.sections();
        assert_eq!(s.len(), r.centerline().len());
        assert!(s.windows(2).all(|w| w[0] <= w[1]));
        for k in 0..r.section_count() - 1 {
            assert!(s.contains(&k));
        }
        assert!(!s.contains(&(r.section_count() - 1)));
        for w in r.centerline().windows(2) {
            assert!(w[0].distance(w[1]) <= SAMPLE_SPACING + 1e-9);
        }
        for p in r.control_points() {
            let d = r.centerline().iter().map(|q| q.distance(*p)).fold(f64::INFINITY, f64::min);
            assert!(d <= SAMPLE_SPACING);
        }
    }
}

#[test]
fn expert_completes_generated_roads() {
    let sim = SimConfig {
        record_frames: false,
        ..Default::default()
    };
    for r in generated(60) {
        let t = simulate_with(&Driver::PurePursuit { lookahead: 6.0 }, &r, &sim, None).unwrap();
        assert!(t.completed && !t.oob);
    }
}

#[test]
fn simulation_is_deterministic() {
    let r = &generated(1)[0];
    let sim = SimConfig::default();
    let net = driver_regressor(&mut stream(1, 1)).unwrap();
    let a = simulate_with(&Driver::Network(&net), r, &sim, None).unwrap();
    let b = simulate_with(&Driver::Network(&net), r, &sim, None).unwrap();
    assert_eq!(a, b);
}

#[test]
fn leaving_the_road_ends_the_run() {
    // A driver that never steers leaves a curved road.
    let r = generated(2).into_iter().max_by(|a, b| {
        let ta: f64 = turn_angles(a).iter().map(|x| x.abs()).sum();
        let tb: f64 = turn_angles(b).iter().map(|x| x.abs()).sum();
        ta.total_cmp(&tb)
    });
    let t = simulate(&zero_driver(), &r.unwrap()).unwrap();
    assert!(t.oob && !t.completed);
    assert!(t.steps.last().unwrap().cte.abs() > ROAD_WIDTH / 2.0);
    assert!(t.steps[..t.steps.len() - 1].iter().all(|s| s.cte.abs() <= ROAD_WIDTH / 2.0));
}

#[test]
fn frames_show_the_road_ahead() {
    let r = straight();
    let cfg = FrameConfig::default();
    let pose = Pose {
        position: r.centerline()[20],
        heading: r.tangent(20).angle(),
    };
    let f = render_frame(&r, pose, &cfg);
    assert_eq!(f.len(), cfg.side * cfg.side);
    let row = 20 * cfg.side;
    // Centre marking straight ahead, tarmac beside it, nothing far off.
    assert_eq!(f[row + 31], 1.0);
    assert_eq!(f[row + 31 - 4], 0.5);
    assert_eq!(f[row + 1], 0.0);
    // Shifting the vehicle right moves the road left in the frame.
    let shifted = Pose {
        position: pose.position + Vec2::new(3.0, 0.0),
        ..pose
    };
    let g = render_frame(&r, shifted, &cfg);
    assert_eq!(g[row + 31 - 6], 1.0);
}

#[test]
fn heatmap_derivative_examples() {
    assert_eq!(heatmap_derivative(&flat(0.3), &flat(0.3)).unwrap(), 0.0);
    assert_eq!(heatmap_derivative(&flat(0.0), &flat(1.0)).unwrap(), 1.0);
    let other = Heatmap::from_normalized(2, 8, vec![0.0; 16]);
    assert!(matches!(heatmap_derivative(&flat(0.0), &other), Err(RoadError::DimensionMismatch(..))));
    let mut rng = StreamRng::seed_from_u64(5);
    for _ in 0..100 {
        let a: Vec<f64> = (0..64).map(|_| rng.random()).collect();
        let b: Vec<f64> = (0..64).map(|_| rng.random()).collect();
        let mut oracle = 0.0;
        for i in 0..8 {
            for j in 0..8 {
                oracle += (a[i * 8 + j] - b[i * 8 + j]).abs();
            }
        }
        let d = heatmap_derivative(&Heatmap::from_normalized(8, 8, a), &Heatmap::from_normalized(8, 8, b)).unwrap();
        assert!((d - oracle / 64.0).abs() < 1e-9);
    }
}

#[test]
fn section_weight_examples() {
    let steps: Vec<SimStep> = (0..12).map(|i| step(i / 4, 0.0, 0.0)).collect();
    let t = trace(steps);
    let constant: Vec<Heatmap> = (0..12).map(|_| flat(0.4)).collect();
    let w = section_weights(&t, &constant, 4).unwrap();
    assert!(w.is_degenerate());
    assert_eq!(w.weights(), &[0.25; 4]);

    let mut wild = constant.clone();
    for (i, h) in wild.iter_mut().enumerate().skip(4).take(4) {
        *h = flat((i % 2) as f64);
    }
    let w = section_weights(&t, &wild, 4).unwrap();
    assert!(w.weights()[1] > 0.99);
    // Section 1: three unit derivatives over four frames.
    assert!((w.raw()[1] - 0.75).abs() < 1e-12);
    assert_eq!(w.raw()[3], 0.0);
}

#[test]
fn section_weights_match_recomputation_from_the_log() {
    let mut rng = StreamRng::seed_from_u64(8);
    let steps: Vec<SimStep> = (0..40).map(|i| step(i / 7, 0.0, 0.0)).collect();
    let t = trace(steps);
    let maps: Vec<Heatmap> = (0..40)
        .map(|_| Heatmap::from_normalized(4, 4, (0..16).map(|_| rng.random()).collect()))
        .collect();
    let w = section_weights(&t, &maps, 7).unwrap();
    for k in 0..7 {
        let idx: Vec<usize> = (0..40).filter(|&i| t.steps[i].section == k).collect();
        let mut sum = 0.0;
        for p in idx.windows(2) {
            let (a, b) = (maps[p[0]].values(), maps[p[1]].values());
            sum += a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / 16.0;
        }
        let expect = if idx.len() < 2 { 0.0 } else { sum / idx.len() as f64 };
        assert!((w.raw()[k] - expect).abs() < 1e-12);
    }
}

#[test]
fn direction_examples() {
    let mut v = vec![0.0; 16];
    for r in 0..4 {
        v[r * 4] = 1.0;
        v[r * 4 + 1] = 1.0;
    }
    let left = Heatmap::from_normalized(4, 4, v);
    let mut rng = StreamRng::seed_from_u64(1);
    assert_eq!(mutation_direction(&[&left], DirectionPolicy::High, &mut rng), (Side::Left, false));
    assert_eq!(mutation_direction(&[&left], DirectionPolicy::Low, &mut rng), (Side::Right, false));
    let sym = flat(0.5);
    assert!(mutation_direction(&[&sym], DirectionPolicy::High, &mut rng).1);
    assert!(mutation_direction(&[], DirectionPolicy::Low, &mut rng).1);
    assert!(!mutation_direction(&[&left], DirectionPolicy::Random, &mut rng).1);
}

#[test]
fn split_skips_the_middle_column() {
    // All attention in column w/2 counts for neither side.
    let mut v = vec![0.0; 16];
    for r in 0..4 {
        v[r * 4 + 2] = 1.0;
    }
    let mid = Heatmap::from_normalized(4, 4, v);
    let mut rng = StreamRng::seed_from_u64(2);
    assert!(mutation_direction(&[&mid], DirectionPolicy::High, &mut rng).1);
}

#[test]
fn lateral_mutation_examples() {
    let r = straight();
    let m = mutate_road(&r, 4, Side::Right, ROAD_EXTENT).unwrap();
    let (a, b) = (r.control_points()[4], m.control_points()[4]);
    assert!((a.distance(b) - 4.0).abs() < 1e-12);
    // Travelling north, right is east.
    assert!((b.x - a.x - 4.0).abs() < 1e-12);
    let differing = r.control_points().iter().zip(m.control_points()).filter(|(p, q)| p != q).count();
    assert_eq!(differing, 1);
    assert!(mutate_road(&r, 12, Side::Left, 4.0).is_err());
}

#[test]
fn invalid_mutations_are_retried() {
    // The road edge runs 1 unit above y = 0: moving point 0 towards the box
    // border is invalid, so the other side must be used.
    let pts: Vec<Vec2> = (0..12).map(|i| Vec2::new(20.0 + 20.0 * i as f64, 5.0)).collect();
    let r = Road::new(pts, ROAD_WIDTH).unwrap();
    assert!(validate_road(&r));
    let w = WeightVector::from_raw(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let mut rng = StreamRng::seed_from_u64(3);
    let policy = RoadPolicy::baseline();
    let m = apply_policy(&r, &w, |_, _| (Side::Right, false), &policy, &mut rng).unwrap();
    assert!(validate_road(&m.road));
    assert!(m.road.control_points()[0].y > 5.0);

    // Already invalid elsewhere, so no single move can repair it.
    let boxed: Vec<Vec2> = (0..12).map(|i| Vec2::new(5.0 + 20.0 * i as f64, 2.0)).collect();
    let cramped = Road::new(boxed, ROAD_WIDTH).unwrap();
    assert!(matches!(
        apply_policy(&cramped, &w, |_, _| (Side::Left, false), &policy, &mut rng),
        Err(RoadError::MutationFailed(_))
    ));
}

#[test]
fn dqd_examples() {
    let before = trace(vec![step(0, 0.2, 0.1), step(1, 1.0, 0.3), step(1, -0.5, -0.2), step(2, 0.1, 0.0)]);
    assert_eq!(dqd(&before, &before, 1, DqdMetric::MaxCte).value, 0.0);
    let after = trace(vec![step(0, 0.2, 0.1), step(1, -3.0, 0.6), step(1, 2.0, 0.8), step(2, 0.1, 0.0)]);
    let d = dqd(&before, &after, 1, DqdMetric::MaxCte);
    assert_eq!(d.value, 2.0);
    assert!(!d.partial);
    let n = dqd(&before, &after, 1, DqdMetric::SteeringNorm).value;
    let oracle = libm::sqrt(0.6f64.powi(2) + 0.8f64.powi(2)) - libm::sqrt(0.3f64.powi(2) + 0.2f64.powi(2));
    assert!((n - oracle).abs() < 1e-12);
    let short = SimTrace {
        steps: vec![step(0, 4.5, 0.9)],
        oob: true,
        completed: false,
    };
    let d = dqd(&before, &short, 1, DqdMetric::MaxCte);
    assert!(d.partial);
    assert_eq!(d.value, 3.5);
}

#[test]
fn behaviour_cloning_labels_are_steering_commands() {
    let roads = generated(1);
    let sim = SimConfig::default();
    let set = behaviour_cloning_set(&roads, &sim, &BcConfig::default(), &mut stream(0, 0)).unwrap();
    assert!(set.len() > 100);
    for s in &set {
        assert_eq!(s.input.shape(), &[1, 64, 64]);
        match s.label {
            crate::nn::Label::Value(v) => assert!((-1.0..=1.0).contains(&v)),
            _ => panic!("regression label expected"),
        }
    }
}
