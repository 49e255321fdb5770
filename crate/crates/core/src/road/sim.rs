//! Kinematic bicycle driven by a network (or the pure-pursuit expert) over
//! top-down frames rendered around the vehicle.

use alloc::vec;
use alloc::vec::Vec;

use super::Road;
use crate::geom::{wrap_angle, Vec2};
use crate::nn::{Network, NnError};
use crate::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec2,
    /// Heading in radians, counter-clockwise from +x.
    pub heading: f64,
}

/// Heading-up view centred laterally on the vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameConfig {
    pub side: usize,
    /// World units per pixel.
    pub scale: f64,
    /// Image row of the vehicle.
    pub vehicle_row: f64,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            side: crate::nn::FRAME_SIDE,
            scale: 0.5,
            vehicle_row: 52.0,
        }
    }
}

const ROAD_VALUE: f32 = 0.5;
const MARKING_VALUE: f32 = 1.0;
/// Half width of the centre marking, in world units.
const MARKING_HALF_WIDTH: f64 = 0.35;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub wheelbase: f64,
    pub speed: f64,
    pub dt: f64,
    /// Wheel angle at steering command 1.
    pub max_steer: f64,
    pub frame: FrameConfig,
    /// Keep rendered frames in the trace.
    pub record_frames: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            wheelbase: 2.5,
            speed: 10.0,
            dt: 0.1,
            max_steer: 15.0_f64.to_radians(),
            frame: FrameConfig::default(),
            record_frames: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimStep {
    pub pose: Pose,
    /// Steering command in `[-1, 1]`, positive to the left.
    pub steering: f64,
    /// Signed offset from the centerline, positive to the left.
    pub cte: f64,
    pub section: usize,
    /// Frame the driver saw at this step (empty when not recorded).
    pub frame: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub steps: Vec<SimStep>,
    pub oob: bool,
    /// The vehicle reached the end of the road.
    pub completed: bool,
}

impl SimTrace {
    pub fn max_abs_cte(&self) -> f64 {
        self.steps.iter().map(|s| s.cte.abs()).fold(0.0, f64::max)
    }
}

pub enum Driver<'a> {
    Network(&'a Network),
    PurePursuit { lookahead: f64 },
}

/// Nearest centerline location, searched near the previous one.
struct Tracker {
    index: usize,
}

struct Projection {
    index: usize,
    t: f64,
    cte: f64,
}

impl Tracker {
    fn project(&mut self, road: &Road, p: Vec2) -> Projection {
        let c = road.centerline();
        let lo = self.index.saturating_sub(4);
        let hi = (self.index + 30).min(c.len() - 1);
        let mut best = Projection {
            index: lo,
            t: 0.0,
            cte: f64::INFINITY,
        };
        for i in lo..hi {
            let (d, t) = crate::geom::point_segment_distance(p, c[i], c[i + 1]);
            if d < best.cte.abs() {
                let side = (c[i + 1] - c[i]).cross(p - c[i]);
                best = Projection {
                    index: i,
                    t,
                    cte: if side < 0.0 { -d } else { d },
                };
            }
        }
        self.index = best.index;
        best
    }
}

/// Steering command the pure-pursuit expert gives at `pose`, aiming at the
/// centerline point `lookahead` units ahead of the nearest sample.
pub fn pure_pursuit(road: &Road, pose: Pose, nearest: usize, lookahead: f64, cfg: &SimConfig) -> f64 {
    let c = road.centerline();
    let ahead = (lookahead / super::SAMPLE_SPACING) as usize;
    let target = if nearest + ahead < c.len() {
        c[nearest + ahead]
    } else {
        let over = (nearest + ahead - (c.len() - 1)) as f64 * super::SAMPLE_SPACING;
        c[c.len() - 1] + road.tangent(c.len() - 1) * over
    };
    let to = target - pose.position;
    let alpha = wrap_angle(to.angle() - pose.heading);
    let ld = to.norm().max(1e-6);
    let delta = libm::atan2(2.0 * cfg.wheelbase * libm::sin(alpha), ld);
    (delta / cfg.max_steer).clamp(-1.0, 1.0)
}

/// Renders the heading-up frame around `pose`: background 0, road surface
/// 0.5, centre marking 1.
pub fn render_frame(road: &Road, pose: Pose, cfg: &FrameConfig) -> Vec<f32> {
    let side = cfg.side;
    let mut dist = vec![f64::INFINITY; side * side];
    let h = Vec2::from_angle(pose.heading);
    let right = -h.perp();
    let centre_col = (side as f64 - 1.0) / 2.0;
    // Frame coordinates (row, col) of a world point; the map is a rigid
    // motion plus scaling, so distances carry over after multiplying by scale.
    let to_frame = |q: Vec2| {
        let d = q - pose.position;
        Vec2::new(centre_col + d.dot(right) / cfg.scale, cfg.vehicle_row - d.dot(h) / cfg.scale)
    };
    let half = road.width() / 2.0;
    let reach = half / cfg.scale;
    let view = (side as f64) * cfg.scale * 1.5 + road.width();
    let c = road.centerline();
    for i in 0..c.len().saturating_sub(1) {
        if c[i].distance(pose.position) > view {
            continue;
        }
        let (a, b) = (to_frame(c[i]), to_frame(c[i + 1]));
        let c0 = libm::floor(a.x.min(b.x) - reach).max(0.0) as i64;
        let c1 = libm::ceil(a.x.max(b.x) + reach).min(side as f64 - 1.0) as i64;
        let r0 = libm::floor(a.y.min(b.y) - reach).max(0.0) as i64;
        let r1 = libm::ceil(a.y.max(b.y) + reach).min(side as f64 - 1.0) as i64;
        for r in r0..=r1 {
            for col in c0..=c1 {
                let (d, _) = crate::geom::point_segment_distance(Vec2::new(col as f64, r as f64), a, b);
                let slot = &mut dist[r as usize * side + col as usize];
                if d < *slot {
                    *slot = d;
                }
            }
        }
    }
    dist.iter()
        .map(|&d| {
            let d = d * cfg.scale;
            if d <= MARKING_HALF_WIDTH {
                MARKING_VALUE
            } else if d <= half {
                ROAD_VALUE
            } else {
                0.0
            }
        })
        .collect()
}

/// Drives `road` with the network under the default configuration.
pub fn simulate(driver: &Network, road: &Road) -> Result<SimTrace, NnError> {
    simulate_with(&Driver::Network(driver), road, &SimConfig::default(), None)
}

/// Closed-loop run from the start of the road, facing along it. `start`
/// overrides the initial pose. Ends at the road's end, at the first step
/// whose |CTE| exceeds half the width, or after twice the nominal time.
pub fn simulate_with(driver: &Driver, road: &Road, cfg: &SimConfig, start: Option<Pose>) -> Result<SimTrace, NnError> {
    let c = road.centerline();
    let mut pose = start.unwrap_or(Pose {
        position: c[0],
        heading: road.tangent(0).angle(),
    });
    let mut tracker = Tracker { index: 0 };
    let max_steps = (2.0 * road.length() / (cfg.speed * cfg.dt)) as usize + 20;
    let needs_frame = cfg.record_frames || matches!(driver, Driver::Network(_));
    let mut steps = Vec::new();
    let mut oob = false;
    let mut completed = false;
    for _ in 0..max_steps {
        let proj = tracker.project(road, pose.position);
        if proj.index + 2 >= c.len() && proj.t >= 1.0 {
            completed = true;
            break;
        }
        let frame = if needs_frame {
            render_frame(road, pose, &cfg.frame)
        } else {
            Vec::new()
        };
        let steering = match driver {
            Driver::Network(net) => {
                let x = Tensor::image(cfg.frame.side, cfg.frame.side, frame.clone())?;
                net.forward(&x)?.data()[0] as f64
            }
            Driver::PurePursuit { lookahead } => pure_pursuit(road, pose, proj.index, *lookahead, cfg),
        };
        let out = proj.cte.abs() > road.width() / 2.0;
        steps.push(SimStep {
            pose,
            steering,
            cte: proj.cte,
            section: road.sections()[proj.index],
            frame: if cfg.record_frames { frame } else { Vec::new() },
        });
        if out {
            oob = true;
            break;
        }
        let delta = steering.clamp(-1.0, 1.0) * cfg.max_steer;
        pose.position += Vec2::from_angle(pose.heading) * (cfg.speed * cfg.dt);
        pose.heading = wrap_angle(pose.heading + cfg.speed / cfg.wheelbase * libm::tan(delta) * cfg.dt);
    }
    Ok(SimTrace { steps, oob, completed })
}
