//! The lane-keeping driver as a fuzzing subject, and behaviour-cloning data
//! from the pure-pursuit expert.

use alloc::vec::Vec;

use rand::Rng;

use super::guide::{apply_policy, section_weights};
use super::sim::{pure_pursuit, render_frame, simulate_with, Driver, Pose, SimConfig, SimTrace};
use super::{dqd, mutation_direction, DqdMetric, Road, RoadError, RoadPolicy, RoadSelection};
use crate::focus::WeightVector;
use crate::fuzzer::{Clock, Mutant, Subject, Verdict};
use crate::geom::{wrap_angle, Vec2};
use crate::mutate::MutationRecord;
use crate::nn::{Label, Network, NnError, Sample, Target};
use crate::rng::StreamRng;
use crate::xai::{explain, Heatmap, XaiConfig};
use crate::Tensor;

#[derive(Debug, thiserror::Error)]
pub enum RoadFuzzError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Road(#[from] RoadError),
}

/// Network driver closed over the simulator, with its mutation policy.
pub struct RoadSubject<'a> {
    pub driver: &'a Network,
    pub xai: XaiConfig,
    pub policy: RoadPolicy,
    pub sim: SimConfig,
    pub dqd_metric: DqdMetric,
}

impl RoadSubject<'_> {
    /// Thresholded explanation of every frame in the trace.
    pub fn heatmaps(&self, trace: &SimTrace, rng: &mut StreamRng) -> Result<Vec<Heatmap>, NnError> {
        let side = self.sim.frame.side;
        trace
            .steps
            .iter()
            .map(|s| {
                let x = Tensor::image(side, side, s.frame.clone())?;
                Ok(explain(self.driver, &x, Target::Output(0), &self.xai, rng)?.threshold(self.xai.epsilon))
            })
            .collect()
    }
}

impl Subject for RoadSubject<'_> {
    type Input = Road;
    type State = SimTrace;
    type Error = RoadFuzzError;

    fn test(&self, road: &Road) -> Result<(Verdict, SimTrace), RoadFuzzError> {
        let sim = SimConfig {
            record_frames: self.policy.needs_heatmaps(),
            ..self.sim
        };
        let trace = simulate_with(&Driver::Network(self.driver), road, &sim, None)?;
        let verdict = Verdict {
            failure: trace.oob,
            predicted: None,
            score: trace.max_abs_cte(),
        };
        Ok((verdict, trace))
    }

    fn mutate(
        &self,
        road: &Road,
        trace: &SimTrace,
        rng: &mut StreamRng,
        clock: &dyn Clock,
    ) -> Result<Mutant<Road>, RoadFuzzError> {
        let n = road.section_count();
        let mut xai_ns = 0;
        let maps = if self.policy.needs_heatmaps() {
            let start = clock.now_ns();
            let maps = self.heatmaps(trace, rng)?;
            xai_ns = clock.now_ns().saturating_sub(start);
            maps
        } else {
            Vec::new()
        };
        let weights = match self.policy.selection {
            RoadSelection::SectionWeights => section_weights(trace, &maps, n)?,
            RoadSelection::Uniform => WeightVector::uniform(n),
        };
        let direction = self.policy.direction;
        let side_for = |k: usize, rng: &mut StreamRng| {
            let section: Vec<&Heatmap> = trace
                .steps
                .iter()
                .zip(&maps)
                .filter(|(s, _)| s.section == k)
                .map(|(_, h)| h)
                .collect();
            mutation_direction(&section, direction, rng)
        };
        let m = apply_policy(road, &weights, side_for, &self.policy, rng)?;
        Ok(Mutant {
            input: m.road,
            record: m.record,
            xai_ns,
        })
    }

    fn degradation(&self, before: &SimTrace, after: &SimTrace, record: &MutationRecord) -> Option<f64> {
        Some(dqd(before, after, record.index, self.dqd_metric).value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcConfig {
    pub lookahead: f64,
    /// Record every `stride`-th step of the expert run.
    pub stride: usize,
    /// Perturbed copies per recorded step.
    pub perturbations: usize,
    pub max_offset: f64,
    pub max_yaw: f64,
}

impl Default for BcConfig {
    fn default() -> Self {
        Self {
            lookahead: 6.0,
            stride: 2,
            perturbations: 2,
            max_offset: 2.0,
            max_yaw: 15.0_f64.to_radians(),
        }
    }
}

fn nearest_sample(road: &Road, p: Vec2) -> usize {
    let c = road.centerline();
    let mut best = (0, f64::INFINITY);
    for (i, q) in c.iter().enumerate() {
        let d = q.distance(p);
        if d < best.1 {
            best = (i, d);
        }
    }
    best.0.min(c.len().saturating_sub(2))
}

/// Frames labelled by the pure-pursuit expert: poses from expert runs on
/// each road plus laterally and angularly perturbed copies of them.
pub fn behaviour_cloning_set<R: Rng + ?Sized>(
    roads: &[Road],
    sim: &SimConfig,
    cfg: &BcConfig,
    rng: &mut R,
) -> Result<Vec<Sample>, NnError> {
    let expert = Driver::PurePursuit { lookahead: cfg.lookahead };
    let quiet = SimConfig {
        record_frames: false,
        ..*sim
    };
    let side = sim.frame.side;
    let mut out = Vec::new();
    for road in roads {
        let trace = simulate_with(&expert, road, &quiet, None)?;
        for step in trace.steps.iter().step_by(cfg.stride.max(1)) {
            let mut poses = alloc::vec![step.pose];
            for _ in 0..cfg.perturbations {
                let i = nearest_sample(road, step.pose.position);
                let offset = road.tangent(i).perp() * rng.random_range(-cfg.max_offset..=cfg.max_offset);
                poses.push(Pose {
                    position: step.pose.position + offset,
                    heading: wrap_angle(step.pose.heading + rng.random_range(-cfg.max_yaw..=cfg.max_yaw)),
                });
            }
            for pose in poses {
                let label = pure_pursuit(road, pose, nearest_sample(road, pose.position), cfg.lookahead, sim);
                let frame = render_frame(road, pose, &sim.frame);
                out.push(Sample {
                    input: Tensor::image(side, side, frame)?,
                    label: Label::Value(label as f32),
                });
            }
        }
    }
    Ok(out)
}
