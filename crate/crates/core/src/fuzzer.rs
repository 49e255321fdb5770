//! Campaign driver: screen seeds, then mutate and re-test each seed until it
//! fails or exhausts its iteration budget.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Display;

use crate::digit::{rasterize, vectorize, Bitmap, DigitSemantic};
use crate::mutate::{mutate_digit, MutationPolicy, MutationRecord};
use crate::nn::{argmax, Network, NnError, Target};
use crate::rng::{stream, StreamRng};
use crate::xai::{explain, XaiConfig};
use crate::Tensor;

/// Monotonic nanosecond clock used for timing iterations.
pub trait Clock {
    fn now_ns(&self) -> u64;
}

/// Clock that never advances; every duration reads as zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct FrozenClock;

impl Clock for FrozenClock {
    fn now_ns(&self) -> u64 {
        0
    }
}

/// Outcome of testing one input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub failure: bool,
    /// Predicted class, for classifiers.
    pub predicted: Option<usize>,
    /// Confidence of the prediction, or the driving-quality score.
    pub score: f64,
}

/// A mutated input together with how it was produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Mutant<I> {
    pub input: I,
    pub record: MutationRecord,
    /// Time spent computing explanations for this mutation.
    pub xai_ns: u64,
}

/// The system under test plus the way its inputs are mutated.
pub trait Subject {
    type Input: Clone;
    /// Whatever a test run leaves behind that the next mutation needs.
    type State;
    type Error: Display;

    fn test(&self, input: &Self::Input) -> Result<(Verdict, Self::State), Self::Error>;

    fn mutate(
        &self,
        input: &Self::Input,
        state: &Self::State,
        rng: &mut StreamRng,
        clock: &dyn Clock,
    ) -> Result<Mutant<Self::Input>, Self::Error>;

    /// Quality change on the mutated region between two consecutive runs.
    fn degradation(&self, _before: &Self::State, _after: &Self::State, _record: &MutationRecord) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SeedStatus {
    /// Still being mutated (only seen mid-campaign).
    Active,
    Failed,
    Exhausted,
    /// Failed before any mutation.
    Discarded,
    /// The system could not be run on one of its inputs.
    Errored,
}

impl SeedStatus {
    pub fn name(self) -> &'static str {
        match self {
            SeedStatus::Active => "active",
            SeedStatus::Failed => "failed",
            SeedStatus::Exhausted => "exhausted",
            SeedStatus::Discarded => "discarded",
            SeedStatus::Errored => "errored",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Seed<I> {
    pub id: u64,
    pub input: I,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationLog {
    /// 1-based iteration number.
    pub iteration: usize,
    pub verdict: Verdict,
    pub xai_ns: u64,
    pub total_ns: u64,
    pub mutation: MutationRecord,
    pub degradation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedResult<I> {
    pub id: u64,
    pub status: SeedStatus,
    pub logs: Vec<IterationLog>,
    /// The failure-inducing input, when the seed failed.
    pub failure: Option<I>,
    pub error: Option<String>,
}

impl<I> SeedResult<I> {
    /// Iteration at which the seed failed.
    pub fn failure_iteration(&self) -> Option<usize> {
        match self.status {
            SeedStatus::Failed => self.logs.last().map(|l| l.iteration),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CampaignConfig {
    pub budget: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult<I> {
    pub config: CampaignConfig,
    /// Per-seed results ordered by seed id.
    pub seeds: Vec<SeedResult<I>>,
    pub discarded: Vec<u64>,
}

impl<I> CampaignResult<I> {
    /// Failure-inducing inputs, by seed id.
    pub fn failures(&self) -> impl Iterator<Item = (u64, &I)> {
        self.seeds.iter().filter_map(|s| s.failure.as_ref().map(|f| (s.id, f)))
    }

    /// Failure iteration of every seed that was fuzzed.
    pub fn failure_iterations(&self) -> Vec<Option<usize>> {
        self.seeds.iter().map(SeedResult::failure_iteration).collect()
    }
}

/// Splits seeds into those the system handles correctly and the ids of
/// those it already fails on (or cannot run).
pub fn screen_seeds<S: Subject>(subject: &S, seeds: Vec<Seed<S::Input>>) -> (Vec<Seed<S::Input>>, Vec<u64>) {
    let mut active = Vec::new();
    let mut discarded = Vec::new();
    for seed in seeds {
        match subject.test(&seed.input) {
            Ok((v, _)) if !v.failure => active.push(seed),
            _ => discarded.push(seed.id),
        }
    }
    (active, discarded)
}

/// Fuzzes one screened seed with its own rng stream.
pub fn run_seed<S: Subject>(subject: &S, seed: &Seed<S::Input>, cfg: &CampaignConfig, clock: &dyn Clock) -> SeedResult<S::Input> {
    let mut rng = stream(cfg.seed, seed.id);
    let mut result = SeedResult {
        id: seed.id,
        status: SeedStatus::Active,
        logs: Vec::new(),
        failure: None,
        error: None,
    };
    let errored = |mut r: SeedResult<S::Input>, e: S::Error| {
        r.status = SeedStatus::Errored;
        r.error = Some(e.to_string());
        r
    };
    let (verdict, mut state) = match subject.test(&seed.input) {
        Ok(t) => t,
        Err(e) => return errored(result, e),
    };
    if verdict.failure {
        result.status = SeedStatus::Discarded;
        return result;
    }
    let mut current = seed.input.clone();
    for iteration in 1..=cfg.budget {
        let start = clock.now_ns();
        let mutant = match subject.mutate(&current, &state, &mut rng, clock) {
            Ok(m) => m,
            Err(e) => return errored(result, e),
        };
        let (verdict, next_state) = match subject.test(&mutant.input) {
            Ok(t) => t,
            Err(e) => return errored(result, e),
        };
        let total_ns = clock.now_ns().saturating_sub(start).max(mutant.xai_ns);
        let degradation = subject.degradation(&state, &next_state, &mutant.record);
        result.logs.push(IterationLog {
            iteration,
            verdict,
            xai_ns: mutant.xai_ns,
            total_ns,
            mutation: mutant.record,
            degradation,
        });
        current = mutant.input;
        state = next_state;
        if verdict.failure {
            result.status = SeedStatus::Failed;
            result.failure = Some(current);
            return result;
        }
    }
    result.status = SeedStatus::Exhausted;
    result
}

/// Screens and fuzzes every seed in turn; results are ordered by seed id.
pub fn run_campaign<S: Subject>(
    subject: &S,
    seeds: Vec<Seed<S::Input>>,
    cfg: &CampaignConfig,
    clock: &dyn Clock,
) -> CampaignResult<S::Input> {
    let (active, discarded) = screen_seeds(subject, seeds);
    let mut results: Vec<_> = active.iter().map(|s| run_seed(subject, s, cfg, clock)).collect();
    results.sort_by_key(|r| r.id);
    CampaignResult {
        config: *cfg,
        seeds: results,
        discarded,
    }
}

/// Misclassification: the arg-max class (lowest index on ties) differs from
/// the label.
pub fn misclassified(probabilities: &[f32], label: usize) -> bool {
    argmax(probabilities).0 != label
}

#[derive(Debug, Clone, PartialEq)]
pub struct DigitInput {
    pub bitmap: Bitmap,
    pub label: usize,
    /// Control points the bitmap was rendered from. Seeds start without one
    /// and are traced on their first mutation; mutants carry theirs forward.
    pub semantic: Option<DigitSemantic>,
}

impl DigitInput {
    pub fn seed(bitmap: Bitmap, label: usize) -> Self {
        Self {
            bitmap,
            label,
            semantic: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DigitFuzzError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Mutate(#[from] crate::mutate::MutateError),
    #[error(transparent)]
    Digit(#[from] crate::digit::DigitError),
}

/// Digit classifier under test with its mutation policy.
pub struct DigitSubject<'a> {
    pub net: &'a Network,
    pub xai: XaiConfig,
    pub policy: MutationPolicy,
}

impl Subject for DigitSubject<'_> {
    type Input = DigitInput;
    type State = ();
    type Error = DigitFuzzError;

    fn test(&self, input: &DigitInput) -> Result<(Verdict, ()), DigitFuzzError> {
        let out = self.net.forward(&input.bitmap.to_tensor())?;
        let (predicted, confidence) = argmax(out.data());
        let verdict = Verdict {
            failure: misclassified(out.data(), input.label),
            predicted: Some(predicted),
            score: confidence as f64,
        };
        Ok((verdict, ()))
    }

    fn mutate(
        &self,
        input: &DigitInput,
        _state: &(),
        rng: &mut StreamRng,
        clock: &dyn Clock,
    ) -> Result<Mutant<DigitInput>, DigitFuzzError> {
        let sem = match &input.semantic {
            Some(s) => s.clone(),
            None => vectorize(&input.bitmap)?,
        };
        let mut xai_ns = 0;
        let heatmap = if self.policy.needs_heatmap() {
            let start = clock.now_ns();
            let x: Tensor = input.bitmap.to_tensor();
            let h = explain(self.net, &x, Target::Logit(input.label), &self.xai, rng)?.threshold(self.xai.epsilon);
            xai_ns = clock.now_ns().saturating_sub(start);
            Some(h)
        } else {
            None
        };
        let (sem, record) = mutate_digit(&sem, heatmap.as_ref(), &self.policy, rng)?;
        Ok(Mutant {
            input: DigitInput {
                bitmap: rasterize(&sem),
                label: input.label,
                semantic: Some(sem),
            },
            record,
            xai_ns,
        })
    }
}

#[cfg(test)]
mod tests;
