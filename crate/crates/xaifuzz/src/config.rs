//! Campaign configuration as `key = value` text.
//!
//! A config file and command-line flags use the same keys; flags are applied
//! after the file. [`FuzzConfig::snapshot`] writes every key in a fixed order
//! so that a run directory fully describes its campaign.

use std::fmt::Write as _;
use std::path::PathBuf;

use sha2::{Digest, Sha256};
use xaifuzz_core::focus::SquareWindowParams;
use xaifuzz_core::mutate::{DirectionMode, MutationPolicy, Selection};
use xaifuzz_core::road::{DirectionPolicy, DqdMetric, RoadPolicy};
use xaifuzz_core::xai::{XaiConfig, XaiMethod};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`")]
    BadValue { key: String, value: String },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("{0}\n{LEGAL_MATRIX}")]
    Illegal(String),
}

pub const LEGAL_MATRIX: &str = "legal combinations:
  digit: --select uniform --direction random                  (baseline)
         --select window|cluster --direction random
         --select cluster --direction attractor
  road:  --select uniform --direction random                  (baseline)
         --select section --direction high|low|random
  --xai smoothgrad|ig|gradcampp applies to every non-baseline combination";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    Digit,
    Road,
}

impl Case {
    pub fn name(self) -> &'static str {
        match self {
            Case::Digit => "digit",
            Case::Road => "road",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "digit" => Some(Case::Digit),
            "road" => Some(Case::Road),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Select {
    Uniform,
    Window,
    Cluster,
    Section,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Random,
    Attractor,
    High,
    Low,
}

fn select_name(s: Select) -> &'static str {
    match s {
        Select::Uniform => "uniform",
        Select::Window => "window",
        Select::Cluster => "cluster",
        Select::Section => "section",
    }
}

fn direction_name(d: Direction) -> &'static str {
    match d {
        Direction::Random => "random",
        Direction::Attractor => "attractor",
        Direction::High => "high",
        Direction::Low => "low",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzConfig {
    pub case: Case,
    pub model: PathBuf,
    /// Directory holding the digit IDX files; unused for roads.
    pub dataset: Option<PathBuf>,
    pub xai: XaiMethod,
    pub select: Select,
    pub direction: Direction,
    /// Half-width `d` of the square window.
    pub window: usize,
    pub iterations: usize,
    /// Candidate seeds before screening.
    pub seeds: usize,
    /// Skip this many dataset images before taking seeds.
    pub seed_offset: usize,
    pub rng_seed: u64,
    /// Seed of the road generator.
    pub road_seed: u64,
    pub epsilon: f64,
    pub smoothgrad_samples: usize,
    pub smoothgrad_sigma: f64,
    pub ig_steps: usize,
    pub dqd: DqdMetric,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        let xai = XaiConfig::default();
        Self {
            case: Case::Digit,
            model: PathBuf::new(),
            dataset: None,
            xai: XaiMethod::SmoothGrad,
            select: Select::Uniform,
            direction: Direction::Random,
            window: SquareWindowParams::default().d,
            iterations: 200,
            seeds: 100,
            seed_offset: 0,
            rng_seed: 0,
            road_seed: 42,
            epsilon: xai.epsilon,
            smoothgrad_samples: xai.n_samples,
            smoothgrad_sigma: xai.sigma,
            ig_steps: xai.ig_steps,
            dqd: DqdMetric::MaxCte,
        }
    }
}

pub const KEYS: [&str; 17] = [
    "case",
    "model",
    "dataset",
    "xai",
    "select",
    "direction",
    "window",
    "iterations",
    "seeds",
    "seed_offset",
    "rng_seed",
    "road_seed",
    "epsilon",
    "smoothgrad_samples",
    "smoothgrad_sigma",
    "ig_steps",
    "dqd",
];

impl FuzzConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
        };
        fn num<T: std::str::FromStr>(v: &str, bad: impl Fn() -> ConfigError) -> Result<T, ConfigError> {
            v.parse().map_err(|_| bad())
        }
        match key {
            "case" => self.case = Case::parse(value).ok_or_else(bad)?,
            "model" => self.model = PathBuf::from(value),
            "dataset" => self.dataset = (!value.is_empty()).then(|| PathBuf::from(value)),
            "xai" => self.xai = XaiMethod::from_name(value).ok_or_else(bad)?,
            "select" => {
                self.select = match value {
                    "uniform" => Select::Uniform,
                    "window" => Select::Window,
                    "cluster" => Select::Cluster,
                    "section" => Select::Section,
                    _ => return Err(bad()),
                }
            }
            "direction" => {
                self.direction = match value {
                    "random" => Direction::Random,
                    "attractor" => Direction::Attractor,
                    "high" => Direction::High,
                    "low" => Direction::Low,
                    _ => return Err(bad()),
                }
            }
            "window" => self.window = num(value, bad)?,
            "iterations" => self.iterations = num(value, bad)?,
            "seeds" => self.seeds = num(value, bad)?,
            "seed_offset" => self.seed_offset = num(value, bad)?,
            "rng_seed" => self.rng_seed = num(value, bad)?,
            "road_seed" => self.road_seed = num(value, bad)?,
            "epsilon" => self.epsilon = num(value, bad)?,
            "smoothgrad_samples" => self.smoothgrad_samples = num(value, bad)?,
            "smoothgrad_sigma" => self.smoothgrad_sigma = num(value, bad)?,
            "ig_steps" => self.ig_steps = num(value, bad)?,
            "dqd" => {
                self.dqd = match value {
                    "max_cte" => DqdMetric::MaxCte,
                    "steering_norm" => DqdMetric::SteeringNorm,
                    _ => return Err(bad()),
                }
            }
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text`. Blank lines and `#`
    /// comments are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let (k, v) = t.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn is_baseline(&self) -> bool {
        self.select == Select::Uniform
    }

    /// Checks the selection/direction combination and numeric ranges.
    pub fn validate(&self) -> Result<(), ConfigError> {
        use Direction::*;
        use Select::*;
        let legal = match self.case {
            Case::Digit => matches!(
                (self.select, self.direction),
                (Uniform, Random) | (Window, Random) | (Cluster, Random) | (Cluster, Attractor)
            ),
            Case::Road => matches!(
                (self.select, self.direction),
                (Uniform, Random) | (Section, High) | (Section, Low) | (Section, Random)
            ),
        };
        if !legal {
            return Err(ConfigError::Illegal(format!(
                "--select {} --direction {} is not a legal {} configuration",
                select_name(self.select),
                direction_name(self.direction),
                self.case.name()
            )));
        }
        if self.model.as_os_str().is_empty() {
            return Err(ConfigError::Missing("model"));
        }
        if self.case == Case::Digit && self.dataset.is_none() {
            return Err(ConfigError::Missing("dataset"));
        }
        if self.iterations == 0 || self.seeds == 0 {
            return Err(ConfigError::Illegal("iterations and seeds must be positive".into()));
        }
        self.xai_config().validate().map_err(|e| ConfigError::Illegal(e.into()))
    }

    pub fn xai_config(&self) -> XaiConfig {
        XaiConfig {
            method: self.xai,
            n_samples: self.smoothgrad_samples,
            sigma: self.smoothgrad_sigma,
            ig_steps: self.ig_steps,
            epsilon: self.epsilon,
        }
    }

    /// Digit mutation policy. Call [`FuzzConfig::validate`] first.
    pub fn digit_policy(&self) -> MutationPolicy {
        let selection = match self.select {
            Select::Window => Selection::Window(SquareWindowParams { d: self.window }),
            Select::Cluster => Selection::Cluster,
            _ => Selection::Uniform,
        };
        let direction = match self.direction {
            Direction::Attractor => DirectionMode::Attractor,
            _ => DirectionMode::Random,
        };
        if self.is_baseline() {
            MutationPolicy::baseline()
        } else {
            MutationPolicy::guided(selection, direction)
        }
    }

    /// Road mutation policy. Call [`FuzzConfig::validate`] first.
    pub fn road_policy(&self) -> RoadPolicy {
        if self.is_baseline() {
            return RoadPolicy::baseline();
        }
        RoadPolicy::guided(match self.direction {
            Direction::High => DirectionPolicy::High,
            Direction::Low => DirectionPolicy::Low,
            _ => DirectionPolicy::Random,
        })
    }

    fn value(&self, key: &str) -> String {
        match key {
            "case" => self.case.name().into(),
            "model" => self.model.display().to_string(),
            "dataset" => self.dataset.as_ref().map(|d| d.display().to_string()).unwrap_or_default(),
            "xai" => self.xai.name().into(),
            "select" => select_name(self.select).into(),
            "direction" => direction_name(self.direction).into(),
            "window" => self.window.to_string(),
            "iterations" => self.iterations.to_string(),
            "seeds" => self.seeds.to_string(),
            "seed_offset" => self.seed_offset.to_string(),
            "rng_seed" => self.rng_seed.to_string(),
            "road_seed" => self.road_seed.to_string(),
            "epsilon" => self.epsilon.to_string(),
            "smoothgrad_samples" => self.smoothgrad_samples.to_string(),
            "smoothgrad_sigma" => self.smoothgrad_sigma.to_string(),
            "ig_steps" => self.ig_steps.to_string(),
            "dqd" => self.dqd.name().into(),
            _ => unreachable!("unknown key {key}"),
        }
    }

    /// Every key in a fixed order; parsing it back gives an equal config.
    pub fn snapshot(&self) -> String {
        let mut s = String::new();
        for k in KEYS {
            writeln!(s, "{k} = {}", self.value(k)).unwrap();
        }
        s
    }

    /// Short label such as `cluster-attractor-smoothgrad` or `baseline`.
    pub fn label(&self) -> String {
        if self.is_baseline() {
            "baseline".into()
        } else {
            format!("{}-{}-{}", select_name(self.select), direction_name(self.direction), self.xai.name())
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
