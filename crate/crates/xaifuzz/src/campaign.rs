//! Running campaigns and writing run directories.
//!
//! A run directory holds:
//!
//! - `config`: the full configuration snapshot
//! - `manifest`: command line, config hash, seeds, versions and wall-clock times
//! - `result.csv`: one row per iteration, deterministic for a given config
//! - `seeds.csv`: one row per candidate seed with its final status
//! - `timing.csv`: per-iteration wall-clock times, kept apart from
//!   `result.csv` because they differ between runs
//! - `failures/`: failure-inducing inputs (`.pgm` and `.svg` for digits,
//!   `.road` and `.trace.csv` for roads)
//! - `embeddings.csv` (digits only): penultimate-layer activations of the
//!   screened seeds and of the failures

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use xaifuzz_core::digit::Bitmap;
use xaifuzz_core::fuzzer::{
    run_campaign, run_seed, screen_seeds, CampaignConfig, CampaignResult, Clock, DigitInput, DigitSubject, Seed,
    SeedStatus, Subject,
};
use xaifuzz_core::nn::{Head, Network, NnError};
use xaifuzz_core::road::{generate_road, simulate_with, Driver, Road, RoadGenConfig, RoadSubject, SimConfig};
use xaifuzz_core::rng::stream;

use crate::config::{sha256_hex, Case, ConfigError, FuzzConfig};
use crate::idx::{DigitSet, IdxError};
use crate::weights::{self, WeightsError};
use crate::{pgm, roadfile, svg};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("model: {0}")]
    Weights(#[from] WeightsError),
    #[error("dataset: {0}")]
    Dataset(#[from] IdxError),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Internal(String),
}

impl RunError {
    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
        move |source| RunError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), RunError> {
    fs::write(path, bytes).map_err(RunError::io(path))
}

fn read_to_string(path: &Path) -> Result<String, RunError> {
    fs::read_to_string(path).map_err(RunError::io(path))
}

/// Nanoseconds since the clock was created.
#[derive(Debug, Clone, Copy)]
pub struct WallClock(Instant);

impl WallClock {
    pub fn start() -> Self {
        Self(Instant::now())
    }
}

impl Clock for WallClock {
    fn now_ns(&self) -> u64 {
        self.0.elapsed().as_nanos() as u64
    }
}

/// [`run_campaign`] with screened seeds spread over `jobs` threads. Every
/// seed has its own rng stream, so the result does not depend on `jobs`.
pub fn run_campaign_jobs<S>(
    subject: &S,
    seeds: Vec<Seed<S::Input>>,
    cfg: &CampaignConfig,
    clock: &(dyn Clock + Sync),
    jobs: usize,
) -> CampaignResult<S::Input>
where
    S: Subject + Sync,
    S::Input: Send + Sync,
{
    if jobs <= 1 {
        return run_campaign(subject, seeds, cfg, clock);
    }
    let (active, discarded) = screen_seeds(subject, seeds);
    let next = AtomicUsize::new(0);
    let results = Mutex::new(Vec::with_capacity(active.len()));
    std::thread::scope(|s| {
        for _ in 0..jobs.min(active.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(seed) = active.get(i) else { break };
                let r = run_seed(subject, seed, cfg, clock);
                results.lock().expect("worker panicked").push(r);
            });
        }
    });
    let mut seeds = results.into_inner().expect("worker panicked");
    seeds.sort_by_key(|r| r.id);
    CampaignResult {
        config: *cfg,
        seeds,
        discarded,
    }
}

pub const RESULT_HEADER: &str =
    "seed_id,iteration,failure,predicted,score,index,direction_x,direction_y,extent,fallback,degenerate_weights,clamped,degradation";
pub const SEEDS_HEADER: &str = "seed_id,status,failure_iteration,iterations,error";
pub const TIMING_HEADER: &str = "seed_id,iteration,xai_ns,total_ns";

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Per-iteration log. `score` is the prediction confidence for digits and
/// the largest absolute cross-track error for roads.
pub fn result_csv<I>(r: &CampaignResult<I>) -> String {
    let mut s = format!("{RESULT_HEADER}\n");
    for seed in &r.seeds {
        for l in &seed.logs {
            let m = &l.mutation;
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                seed.id,
                l.iteration,
                l.verdict.failure as u8,
                opt(l.verdict.predicted),
                l.verdict.score,
                m.index,
                m.direction.x,
                m.direction.y,
                m.extent,
                m.fallback as u8,
                m.degenerate_weights as u8,
                m.clamped as u8,
                opt(l.degradation)
            )
            .unwrap();
        }
    }
    s
}

/// One row per candidate seed, discarded ones included, in id order.
pub fn seeds_csv<I>(r: &CampaignResult<I>) -> String {
    let mut rows: Vec<(u64, String)> = r
        .seeds
        .iter()
        .map(|seed| {
            let error = seed.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
            (
                seed.id,
                format!(
                    "{},{},{},{},{}",
                    seed.id,
                    seed.status.name(),
                    opt(seed.failure_iteration()),
                    seed.logs.len(),
                    error
                ),
            )
        })
        .chain(
            r.discarded
                .iter()
                .map(|&id| (id, format!("{id},{},,0,", SeedStatus::Discarded.name()))),
        )
        .collect();
    rows.sort_by_key(|(id, _)| *id);
    let mut s = format!("{SEEDS_HEADER}\n");
    for (_, row) in rows {
        s.push_str(&row);
        s.push('\n');
    }
    s
}

pub fn timing_csv<I>(r: &CampaignResult<I>) -> String {
    let mut s = format!("{TIMING_HEADER}\n");
    for seed in &r.seeds {
        for l in &seed.logs {
            writeln!(s, "{},{},{},{}", seed.id, l.iteration, l.xai_ns, l.total_ns).unwrap();
        }
    }
    s
}

/// Reproduction record written next to every run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub config_sha256: String,
    pub rng_seed: u64,
    pub road_seed: u64,
    pub versions: Vec<(String, String)>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
}

impl RunManifest {
    pub fn encode(&self) -> String {
        let mut s = String::new();
        writeln!(s, "command = {}", self.command).unwrap();
        writeln!(s, "config = config").unwrap();
        writeln!(s, "config_sha256 = {}", self.config_sha256).unwrap();
        writeln!(s, "rng_seed = {}", self.rng_seed).unwrap();
        writeln!(s, "road_seed = {}", self.road_seed).unwrap();
        for (name, v) in &self.versions {
            writeln!(s, "version.{name} = {v}").unwrap();
        }
        writeln!(s, "started_unix_ms = {}", self.started_unix_ms).unwrap();
        writeln!(s, "finished_unix_ms = {}", self.finished_unix_ms).unwrap();
        s
    }

    pub fn parse(text: &str) -> Result<Self, RunError> {
        let bad = |what: &str| RunError::Data(format!("manifest: {what}"));
        let mut m = RunManifest {
            command: String::new(),
            config_sha256: String::new(),
            rng_seed: 0,
            road_seed: 0,
            versions: Vec::new(),
            started_unix_ms: 0,
            finished_unix_ms: 0,
        };
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line.split_once(" = ").ok_or_else(|| bad("malformed line"))?;
            let num = |v: &str| v.parse::<u128>().map_err(|_| bad(k));
            match k {
                "command" => m.command = v.to_string(),
                "config" => {}
                "config_sha256" => m.config_sha256 = v.to_string(),
                "rng_seed" => m.rng_seed = num(v)? as u64,
                "road_seed" => m.road_seed = num(v)? as u64,
                "started_unix_ms" => m.started_unix_ms = num(v)?,
                "finished_unix_ms" => m.finished_unix_ms = num(v)?,
                _ => match k.strip_prefix("version.") {
                    Some(name) => m.versions.push((name.to_string(), v.to_string())),
                    None => return Err(bad("unknown key")),
                },
            }
        }
        if m.config_sha256.is_empty() {
            return Err(bad("missing config_sha256"));
        }
        Ok(m)
    }
}

fn unix_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunSummary {
    pub label: String,
    pub candidates: usize,
    pub screened: usize,
    pub failed: usize,
    pub errored: usize,
}

impl RunSummary {
    fn of<I>(label: String, r: &CampaignResult<I>) -> Self {
        Self {
            label,
            candidates: r.seeds.len() + r.discarded.len(),
            screened: r.seeds.len(),
            failed: r.seeds.iter().filter(|s| s.status == SeedStatus::Failed).count(),
            errored: r.seeds.iter().filter(|s| s.status == SeedStatus::Errored).count(),
        }
    }
}

fn prepare_out(out: &Path) -> Result<(), RunError> {
    if out.exists() && fs::read_dir(out).map_err(RunError::io(out))?.next().is_some() {
        return Err(RunError::Data(format!("output directory {} is not empty", out.display())));
    }
    let failures = out.join("failures");
    fs::create_dir_all(&failures).map_err(RunError::io(&failures))
}

fn absolute(p: &Path) -> Result<PathBuf, RunError> {
    std::path::absolute(p).map_err(RunError::io(p))
}

fn check_model(net: &Network, case: Case) -> Result<(), RunError> {
    let ok = match case {
        Case::Digit => matches!(net.head(), Head::Classifier { .. }) && net.input_shape() == [1, 28, 28],
        Case::Road => net.head() == Head::Regression && net.input_shape() == [1, 64, 64],
    };
    if ok {
        Ok(())
    } else {
        Err(RunError::Data(format!("model does not fit the {} case", case.name())))
    }
}

fn nn_err(e: NnError) -> RunError {
    RunError::Internal(e.to_string())
}

/// Runs the campaign described by `cfg` into the empty (or missing)
/// directory `out`.
pub fn run_fuzz(cfg: &FuzzConfig, out: &Path, command: &str, jobs: usize) -> Result<RunSummary, RunError> {
    cfg.validate()?;
    let mut cfg = cfg.clone();
    cfg.model = absolute(&cfg.model)?;
    cfg.dataset = cfg.dataset.as_deref().map(absolute).transpose()?;
    let net = weights::load(&cfg.model)?;
    check_model(&net, cfg.case)?;
    prepare_out(out)?;
    let snapshot = cfg.snapshot();
    write(&out.join("config"), &snapshot)?;
    let started = unix_ms();
    let campaign = CampaignConfig {
        budget: cfg.iterations,
        seed: cfg.rng_seed,
    };
    let clock = WallClock::start();
    let summary = match cfg.case {
        Case::Digit => run_digit(&cfg, &net, &campaign, &clock, jobs, out)?,
        Case::Road => run_road(&cfg, &net, &campaign, &clock, jobs, out)?,
    };
    let manifest = RunManifest {
        command: command.to_string(),
        config_sha256: sha256_hex(snapshot.as_bytes()),
        rng_seed: cfg.rng_seed,
        road_seed: cfg.road_seed,
        versions: vec![
            ("xaifuzz".into(), env!("CARGO_PKG_VERSION").into()),
            ("xaifuzz-core".into(), xaifuzz_core::VERSION.into()),
        ],
        started_unix_ms: started,
        finished_unix_ms: unix_ms(),
    };
    write(&out.join("manifest"), manifest.encode())?;
    Ok(summary)
}

/// Re-runs the campaign recorded in `run_dir` into `out`.
pub fn rerun(run_dir: &Path, out: &Path, command: &str, jobs: usize) -> Result<RunSummary, RunError> {
    let manifest = RunManifest::parse(&read_to_string(&run_dir.join("manifest"))?)?;
    let snapshot = read_to_string(&run_dir.join("config"))?;
    if sha256_hex(snapshot.as_bytes()) != manifest.config_sha256 {
        return Err(RunError::Data("config snapshot does not match the manifest hash".into()));
    }
    run_fuzz(&FuzzConfig::parse(&snapshot)?, out, command, jobs)
}

fn write_common<I>(out: &Path, r: &CampaignResult<I>) -> Result<(), RunError> {
    write(&out.join("result.csv"), result_csv(r))?;
    write(&out.join("seeds.csv"), seeds_csv(r))?;
    write(&out.join("timing.csv"), timing_csv(r))
}

fn run_digit(
    cfg: &FuzzConfig,
    net: &Network,
    campaign: &CampaignConfig,
    clock: &WallClock,
    jobs: usize,
    out: &Path,
) -> Result<RunSummary, RunError> {
    let dir = cfg.dataset.as_deref().expect("validated");
    let set = DigitSet::load_split(dir, "t10k")?;
    let end = cfg.seed_offset + cfg.seeds;
    if end > set.len() {
        return Err(RunError::Data(format!(
            "asked for seeds {}..{end} but the dataset has {} images",
            cfg.seed_offset,
            set.len()
        )));
    }
    let seeds: Vec<Seed<DigitInput>> = (cfg.seed_offset..end)
        .map(|i| {
            let bitmap = Bitmap::new(set.images.cols, set.images.rows, set.images.image(i)).expect("idx dims");
            Seed {
                id: i as u64,
                input: DigitInput::seed(bitmap, set.labels[i] as usize),
            }
        })
        .collect();
    let originals: Vec<(u64, Bitmap)> = seeds.iter().map(|s| (s.id, s.input.bitmap.clone())).collect();
    let subject = DigitSubject {
        net,
        xai: cfg.xai_config(),
        policy: cfg.digit_policy(),
    };
    let result = run_campaign_jobs(&subject, seeds, campaign, clock, jobs);
    write_common(out, &result)?;
    for (id, input) in result.failures() {
        write(&out.join(format!("failures/{id}.pgm")), pgm::encode_bitmap(&input.bitmap))?;
        if let Some(sem) = &input.semantic {
            write(&out.join(format!("failures/{id}.svg")), svg::digit_svg(sem))?;
        }
    }
    let mut emb = String::from("kind,seed_id,values\n");
    let mut row = |kind: &str, id: u64, b: &Bitmap| -> Result<(), RunError> {
        let e = net.penultimate(&b.to_tensor()).map_err(nn_err)?;
        let v: Vec<String> = e.iter().map(|x| x.to_string()).collect();
        writeln!(emb, "{kind},{id},{}", v.join(" ")).unwrap();
        Ok(())
    };
    for s in &result.seeds {
        let b = &originals.iter().find(|(id, _)| *id == s.id).expect("seed").1;
        row("real", s.id, b)?;
    }
    for (id, input) in result.failures() {
        row("failure", id, &input.bitmap)?;
    }
    write(&out.join("embeddings.csv"), emb)?;
    Ok(RunSummary::of(cfg.label(), &result))
}

/// The roads a road campaign starts from.
pub fn road_seeds(cfg: &FuzzConfig) -> Result<Vec<Seed<Road>>, RunError> {
    let gen = RoadGenConfig::default();
    (cfg.seed_offset as u64..(cfg.seed_offset + cfg.seeds) as u64)
        .map(|i| {
            generate_road(&mut stream(cfg.road_seed, i), &gen)
                .map(|input| Seed { id: i, input })
                .map_err(|e| RunError::Internal(e.to_string()))
        })
        .collect()
}

fn run_road(
    cfg: &FuzzConfig,
    net: &Network,
    campaign: &CampaignConfig,
    clock: &WallClock,
    jobs: usize,
    out: &Path,
) -> Result<RunSummary, RunError> {
    let seeds = road_seeds(cfg)?;
    let subject = RoadSubject {
        driver: net,
        xai: cfg.xai_config(),
        policy: cfg.road_policy(),
        sim: SimConfig::default(),
        dqd_metric: cfg.dqd,
    };
    let result = run_campaign_jobs(&subject, seeds, campaign, clock, jobs);
    write_common(out, &result)?;
    let quiet = SimConfig {
        record_frames: false,
        ..SimConfig::default()
    };
    for (id, road) in result.failures() {
        let provenance = format!("road_seed={} index={id} mutated rng_seed={}", cfg.road_seed, cfg.rng_seed);
        write(&out.join(format!("failures/{id}.road")), roadfile::encode(road, &provenance))?;
        let trace = simulate_with(&Driver::Network(net), road, &quiet, None).map_err(|e| RunError::Internal(e.to_string()))?;
        write(&out.join(format!("failures/{id}.trace.csv")), roadfile::trace_csv(&trace))?;
    }
    Ok(RunSummary::of(cfg.label(), &result))
}
