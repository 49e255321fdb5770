//! Comparing a guided run directory against a baseline one.
//!
//! `report.csv` has two columns, `metric,value`, with the rows listed in
//! [`REPORT_METRICS`]; undefined values (for example relative efficiency
//! when the baseline never failed) are left empty. `curves.csv` holds the
//! two cumulative failure-rate curves and `curves.svg` plots them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use xaifuzz_core::metrics::{
    cohens_d, density_coverage, efficiency_report, failure_curve, mann_whitney_u, mean, DensityCoverage,
    EfficiencyReport, EffectSize, FailureCurve, MannWhitney,
};

use crate::campaign::{RunError, SEEDS_HEADER, TIMING_HEADER};
use crate::config::FuzzConfig;
use crate::svg::{curves_svg, Series};

/// Nearest neighbours used for density and coverage.
pub const DENSITY_K: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct SeedRow {
    pub id: u64,
    pub status: String,
    pub failure_iteration: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub seed_id: u64,
    pub iteration: usize,
    pub xai_ns: u64,
    pub total_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Embeddings {
    pub real: Vec<Vec<f64>>,
    pub failures: Vec<Vec<f64>>,
}

/// The parts of a run directory a comparison needs.
#[derive(Debug, Clone)]
pub struct RunData {
    pub config: FuzzConfig,
    pub seeds: Vec<SeedRow>,
    pub timing: Vec<TimingRow>,
    pub embeddings: Option<Embeddings>,
}

impl RunData {
    /// Failure iteration of every seed that was fuzzed (not discarded).
    pub fn failure_iterations(&self) -> Vec<Option<usize>> {
        self.seeds
            .iter()
            .filter(|s| s.status != "discarded")
            .map(|s| s.failure_iteration)
            .collect()
    }

    pub fn mean_iteration_ns(&self) -> Option<f64> {
        mean(&self.timing.iter().map(|t| t.total_ns as f64).collect::<Vec<_>>())
    }
}

fn data_err(file: &Path, line: usize, what: &str) -> RunError {
    RunError::Data(format!("{}:{line}: {what}", file.display()))
}

fn rows<'a>(path: &Path, text: &'a str, header: &str) -> Result<Vec<(usize, Vec<&'a str>)>, RunError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == header => {}
        _ => return Err(data_err(path, 1, "unexpected header")),
    }
    let width = header.split(',').count();
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let f: Vec<&str> = l.splitn(width, ',').collect();
            if f.len() == width {
                Ok((i + 1, f))
            } else {
                Err(data_err(path, i + 1, "wrong number of fields"))
            }
        })
        .collect()
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, v: &str) -> Result<T, RunError> {
    v.parse().map_err(|_| data_err(path, line, &format!("bad value `{v}`")))
}

fn read(path: &Path) -> Result<String, RunError> {
    fs::read_to_string(path).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_run(dir: &Path) -> Result<RunData, RunError> {
    let config = FuzzConfig::parse(&read(&dir.join("config"))?)?;
    let path = dir.join("seeds.csv");
    let text = read(&path)?;
    let seeds = rows(&path, &text, SEEDS_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            Ok(SeedRow {
                id: field(&path, line, f[0])?,
                status: f[1].to_string(),
                failure_iteration: if f[2].is_empty() { None } else { Some(field(&path, line, f[2])?) },
            })
        })
        .collect::<Result<Vec<_>, RunError>>()?;
    let path = dir.join("timing.csv");
    let text = read(&path)?;
    let timing = rows(&path, &text, TIMING_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            Ok(TimingRow {
                seed_id: field(&path, line, f[0])?,
                iteration: field(&path, line, f[1])?,
                xai_ns: field(&path, line, f[2])?,
                total_ns: field(&path, line, f[3])?,
            })
        })
        .collect::<Result<Vec<_>, RunError>>()?;
    let path = dir.join("embeddings.csv");
    let embeddings = if path.exists() {
        let text = read(&path)?;
        let mut e = Embeddings::default();
        for (line, f) in rows(&path, &text, "kind,seed_id,values")? {
            let v = f[2]
                .split(' ')
                .map(|x| field::<f64>(&path, line, x))
                .collect::<Result<Vec<_>, _>>()?;
            match f[0] {
                "real" => e.real.push(v),
                "failure" => e.failures.push(v),
                _ => return Err(data_err(&path, line, "unknown kind")),
            }
        }
        Some(e)
    } else {
        None
    };
    Ok(RunData {
        config,
        seeds,
        timing,
        embeddings,
    })
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub guided_label: String,
    pub baseline_label: String,
    pub budget: usize,
    pub screened: usize,
    pub guided_failures: usize,
    pub baseline_failures: usize,
    pub guided_curve: FailureCurve,
    pub baseline_curve: FailureCurve,
    pub guided_mean_ns: f64,
    pub baseline_mean_ns: f64,
    /// `None` when the baseline never failed.
    pub efficiency: Option<EfficiencyReport>,
    /// Test on per-seed failure iterations, with seeds that never failed
    /// counted at `budget + 1`.
    pub mann_whitney: MannWhitney,
    pub cohens_d: Option<f64>,
    pub guided_density: Option<DensityCoverage>,
    pub baseline_density: Option<DensityCoverage>,
}

fn censored(its: &[Option<usize>], budget: usize) -> Vec<f64> {
    its.iter().map(|i| i.unwrap_or(budget + 1) as f64).collect()
}

pub fn compare(guided: &RunData, baseline: &RunData) -> Result<Comparison, RunError> {
    let (g, b) = (&guided.config, &baseline.config);
    if g.case != b.case {
        return Err(RunError::Data("runs are of different cases".into()));
    }
    if g.iterations != b.iterations {
        return Err(RunError::Data(format!(
            "budgets differ: {} vs {}",
            g.iterations, b.iterations
        )));
    }
    let ids = |r: &RunData| -> BTreeMap<u64, bool> {
        r.seeds.iter().map(|s| (s.id, s.status == "discarded")).collect()
    };
    if ids(guided) != ids(baseline) {
        return Err(RunError::Data("runs do not share the same seed set".into()));
    }
    let budget = g.iterations;
    let gi = guided.failure_iterations();
    let bi = baseline.failure_iterations();
    let metric = |e: xaifuzz_core::metrics::MetricsError| RunError::Data(e.to_string());
    let guided_curve = failure_curve(&gi, budget).map_err(metric)?;
    let baseline_curve = failure_curve(&bi, budget).map_err(metric)?;
    let guided_mean_ns = guided.mean_iteration_ns().unwrap_or(0.0);
    let baseline_mean_ns = baseline.mean_iteration_ns().unwrap_or(0.0);
    let efficiency = efficiency_report(&guided_curve, &baseline_curve, guided_mean_ns, baseline_mean_ns).ok();
    let (gx, bx) = (censored(&gi, budget), censored(&bi, budget));
    let mann_whitney = mann_whitney_u(&gx, &bx).map_err(metric)?;
    let dc = |r: &RunData| {
        r.embeddings
            .as_ref()
            .and_then(|e| density_coverage(&e.real, &e.failures, DENSITY_K).ok())
    };
    Ok(Comparison {
        guided_label: g.label(),
        baseline_label: b.label(),
        budget,
        screened: gi.len(),
        guided_failures: gi.iter().flatten().count(),
        baseline_failures: bi.iter().flatten().count(),
        guided_curve,
        baseline_curve,
        guided_mean_ns,
        baseline_mean_ns,
        efficiency,
        mann_whitney,
        cohens_d: cohens_d(&gx, &bx).ok(),
        guided_density: dc(guided),
        baseline_density: dc(baseline),
    })
}

pub const REPORT_METRICS: [&str; 25] = [
    "guided",
    "baseline",
    "budget",
    "screened_seeds",
    "guided_failures",
    "baseline_failures",
    "guided_failure_rate",
    "baseline_failure_rate",
    "guided_aufc",
    "baseline_aufc",
    "relative_efficiency",
    "guided_mean_iteration_ns",
    "baseline_mean_iteration_ns",
    "xai_overhead",
    "composite_efficiency",
    "mann_whitney_u",
    "mann_whitney_p",
    "mann_whitney_exact",
    "cohens_d",
    "effect_size",
    "guided_density",
    "guided_coverage",
    "baseline_density",
    "baseline_coverage",
    "density_k",
];

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn report_csv(c: &Comparison) -> String {
    let e = c.efficiency.as_ref();
    let values = [
        c.guided_label.clone(),
        c.baseline_label.clone(),
        c.budget.to_string(),
        c.screened.to_string(),
        c.guided_failures.to_string(),
        c.baseline_failures.to_string(),
        c.guided_curve.last().to_string(),
        c.baseline_curve.last().to_string(),
        xaifuzz_core::metrics::aufc(&c.guided_curve).to_string(),
        xaifuzz_core::metrics::aufc(&c.baseline_curve).to_string(),
        cell(e.map(|e| e.relative_efficiency)),
        c.guided_mean_ns.to_string(),
        c.baseline_mean_ns.to_string(),
        cell(e.map(|e| e.xai_overhead)),
        cell(e.map(|e| e.composite_efficiency)),
        c.mann_whitney.u.to_string(),
        c.mann_whitney.p.to_string(),
        (c.mann_whitney.exact as u8).to_string(),
        cell(c.cohens_d),
        cell(c.cohens_d.map(|d| EffectSize::of(d).name())),
        cell(c.guided_density.map(|d| d.density)),
        cell(c.guided_density.map(|d| d.coverage)),
        cell(c.baseline_density.map(|d| d.density)),
        cell(c.baseline_density.map(|d| d.coverage)),
        DENSITY_K.to_string(),
    ];
    let mut s = String::from("metric,value\n");
    for (k, v) in REPORT_METRICS.iter().zip(values) {
        writeln!(s, "{k},{v}").unwrap();
    }
    s
}

pub fn curves_csv(c: &Comparison) -> String {
    let mut s = String::from("iteration,guided,baseline\n");
    for i in 1..=c.budget {
        writeln!(s, "{i},{},{}", c.guided_curve.at(i), c.baseline_curve.at(i)).unwrap();
    }
    s
}

/// Parses a `report.csv` back into `metric -> value`.
pub fn parse_report(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .skip(1)
        .filter_map(|l| l.split_once(','))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

pub fn write_report(out: &Path, c: &Comparison) -> Result<(), RunError> {
    fs::create_dir_all(out).map_err(|source| RunError::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let svg = curves_svg(&[
        Series {
            label: &c.guided_label,
            color: "#c0392b",
            values: c.guided_curve.rates(),
        },
        Series {
            label: &c.baseline_label,
            color: "#2c3e50",
            values: c.baseline_curve.rates(),
        },
    ]);
    for (name, body) in [
        ("report.csv", report_csv(c)),
        ("curves.csv", curves_csv(c)),
        ("curves.svg", svg),
    ] {
        let p = out.join(name);
        fs::write(&p, body).map_err(|source| RunError::Io { path: p, source })?;
    }
    Ok(())
}
