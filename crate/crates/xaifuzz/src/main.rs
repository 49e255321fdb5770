use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use xaifuzz::campaign::{self, RunError};
use xaifuzz::config::{Case, ConfigError, FuzzConfig};
use xaifuzz::report;
use xaifuzz::train::{self, DigitRecipe, DriverRecipe, TrainError};
use xaifuzz::weights;
use xaifuzz_core::nn::TrainReport;

/// Explanation-guided semantic fuzzing of a digit classifier and a
/// lane-keeping driver.
#[derive(Parser)]
#[command(name = "xaifuzz", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model under test and write its weights.
    Train(TrainArgs),
    /// Run a fuzzing campaign into an output directory.
    Fuzz(FuzzArgs),
    /// Re-run the campaign recorded in a run directory.
    Rerun {
        run_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Compare a guided run with a baseline run.
    Compare {
        guided: PathBuf,
        baseline: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CaseArg {
    Digit,
    Road,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum)]
    case: CaseArg,
    /// Directory with the MNIST IDX files (digit case).
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct FuzzArgs {
    /// `key = value` file; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["digit", "road"])]
    case: Option<String>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_parser = ["smoothgrad", "ig", "gradcampp"])]
    xai: Option<String>,
    #[arg(long, value_parser = ["window", "cluster", "uniform", "section"])]
    select: Option<String>,
    #[arg(long, value_parser = ["attractor", "random", "high", "low"])]
    direction: Option<String>,
    /// Half-width of the square window.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    seed_offset: Option<usize>,
    #[arg(long)]
    rng_seed: Option<u64>,
    #[arg(long)]
    road_seed: Option<u64>,
    #[arg(long, value_parser = ["max_cte", "steering_norm"])]
    dqd: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

enum Failure {
    Usage(String),
    Data(String),
    Internal(String),
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Config(ConfigError::Illegal(_) | ConfigError::Missing(_)) => Failure::Usage(e.to_string()),
            RunError::Internal(_) => Failure::Internal(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<TrainError> for Failure {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Data(_) => Failure::Data(e.to_string()),
            _ => Failure::Internal(e.to_string()),
        }
    }
}

fn command_line() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

fn write_train_report(out: &Path, case: Case, r: &TrainReport) -> Result<(), Failure> {
    let metric = match case {
        Case::Digit => "accuracy",
        Case::Road => "mean_absolute_error",
    };
    let text = format!(
        "case = {}\nepochs_run = {}\nfinal_loss = {}\ntrain_{metric} = {}\ntest_{metric} = {}\n",
        case.name(),
        r.epochs_run,
        r.final_loss,
        r.train_metric,
        r.test_metric
    );
    let mut path = out.as_os_str().to_owned();
    path.push(".report");
    std::fs::write(&path, &text).map_err(|e| Failure::Data(format!("{}: {e}", out.display())))?;
    print!("{text}");
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<(), Failure> {
    let (net, report, case) = match a.case {
        CaseArg::Digit => {
            let data = a.data.ok_or_else(|| Failure::Usage("--data is required for the digit case".into()))?;
            let mut recipe = DigitRecipe::default();
            if let Some(e) = a.epochs {
                recipe.train.epochs = e;
            }
            if let Some(s) = a.seed {
                recipe.init_seed = s;
                recipe.train.seed = s;
            }
            let (net, report) = train::train_digit(&data, &recipe)?;
            (net, report, Case::Digit)
        }
        CaseArg::Road => {
            let mut recipe = DriverRecipe::default();
            if let Some(e) = a.epochs {
                recipe.train.epochs = e;
            }
            if let Some(s) = a.seed {
                recipe.init_seed = s;
                recipe.train.seed = s;
            }
            let (net, report) = train::train_driver(&recipe)?;
            (net, report, Case::Road)
        }
    };
    weights::save(&net, &a.out).map_err(|e| Failure::Data(format!("{}: {e}", a.out.display())))?;
    write_train_report(&a.out, case, &report)
}

fn fuzz_config(a: &FuzzArgs) -> Result<FuzzConfig, Failure> {
    let mut cfg = FuzzConfig::default();
    if let Some(path) = &a.config {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
        cfg.apply_text(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    }
    let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    let flags = [
        ("case", a.case.clone()),
        ("model", path(&a.model)),
        ("dataset", path(&a.data)),
        ("xai", a.xai.clone()),
        ("select", a.select.clone()),
        ("direction", a.direction.clone()),
        ("window", a.window.map(|v| v.to_string())),
        ("iterations", a.iterations.map(|v| v.to_string())),
        ("seeds", a.seeds.map(|v| v.to_string())),
        ("seed_offset", a.seed_offset.map(|v| v.to_string())),
        ("rng_seed", a.rng_seed.map(|v| v.to_string())),
        ("road_seed", a.road_seed.map(|v| v.to_string())),
        ("dqd", a.dqd.clone()),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, &v).map_err(|e| Failure::Usage(e.to_string()))?;
        }
    }
    Ok(cfg)
}

fn print_summary(s: &campaign::RunSummary) {
    println!(
        "{}: {} candidate seeds, {} screened, {} failed, {} errored",
        s.label, s.candidates, s.screened, s.failed, s.errored
    );
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Fuzz(a) => {
            let cfg = fuzz_config(&a)?;
            print_summary(&campaign::run_fuzz(&cfg, &a.out, &command_line(), a.jobs)?);
            Ok(())
        }
        Command::Rerun { run_dir, out, jobs } => {
            print_summary(&campaign::rerun(&run_dir, &out, &command_line(), jobs)?);
            Ok(())
        }
        Command::Compare { guided, baseline, out } => {
            let c = report::compare(&report::load_run(&guided)?, &report::load_run(&baseline)?)?;
            report::write_report(&out, &c)?;
            print!("{}", report::report_csv(&c));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("usage error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(m)) => {
            eprintln!("data error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(m)) => {
            eprintln!("internal error: {m}");
            ExitCode::from(3)
        }
    }
}
