use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use xaifuzz::idx::{encode_images, encode_labels, DigitSet, IdxImages};
use xaifuzz::report::{parse_report, REPORT_METRICS};
use xaifuzz::weights;
use xaifuzz_core::nn::{digit_classifier, driver_regressor, train, TrainConfig};
use xaifuzz_core::rng::stream;

fn mnist() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist")
}

fn xaifuzz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xaifuzz")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A barely trained classifier and 30 real digits labelled with its own
/// predictions, so every seed passes screening.
fn fixture(dir: &Path) -> (String, String) {
    let train_set = DigitSet::load_split(&mnist(), "train").unwrap().samples();
    let cfg = TrainConfig {
        epochs: 1,
        seed: 11,
        ..Default::default()
    };
    let (net, _) = train(digit_classifier(&mut stream(11, 0)).unwrap(), &train_set[..1000], &train_set[..100], &cfg).unwrap();
    let model = dir.join("digit.bin");
    weights::save(&net, &model).unwrap();
    let set = DigitSet::load_split(&mnist(), "t10k").unwrap();
    let n = 30;
    let labels: Vec<u8> = (0..n).map(|i| net.classify(&set.tensor(i)).unwrap().0 as u8).collect();
    let images = IdxImages {
        rows: 28,
        cols: 28,
        pixels: set.images.pixels[..n * 784].to_vec(),
    };
    let data = dir.join("data");
    std::fs::create_dir(&data).unwrap();
    std::fs::write(data.join("t10k-images-idx3-ubyte"), encode_images(&images)).unwrap();
    std::fs::write(data.join("t10k-labels-idx1-ubyte"), encode_labels(&labels)).unwrap();
    (model.display().to_string(), data.display().to_string())
}

fn fuzz(model: &str, data: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["fuzz", "--case", "digit", "--model", model, "--data", data, "--seeds", "12", "--rng-seed", "3"];
    if !extra.contains(&"--iterations") {
        args.extend(["--iterations", "60"]);
    }
    args.push("--out");
    let out = out.display().to_string();
    args.push(&out);
    args.extend_from_slice(extra);
    xaifuzz(&args)
}

fn read(p: PathBuf) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&xaifuzz(&["--help"])), 0);
    assert_eq!(code(&xaifuzz(&["fuzz", "--bogus"])), 1);
    let o = xaifuzz(&[
        "fuzz", "--case", "digit", "--model", "m", "--data", "d", "--select", "window", "--direction", "attractor",
        "--out", "/nonexistent/x",
    ]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("legal combinations"));
    let o = xaifuzz(&["fuzz", "--case", "road", "--model", "m", "--select", "cluster", "--out", "x"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn missing_files_are_data_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let o = xaifuzz(&["train", "--case", "digit", "--data", "/nonexistent", "--out", "x.bin"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("data error"));
    let out = tmp.path().join("run");
    let o = fuzz("/nonexistent/model.bin", "/nonexistent", &out, &[]);
    assert_eq!(code(&o), 2);
}

#[test]
fn campaigns_are_reproducible_and_comparable() {
    let tmp = tempfile::tempdir().unwrap();
    let (model, data) = fixture(tmp.path());
    let guided = tmp.path().join("guided");
    let guided_args = ["--select", "cluster", "--direction", "attractor", "--xai", "gradcampp"];
    let o = fuzz(&model, &data, &guided, &guided_args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["config", "manifest", "result.csv", "seeds.csv", "timing.csv", "embeddings.csv"] {
        assert!(guided.join(f).exists(), "{f}");
    }
    let result = read(guided.join("result.csv"));
    assert!(result.starts_with("seed_id,iteration,failure,predicted,score,index,"));
    assert!(!result.contains("_ms") && !result.contains("_ns"));

    // Same flags, again: identical results; refuses a used directory.
    let again = tmp.path().join("again");
    assert_eq!(code(&fuzz(&model, &data, &again, &guided_args)), 0);
    assert_eq!(read(again.join("result.csv")), result);
    assert_eq!(code(&fuzz(&model, &data, &again, &guided_args)), 2);

    // Parallel and manifest re-runs match too.
    let rerun = tmp.path().join("rerun");
    let o = xaifuzz(&["rerun", guided.to_str().unwrap(), "--out", rerun.to_str().unwrap(), "--jobs", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(read(rerun.join("result.csv")), result);
    assert_eq!(read(rerun.join("seeds.csv")), read(guided.join("seeds.csv")));

    let failures = std::fs::read_dir(guided.join("failures")).unwrap().count();
    let failed = read(guided.join("seeds.csv")).lines().filter(|l| l.contains(",failed,")).count();
    assert_eq!(failures, 2 * failed);

    let baseline = tmp.path().join("baseline");
    assert_eq!(code(&fuzz(&model, &data, &baseline, &[])), 0);

    let rep = tmp.path().join("report");
    let o = xaifuzz(&["compare", guided.to_str().unwrap(), guided.to_str().unwrap(), "--out", rep.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = parse_report(&read(rep.join("report.csv")));
    let text = read(rep.join("report.csv"));
    let keys: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(keys, REPORT_METRICS);
    assert!(r["mann_whitney_p"].parse::<f64>().unwrap() >= 0.99);
    assert!(failed > 0, "{}", read(guided.join("seeds.csv")));
    assert_eq!(r["relative_efficiency"], "1");
    assert_eq!(r["xai_overhead"], "0");
    assert_eq!(r["composite_efficiency"], "1");
    assert!(rep.join("curves.svg").exists());
    assert_eq!(read(rep.join("curves.csv")).lines().count(), 61);

    let o = xaifuzz(&["compare", guided.to_str().unwrap(), baseline.to_str().unwrap(), "--out", rep.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = parse_report(&read(rep.join("report.csv")));
    assert_eq!(r["guided"], "cluster-attractor-gradcampp");
    assert_eq!(r["baseline"], "baseline");

    let short = tmp.path().join("short");
    assert_eq!(code(&fuzz(&model, &data, &short, &["--iterations", "5"])), 0);
    let o = xaifuzz(&["compare", guided.to_str().unwrap(), short.to_str().unwrap(), "--out", rep.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("budgets differ"));
}

#[test]
fn config_file_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let (model, data) = fixture(tmp.path());
    let cfg = tmp.path().join("c.conf");
    std::fs::write(
        &cfg,
        format!("case = digit\nmodel = {model}\ndataset = {data}\nselect = window\nseeds = 4\niterations = 3\n"),
    )
    .unwrap();
    let out = tmp.path().join("run");
    let o = xaifuzz(&["fuzz", "--config", cfg.to_str().unwrap(), "--seeds", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let snap = read(out.join("config"));
    assert!(snap.contains("select = window\n") && snap.contains("seeds = 2\n"));
    assert_eq!(read(out.join("seeds.csv")).lines().count(), 3);
}

#[test]
fn road_campaign_writes_its_files() {
    let tmp = tempfile::tempdir().unwrap();
    let model = tmp.path().join("driver.bin");
    weights::save(&driver_regressor(&mut stream(2, 0)).unwrap(), &model).unwrap();
    let out = tmp.path().join("run");
    let o = xaifuzz(&[
        "fuzz", "--case", "road", "--model", model.to_str().unwrap(), "--select", "section", "--direction", "high",
        "--xai", "gradcampp", "--seeds", "2", "--iterations", "2", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(read(out.join("seeds.csv")).lines().count(), 3);
    assert!(!out.join("embeddings.csv").exists());
    // A digit model cannot drive.
    let digit = tmp.path().join("digit.bin");
    weights::save(&digit_classifier(&mut stream(2, 0)).unwrap(), &digit).unwrap();
    let o = xaifuzz(&["fuzz", "--case", "road", "--model", digit.to_str().unwrap(), "--out", tmp.path().join("r2").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}
