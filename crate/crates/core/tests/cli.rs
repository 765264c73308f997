use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn cqs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cqs"))
        .args(args)
        .env_remove("DCQ_SEED")
        .output()
        .expect("run cqs")
}

fn ok(args: &[&str]) -> String {
    let out = cqs(args);
    assert!(
        out.status.success(),
        "cqs {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Tiny end-to-end workspace: 16³ volumes, 8³ blocks, 3 bounds, 2 epochs.
struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let f = Fixture {
            dir: tempfile::tempdir().unwrap(),
        };
        let data = f.path("data");
        ok(&[
            "gen-synthetic",
            "--dims",
            "16,16,16",
            "--timesteps",
            "4",
            "--seed",
            "7",
            "--outdir",
            s(&data),
        ]);
        ok(&[
            "label",
            "--manifest",
            s(&data.join("manifest.json")),
            "--block-dims",
            "8,8,8",
            "--blocks",
            "3",
            "--eb-range",
            "1e-4,1e-2",
            "--eb-points",
            "3",
            "--seed",
            "7",
            "--outdir",
            s(&f.path("labels")),
        ]);
        ok(&[
            "train-backbone",
            "--labels",
            s(&f.labels()),
            "--epochs",
            "2",
            "--seed",
            "7",
            "--outdir",
            s(&f.path("bb")),
        ]);
        ok(&[
            "train-head",
            "--model",
            s(&f.path("bb/backbone.dcqm")),
            "--labels",
            s(&f.labels()),
            "--epochs",
            "2",
            "--seed",
            "7",
            "--outdir",
            s(&f.path("model")),
        ]);
        f
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn labels(&self) -> PathBuf {
        self.path("labels/labels.csv")
    }

    fn model(&self) -> PathBuf {
        self.path("model/model.dcqm")
    }

    fn volume(&self) -> PathBuf {
        self.path("data/synthetic_t000.f32")
    }
}

#[test]
fn gen_synthetic_writes_volumes_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("d");
    ok(&[
        "gen-synthetic",
        "--dims",
        "64,64,64",
        "--timesteps",
        "4",
        "--seed",
        "7",
        "--outdir",
        s(&d),
    ]);
    for t in 0..4 {
        let len = std::fs::metadata(d.join(format!("synthetic_t{t:03}.f32")))
            .unwrap()
            .len();
        assert_eq!(len, 64 * 64 * 64 * 4);
    }
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["fields"][0]["timesteps"].as_array().unwrap().len(), 4);
    let cfg: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("config.json")).unwrap()).unwrap();
    assert_eq!(cfg["seed"], 7);
    assert_eq!(cfg["command"]["subcommand"], "gen-synthetic");
}

#[test]
fn full_workflow_outputs() {
    let f = Fixture::new();
    let text = std::fs::read_to_string(f.labels()).unwrap();
    // 4 timesteps x 3 blocks x 2 codecs x 3 bounds, plus the header
    assert_eq!(text.lines().count(), 1 + 72);
    assert!(f.path("labels/labels.provenance.json").exists());

    // predict prints exactly one JSON object
    let out = ok(&[
        "predict",
        "--model",
        s(&f.model()),
        "--codec",
        "pred-eb",
        "--metric",
        "cr",
        "--eb",
        "1e-3",
        "--input",
        s(&f.volume()),
        "--dims",
        "16,16,16",
        "--outdir",
        s(&f.path("pred")),
    ]);
    assert_eq!(out.lines().count(), 1);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["codec"], "pred-eb");
    assert_eq!(v["metric"], "cr");
    assert!(v["prediction"].as_f64().unwrap() > 0.0);

    // eval: 2 codecs x 3 metrics x 1 field curves, finite numbers
    ok(&[
        "eval",
        "--model",
        s(&f.model()),
        "--labels",
        s(&f.labels()),
        "--outdir",
        s(&f.path("eval")),
    ]);
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(f.path("eval/eval_report.json")).unwrap()).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 6);
    let curves: Vec<_> = std::fs::read_dir(f.path("eval/plotdata"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(curves.len(), 6);
    for c in &curves {
        let mut r = csv::Reader::from_path(c).unwrap();
        assert_eq!(r.headers().unwrap(), vec!["eb_rel", "ground_truth", "prediction", "pe"]);
        let rows: Vec<_> = r.records().map(Result::unwrap).collect();
        assert!(!rows.is_empty(), "{}", c.display());
        for row in rows {
            assert!(row.iter().all(|x| x.parse::<f64>().unwrap().is_finite()), "{row:?}");
        }
    }

    // field granularity works from the same files
    ok(&[
        "eval",
        "--model",
        s(&f.model()),
        "--labels",
        s(&f.labels()),
        "--granularity",
        "field",
        "--outdir",
        s(&f.path("eval_field")),
    ]);

    let out = ok(&[
        "inspect-model",
        "--model",
        s(&f.model()),
        "--outdir",
        s(&f.path("inspect")),
    ]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["heads"].as_array().unwrap().len(), 6);
    assert_eq!(v["backbone"]["frozen"], true);
    assert_eq!(v["training"]["heads"].as_object().unwrap().len(), 6);

    ok(&[
        "time-sweep",
        "--model",
        s(&f.model()),
        "--input",
        s(&f.volume()),
        "--dims",
        "16,16,16",
        "--eb-points",
        "4",
        "--repetitions",
        "1",
        "--blocks",
        "2",
        "--outdir",
        s(&f.path("timing")),
    ]);
    let t = std::fs::read_to_string(f.path("timing/timing_pred-eb.csv")).unwrap();
    assert!(t.starts_with("# nondeterministic"));
    assert_eq!(t.lines().count(), 2 + 4);

    ok(&[
        "ablate-moe",
        "--labels",
        s(&f.labels()),
        "--model",
        s(&f.model()),
        "--epochs",
        "2",
        "--seeds",
        "1,2",
        "--outdir",
        s(&f.path("ablate")),
    ]);
    let a = std::fs::read_to_string(f.path("ablate/ablation_moe.csv")).unwrap();
    let header = a.lines().next().unwrap();
    assert!(header.starts_with("field,seed,pred-eb_cr_B,pred-eb_cr_M"), "{header}");
    assert_eq!(header.split(',').count(), 2 + 12);
    assert_eq!(a.lines().count(), 3);
}

#[test]
fn reruns_are_byte_identical() {
    let a = Fixture::new();
    let b = Fixture::new();
    for rel in [
        "data/synthetic_t002.f32",
        "labels/labels.csv",
        "bb/backbone.dcqm",
        "model/model.dcqm",
    ] {
        assert_eq!(
            std::fs::read(a.path(rel)).unwrap(),
            std::fs::read(b.path(rel)).unwrap(),
            "{rel}"
        );
    }
    for f in [&a, &b] {
        ok(&[
            "eval",
            "--model",
            s(&f.model()),
            "--labels",
            s(&f.labels()),
            "--outdir",
            s(&f.path("eval")),
        ]);
    }
    assert_eq!(
        std::fs::read(a.path("eval/eval_report.json")).unwrap(),
        std::fs::read(b.path("eval/eval_report.json")).unwrap()
    );
}

#[test]
fn config_echo_replays_the_run() {
    let f = Fixture::new();
    let cfg = f.path("labels/config.json");
    let first = std::fs::read(f.labels()).unwrap();
    std::fs::remove_file(f.labels()).unwrap();
    ok(&["--config", s(&cfg)]);
    assert_eq!(std::fs::read(f.labels()).unwrap(), first);
    // The replay writes the same resolved config back.
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&cfg).unwrap()).unwrap();
    assert_eq!(v["command"]["subcommand"], "label");
    assert_eq!(v["command"]["eb_grid"].as_array().unwrap().len(), 3);
    assert_eq!(v["command"]["block_spec"]["count"], 3);
}

#[test]
fn exit_codes() {
    let f = Fixture::new();
    assert_eq!(cqs(&[]).status.code(), Some(2));
    assert_eq!(cqs(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(cqs(&["label", "--bogus-flag"]).status.code(), Some(2));

    // A model with no heads: a pipeline error, reported with its category.
    let out = cqs(&[
        "predict",
        "--model",
        s(&f.path("bb/backbone.dcqm")),
        "--codec",
        "pred-eb",
        "--metric",
        "cr",
        "--eb",
        "1e-3",
        "--input",
        s(&f.volume()),
        "--dims",
        "16,16,16",
        "--outdir",
        s(&f.path("p")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("error[missing-head]:"), "{err}");

    let out = cqs(&[
        "inspect-model",
        "--model",
        s(&f.path("nope.dcqm")),
        "--outdir",
        s(&f.path("i")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error[io]:"));

    let out = cqs(&[
        "label",
        "--manifest",
        s(&f.path("data/manifest.json")),
        "--eb-grid",
        "1e-3,1e-4",
        "--outdir",
        s(&f.path("l")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error[argument]:"));
}

#[test]
fn help_lists_flags_with_defaults() {
    let top = ok(&["--help"]);
    for sub in [
        "gen-synthetic",
        "label",
        "train-backbone",
        "train-head",
        "predict",
        "eval",
        "ablate-moe",
        "time-sweep",
        "inspect-model",
    ] {
        assert!(top.contains(sub), "{sub}");
    }
    for flag in ["--seed", "--outdir", "--workers", "--desk", "--config"] {
        assert!(top.contains(flag), "{flag}");
    }
    let label = ok(&["label", "--help"]);
    for flag in [
        "--manifest",
        "--codecs",
        "--eb-preset",
        "--eb-range",
        "--eb-points",
        "--eb-grid",
        "--block-dims",
        "--blocks",
    ] {
        assert!(label.contains(flag), "{flag}");
    }
    assert!(label.contains("[default: nyx]"));
    assert!(label.contains("[default: 20]"));
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("d");
    let out = Command::new(env!("CARGO_BIN_EXE_cqs"))
        .args([
            "gen-synthetic",
            "--dims",
            "8,8,8",
            "--timesteps",
            "1",
            "--outdir",
            s(&d),
        ])
        .env("DCQ_SEED", "99")
        .output()
        .unwrap();
    assert!(out.status.success());
    let cfg: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("config.json")).unwrap()).unwrap();
    assert_eq!(cfg["seed"], 99);

    ok(&[
        "gen-synthetic",
        "--dims",
        "8,8,8",
        "--timesteps",
        "1",
        "--outdir",
        s(&d),
    ]);
    let cfg: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("config.json")).unwrap()).unwrap();
    assert_eq!(cfg["seed"], 2024);
}
