use std::path::Path;
use std::process::{Command, Output};

use hsc_core::model::Checkpoint;
use hsc_core::pipeline::RunConfig;
use hsc_core::training::{self, Scheme};
use hsc_core::Taxonomy;

const SMALL: &str = r#"{"gen": {"tracks_total": 120, "frames_min": 3, "frames_max": 6}, "train": {"epochs": 4}}"#;

fn hsc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hsc"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = hsc(dir, args);
    assert!(
        out.status.success(),
        "hsc {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), SMALL).unwrap();
    dir
}

#[test]
fn full_workflow() {
    let dir = setup();
    let d = dir.path();
    let c = ["--config", "c.json"];
    ok(d, &[&c[..], &["gen", "--out", "."]].concat());
    ok(
        d,
        &[&c[..], &["split", "--data", "dataset.jsonl", "--out", "."]].concat(),
    );
    ok(
        d,
        &[
            &c[..],
            &["train", "--data", "train.jsonl", "--scheme", "scheme3", "--out", "m"],
        ]
        .concat(),
    );
    let loss = std::fs::read_to_string(d.join("m/loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 1 + 4);

    let tau: f64 = ok(
        d,
        &[
            &c[..],
            &[
                "search-threshold",
                "--model",
                "m/model.json",
                "--data",
                "eval.jsonl",
                "--out",
                "m",
            ],
        ]
        .concat(),
    )
    .trim()
    .parse()
    .unwrap();
    let saved: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("m/threshold.json")).unwrap()).unwrap();
    assert_eq!(saved["tau"].as_f64(), Some(tau));
    assert_eq!(saved["scheme"], "scheme3");

    let table = ok(
        d,
        &[
            &c[..],
            &["eval", "--model", "m/model.json", "--data", "eval.jsonl", "--out", "e"],
        ]
        .concat(),
    );
    let mut rows = csv::Reader::from_reader(table.as_bytes());
    let headers = rows.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let rows: Vec<_> = rows.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    let video = rows.iter().find(|r| &r[col("unit")] == "video").unwrap();
    let l2b: f64 = video[col("level2b")].parse().unwrap();
    let l2c: f64 = video[col("level2c")].parse().unwrap();
    assert!(l2c >= l2b, "{l2c} < {l2b}");
    assert_eq!(video[col("tau")].parse::<f64>().unwrap(), tau);
    for f in ["report.json", "table.csv", "precision_level1.csv", "stop_at_level1.csv"] {
        assert!(d.join("e").join(f).exists(), "{f}");
    }

    ok(
        d,
        &[
            &c[..],
            &[
                "infer",
                "--model",
                "m/model.json",
                "--data",
                "eval.jsonl",
                "--threshold",
                "0.5",
                "--out",
                "p",
            ],
        ]
        .concat(),
    );
    let preds = std::fs::read_to_string(d.join("p/predictions.jsonl")).unwrap();
    let eval_tracks = hsc_core::data::load_jsonl(d.join("eval.jsonl"), &Taxonomy::default_6x31())
        .unwrap()
        .num_tracks();
    assert_eq!(preds.lines().count(), 2 * eval_tracks);
    let first: serde_json::Value = serde_json::from_str(preds.lines().next().unwrap()).unwrap();
    for key in ["track_id", "unit", "level", "label", "name", "confidence"] {
        assert!(first.get(key).is_some(), "{key}");
    }
}

#[test]
fn zero_epochs_writes_the_initialization() {
    let dir = setup();
    let d = dir.path();
    ok(d, &["--config", "c.json", "gen", "--out", "."]);
    ok(
        d,
        &[
            "--config",
            "c.json",
            "--seed",
            "7",
            "--epochs",
            "0",
            "train",
            "--data",
            "dataset.jsonl",
            "--scheme",
            "scheme1",
        ],
    );
    let ck = Checkpoint::load(d.join("model.json")).unwrap();
    let mut config = RunConfig::from_json(SMALL).unwrap();
    config.seed = 7;
    let tax = Taxonomy::default_6x31();
    assert_eq!(
        ck.params,
        training::initial_params(&config.train_config(Scheme::Scheme1), &tax)
    );
    assert_eq!(ck.scheme, Scheme::Scheme1);
}

#[test]
fn ablation_prints_one_row_per_scheme_and_unit() {
    let dir = setup();
    let d = dir.path();
    let args = [
        "--config", "c.json", "--scheme", "baseline", "--scheme", "scheme1", "--scheme", "scheme3", "ablation",
        "--out", "a",
    ];
    let table = ok(d, &args);
    assert_eq!(table.lines().count(), 1 + 9);
    assert_eq!(std::fs::read_to_string(d.join("a/table1.csv")).unwrap(), table);
    for s in ["baseline", "scheme1", "scheme3"] {
        assert!(d.join("a").join(s).join("loss.csv").exists());
    }
    let again = ok(d, &[&args[..args.len() - 1], &["b"]].concat());
    assert_eq!(again, table);
    assert_eq!(
        std::fs::read(d.join("a/reports.json")).unwrap(),
        std::fs::read(d.join("b/reports.json")).unwrap()
    );
}

#[test]
fn failures_exit_nonzero_with_one_line() {
    let dir = setup();
    let d = dir.path();
    assert!(!hsc(d, &["frobnicate"]).status.success());
    let missing = hsc(d, &["train"]);
    assert!(!missing.status.success());
    let err = String::from_utf8(missing.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.contains("--data"), "{err}");
    let bad = hsc(d, &["train", "--data", "nope.jsonl"]);
    assert!(!bad.status.success());
    std::fs::write(d.join("bad.json"), r#"{"sed": 1}"#).unwrap();
    assert!(!hsc(d, &["--config", "bad.json", "gen"]).status.success());
}
