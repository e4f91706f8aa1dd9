// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn watch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_watch"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn synth(dir: &Path, seed: u64, d: usize) -> PathBuf {
    let out = watch(&[
        "synth", "--T", "400", "--d", &d.to_string(), "--cps", "200", "--shift", "5",
        "--seed", &seed.to_string(), "--out", dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    dir.join(format!("mean_shift_d{d}_seed{seed}.json"))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_writes_dataset_and_annotations() {
    let dir = tempfile::tempdir().unwrap();
    let path = synth(dir.path(), 7, 10);
    let ds = read_json(&path);
    assert_eq!(ds["series"].as_array().unwrap().len(), 400);
    assert_eq!(ds["n_dim"], 10);
    let ann = read_json(&dir.path().join("mean_shift_d10_seed7.annotations.json"));
    assert_eq!(ann["annotations"]["synthetic"], serde_json::json!([200]));
}

#[test]
fn detect_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let path = synth(dir.path(), 7, 10);
    let det = dir.path().join("det.json");
    let out = watch(&["detect", "--input", s(&path), "--output", s(&det)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = read_json(&det);
    assert_eq!(v["dataset"], "mean_shift_d10_seed7");
    assert_eq!(v["config"]["kappa"], 60);
    assert_eq!(v["config"]["mu"], 600);
    let cps = v["changepoints"].as_array().unwrap();
    assert_eq!(cps.len(), 1);
    for key in ["index", "batch", "distance", "threshold"] {
        assert!(cps[0].get(key).is_some());
    }

    let truth = dir.path().join("mean_shift_d10_seed7.annotations.json");
    let out = watch(&["eval", "--pred", s(&det), "--truth", s(&truth), "--margin", "20"]);
    assert_eq!(code(&out), 0);
    let scores: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(scores["f1"], 1.0);
    for key in ["cover", "precision", "recall"] {
        assert!(scores[key].is_f64());
    }
}

#[test]
fn detect_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let path = synth(dir.path(), 1, 3);
    let a = watch(&["detect", "--input", s(&path), "--eviction", "fifo"]);
    let b = watch(&["detect", "--input", s(&path), "--eviction", "fifo"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn detect_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let path = synth(dir.path(), 7, 1);
    assert_eq!(code(&watch(&["detect", "--input", s(&path), "--kappa", "10", "--omega", "20"])), 2);
    assert_eq!(code(&watch(&["detect", "--input", s(&path), "--eviction", "lifo"])), 2);
    assert_eq!(code(&watch(&["detect", "--input", s(&path), "--slices", "0"])), 2);
    assert_eq!(code(&watch(&["detect", "--input", s(&dir.path().join("missing.json"))])), 1);
    assert_eq!(code(&watch(&["detect", "--input", s(&path), "--no-such-flag"])), 2);

    let garbage = dir.path().join("bad.json");
    std::fs::write(&garbage, "{not json").unwrap();
    assert_eq!(code(&watch(&["detect", "--input", s(&garbage)])), 1);

    let out = watch(&["detect", "--input", s(&path), "--timeout", "1e-9"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn detect_reads_csv_with_missing_values() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("series.csv");
    let mut text = String::from("a,b\n");
    for t in 0..200 {
        let v = if t < 100 { 0.0 } else { 10.0 } + (t % 7) as f64 * 0.1;
        if t == 50 {
            text.push_str(",NA\n");
        } else {
            text.push_str(&format!("{v},{v}\n"));
        }
    }
    std::fs::write(&csv, &text).unwrap();
    assert_eq!(code(&watch(&["detect", "--input", s(&csv), "--has-header"])), 1);
    let out = watch(&["detect", "--input", s(&csv), "--has-header", "--forward-fill", "--normalize"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["n_obs"], 200);
}

#[test]
fn eval_examples() {
    let dir = tempfile::tempdir().unwrap();
    let truth = dir.path().join("t.annotations.json");
    std::fs::write(&truth, r#"{"dataset": "t", "n_obs": 100, "annotations": {"a": [50]}}"#).unwrap();
    let run = |pred: &str, margin: &str| {
        let p = dir.path().join("pred.json");
        std::fs::write(&p, pred).unwrap();
        let out = watch(&["eval", "--pred", s(&p), "--truth", s(&truth), "--margin", margin]);
        (code(&out), serde_json::from_slice::<Value>(&out.stdout).unwrap_or(Value::Null))
    };

    let (c, v) = run("[50]", "5");
    assert_eq!(c, 0);
    assert_eq!((v["f1"].as_f64(), v["cover"].as_f64()), (Some(1.0), Some(1.0)));

    let (_, v) = run("[]", "5");
    assert_eq!(v["cover"], 0.5);

    // Off by one at margin 0: only the implicit start matches.
    let (_, v) = run("[51]", "0");
    assert!((v["precision"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((v["recall"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    let (_, v) = run("[51]", "1");
    assert_eq!(v["f1"], 1.0);

    // Detect output run on a different series length.
    let (c, _) = run(r#"{"dataset": "t", "n_obs": 90, "changepoints": []}"#, "5");
    assert_eq!(c, 1);
    let (c, _) = run(r#"{"oops": 1}"#, "5");
    assert_eq!(c, 1);
    let (c, _) = run("[100]", "5");
    assert_eq!(c, 1);
}

#[test]
fn bench_modes_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    std::fs::create_dir(&data).unwrap();
    for seed in 0..2 {
        synth(&data, seed, 4);
    }
    let grid = dir.path().join("grid.json");
    std::fs::write(
        &grid,
        r#"[{"kappa": 60, "mu": 600, "epsilon": 1.5, "omega": 20},
            {"kappa": 40, "mu": 200, "epsilon": 3.0, "omega": 10}]"#,
    )
    .unwrap();

    let default_out = dir.path().join("default");
    let out = watch(&["bench", "--datasets", s(&data), "--out", s(&default_out)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let best_out = dir.path().join("best");
    let out = watch(&["bench", "--datasets", s(&data), "--mode", "best", "--grid", s(&grid), "--out", s(&best_out)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let summary = std::fs::read_to_string(best_out.join("summary_watch.csv")).unwrap();
    assert!(summary.starts_with("group,mode,metric,mean,count\n"));
    let ranks = std::fs::read_to_string(best_out.join("ranks_f1.csv")).unwrap();
    assert!(ranks.starts_with("method,mean_rank\n"));
    let pairwise = std::fs::read_to_string(best_out.join("pairwise_f1.csv")).unwrap();
    assert!(pairwise.starts_with("method_a,method_b,p_raw,p_holm\n"));

    // The grid contains the default configuration, so best never loses.
    let default_results = read_json(&default_out.join("results.json"));
    let best_results = read_json(&best_out.join("results.json"));
    for d in default_results.as_array().unwrap() {
        for b in best_results.as_array().unwrap() {
            if b["dataset"] == d["dataset"] && b["method"] == d["method"] {
                let metric = b["target"].as_str().unwrap();
                assert!(b[metric].as_f64().unwrap() >= d[metric].as_f64().unwrap());
            }
        }
    }

    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    assert_eq!(code(&watch(&["bench", "--datasets", s(&empty), "--out", s(&dir.path().join("x"))])), 1);

    let bad_grid = dir.path().join("bad_grid.json");
    std::fs::write(&bad_grid, r#"[{"kappa": 5, "mu": 600, "epsilon": 1.5, "omega": 20}]"#).unwrap();
    let y = dir.path().join("y");
    let args = ["bench", "--datasets", s(&data), "--mode", "best", "--grid", s(&bad_grid), "--out", s(&y)];
    assert_eq!(code(&watch(&args)), 2);
    std::fs::write(&bad_grid, "[]").unwrap();
    assert_eq!(code(&watch(&args)), 2);
    assert_eq!(code(&watch(&["bench", "--datasets", s(&data), "--mode", "worst", "--out", s(&dir.path().join("z"))])), 2);
}

#[test]
fn bench_output_is_independent_of_threads() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    std::fs::create_dir(&data).unwrap();
    for seed in 0..3 {
        synth(&data, seed, 2);
    }
    let run = |threads: &str, out: &Path| {
        let o = Command::new(env!("CARGO_BIN_EXE_watch"))
            .env("WATCH_THREADS", threads)
            .args(["bench", "--datasets", s(&data), "--out", s(out)])
            .output()
            .unwrap();
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run("1", &a);
    run("8", &b);
    for f in ["results.json", "summary_watch.csv", "ranks_cover.csv", "pairwise_f1.csv", "friedman_f1.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}
