use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_delivery-sim"));
    cmd.env_remove("RUST_LOG");
    // Keep stray DSIM_* variables from the caller out of the runs.
    for (k, _) in std::env::vars() {
        if k.starts_with("DSIM_") {
            cmd.env_remove(k);
        }
    }
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout_lines(out: &Output) -> Vec<String> {
    String::from_utf8_lossy(&out.stdout).lines().map(str::to_string).collect()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// One short run; returns the run directory printed on stdout.
fn short_run(out: &Path, extra: &[&str]) -> PathBuf {
    let mut args = vec!["--log", "warn", "run", "--seed", "7", "--set", "total_steps=240", "--out"];
    let out_s = out.to_str().unwrap();
    args.push(out_s);
    args.extend_from_slice(extra);
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    PathBuf::from(stdout_lines(&o).last().unwrap())
}

fn write_corpus(path: &Path, per_emotion: usize) {
    let emotions = ["Anger", "Disgust", "Fear", "Happiness", "Sadness", "Surprise"];
    let mut text = String::new();
    for e in emotions {
        for i in 0..per_emotion {
            text.push_str(
                &serde_json::json!({
                    "id": format!("{e}-{i}"),
                    "text": format!("so much {e} on delivery {i}, the customer {} me", ["thanked", "ignored", "yelled at", "tipped"][i % 4]),
                    "emotion": e,
                    "behavior": "kept riding",
                })
                .to_string(),
            );
            text.push('\n');
        }
    }
    fs::write(path, text).unwrap();
}

#[test]
fn help_and_version_exit_zero() {
    let o = run(&["--help"]);
    assert!(o.status.success());
    let o = run(&["run", "--help"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("memory_ttl"));
    assert!(run(&["--version"]).status.success());
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["run", "--variant", "cheerful"]).status.code(), Some(1));
}

#[test]
fn run_writes_run_directory_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let a = short_run(&tmp.path().join("a"), &[]);
    let b = short_run(&tmp.path().join("b"), &[]);
    for f in ["manifest.json", "config.toml", "events.jsonl", "metrics.jsonl", "decisions.jsonl"] {
        assert!(a.join(f).is_file(), "missing {f}");
    }
    let ma = json(&a.join("manifest.json"));
    let mb = json(&b.join("manifest.json"));
    assert_eq!(ma["status"], "completed");
    assert_eq!(ma["events_sha256"], mb["events_sha256"]);
    assert_eq!(a.file_name(), b.file_name());
    assert!(a.file_name().unwrap().to_str().unwrap().starts_with("paper-main-emotion-aligned-s7-"));
}

#[test]
fn flags_env_and_set_layer_in_order() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["--log", "warn", "run", "--set", "total_steps=120", "--seed", "3", "--out"])
        .arg(tmp.path())
        .env("DSIM_RNG_SEED", "99")
        .env("DSIM_N_RIDERS", "4")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = PathBuf::from(stdout_lines(&o).last().unwrap());
    let m = json(&dir.join("manifest.json"));
    // --seed beats the environment, the environment beats the preset.
    assert_eq!(m["seed"], 3);
    assert_eq!(m["config"]["n_riders"], 4);
    assert_eq!(m["total_steps"], 120);
}

#[test]
fn config_file_and_bad_values() {
    let tmp = tempfile::tempdir().unwrap();
    let run_dir = short_run(&tmp.path().join("a"), &["--variant", "traditional"]);
    let cfg = run_dir.join("config.toml");
    let o = run(&["--log", "warn", "run", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("b").to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let again = PathBuf::from(stdout_lines(&o).last().unwrap());
    assert_eq!(
        json(&again.join("manifest.json"))["events_sha256"],
        json(&run_dir.join("manifest.json"))["events_sha256"]
    );

    let o = run(&["run", "--set", "n_riders=0", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_riders"));
    let o = run(&["run", "--set", "no_such_field=1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["run", "--config", "/nonexistent/cfg.toml"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn aligned_run_without_index_still_completes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = short_run(tmp.path(), &["--variant", "emotion-aligned"]);
    let m = json(&dir.join("manifest.json"));
    assert_eq!(m["status"], "completed");
    assert!(m["corpus_index"].is_null());
}

#[test]
fn analyze_writes_report_and_honours_filter() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = short_run(tmp.path(), &[]);
    let d = dir.to_str().unwrap();
    let o = run(&["--log", "error", "analyze", d]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["involution.csv", "rejection.csv", "emotions.csv", "heatmap.csv", "summary.json"] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    let s = json(&dir.join("summary.json"));
    assert_eq!(s["emotion_filter"], "at-acceptance");

    let o = run(&["--log", "error", "analyze", d, "--filter", "at-rejection", "--downsample", "10"]);
    assert!(o.status.success());
    let s = json(&dir.join("summary.json"));
    assert_eq!(s["emotion_filter"], "at-rejection");
    assert_eq!(s["heatmap_downsample"], 10);
    let hist_total: u64 = s["emotion_histogram"].as_object().unwrap().values().map(|v| v.as_u64().unwrap()).sum();
    assert_eq!(hist_total, s["rejects"].as_u64().unwrap());
    let emotions = fs::read_to_string(dir.join("emotions.csv")).unwrap();
    assert!(emotions.lines().skip(1).all(|l| l.starts_with("at-rejection,")));
    let heat = fs::read_to_string(dir.join("heatmap.csv")).unwrap();
    assert_eq!(heat.lines().count(), 20);
    assert!(heat.lines().all(|l| l.split(',').count() == 20));
}

#[test]
fn analyze_missing_dir_fails() {
    let o = run(&["analyze", "/nonexistent/run"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/run"));
}

#[test]
fn index_is_reproducible_and_checks_k() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus.jsonl");
    write_corpus(&corpus, 10);
    let a = tmp.path().join("a.json");
    let b = tmp.path().join("b.json");
    for out in [&a, &b] {
        let o = run(&["--log", "warn", "index", "--corpus", corpus.to_str().unwrap(), "--k", "2", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let idx = json(&a);
    let sections = idx["sections"].as_array().unwrap();
    assert_eq!(sections.len(), 6);
    for s in sections {
        assert_eq!(s["clusters"].as_array().unwrap().len(), 2);
    }

    let o = run(&["index", "--corpus", corpus.to_str().unwrap(), "--k", "11", "--out", tmp.path().join("c.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Anger"));

    // The index feeds an aligned run.
    let dir = short_run(&tmp.path().join("runs"), &["--corpus-index", a.to_str().unwrap()]);
    let decisions = fs::read_to_string(dir.join("decisions.jsonl")).unwrap();
    assert!(decisions.lines().any(|l| !l.contains("\"n_examples\":0")));
}

#[test]
fn ablation_runs_three_variants_on_one_order_stream() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("abl");
    let o = run(&["--log", "warn", "ablation", "--set", "total_steps=360", "--seed", "5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut hashes = Vec::new();
    for v in ["traditional", "emotion-perceived", "emotion-aligned"] {
        let m = json(&out.join(v).join("manifest.json"));
        assert_eq!(m["status"], "completed");
        hashes.push(m["orders_sha256"].clone());
    }
    assert!(hashes.windows(2).all(|w| w[0] == w[1]));
    let csv = fs::read_to_string(out.join("comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 3);
}
