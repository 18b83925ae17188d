use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn e2r(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_e2r"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Value of `key` in a `key=value` summary line.
fn field(line: &str, key: &str) -> String {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no `{key}` in {line}"))
        .to_string()
}

fn run_into(dir: &Path, budget: &str, seed: &str) -> Output {
    e2r(&["run", "--strategy", "e2r", "--seed", seed, "--budget", budget, "--out", dir.to_str().unwrap()])
}

#[test]
fn run_writes_three_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_into(tmp.path(), "300", "1");
    assert!(out.status.success(), "{}", stderr(&out));
    for f in ["repertoire.jsonl", "metrics.csv", "config.toml"] {
        assert!(tmp.path().join(f).is_file(), "missing {f}");
    }
    let line = stdout(&out);
    assert_eq!(field(&line, "generations"), "4");
    assert_eq!(field(&line, "rollouts"), "300");
}

#[test]
fn run_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run_into(&a, "1500", "3").status.success());
    assert!(run_into(&b, "1500", "3").status.success());
    for f in ["repertoire.jsonl", "metrics.csv", "config.toml"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn missing_config_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let out = e2r(&["run", "--config", "does/not/exist.toml", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("does/not/exist.toml"));
}

#[test]
fn invalid_config_reports_violations() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "mu = 10\nlambda = 20\nk = 0\n").unwrap();
    let out = e2r(&["run", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr(&out);
    assert!(err.contains("mu ≥ lambda"), "{err}");
    assert!(err.contains("k ≥ 1"), "{err}");
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn config_command_round_trips_through_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out = e2r(&["config"]);
    assert!(out.status.success());
    let cfg = tmp.path().join("default.toml");
    fs::write(&cfg, stdout(&out)).unwrap();
    let out = e2r(&["run", "--config", cfg.to_str().unwrap(), "--budget", "200", "--out", tmp.path().join("o").to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn replay_and_metrics_agree_with_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let run_dir = tmp.path().join("run");
    let out = run_into(&run_dir, "2000", "5");
    assert!(out.status.success());
    let successes: usize = field(&stdout(&out), "successes").parse().unwrap();
    assert!(successes > 0, "fixture run found no success");
    let rep = run_dir.join("repertoire.jsonl");
    let rep_s = rep.to_str().unwrap();

    let replay_dir = tmp.path().join("replay");
    let out = e2r(&["replay", "--repertoire", rep_s, "--index", "0", "--verify", "--svg", "--frame-stride", "40", "--out", replay_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(field(&stdout(&out), "success"), "true");
    let trace = fs::read_to_string(replay_dir.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 201);
    assert_eq!(fs::read_dir(replay_dir.join("frames")).unwrap().count(), 6);

    let out = e2r(&["metrics", "--repertoire", rep_s]);
    assert!(out.status.success(), "{}", stderr(&out));
    let line = stdout(&out);
    let metrics = fs::read_to_string(run_dir.join("metrics.csv")).unwrap();
    let last: Vec<&str> = metrics.lines().last().unwrap().split(',').collect();
    assert_eq!(field(&line, "approach_coverage"), last[4]);
    assert_eq!(field(&line, "grasp_coverage"), last[5]);
    assert_eq!(field(&line, "entries"), successes.to_string());
}

#[test]
fn replay_rejects_bad_index_and_mismatched_env() {
    let tmp = tempfile::tempdir().unwrap();
    let run_dir = tmp.path().join("run");
    assert!(run_into(&run_dir, "200", "1").status.success());
    let rep = run_dir.join("repertoire.jsonl");
    let rep_s = rep.to_str().unwrap();
    let out_dir = tmp.path().join("r");

    let out = e2r(&["replay", "--repertoire", rep_s, "--index", "100000", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(6));
    assert!(stderr(&out).contains("out of range"));

    let cfg = tmp.path().join("other.toml");
    fs::write(&cfg, "[env]\nfriction = 0.9\n").unwrap();
    let out = e2r(&["replay", "--repertoire", rep_s, "--index", "0", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("refusing"));
}

#[test]
fn replay_verify_flags_a_tampered_entry() {
    let tmp = tempfile::tempdir().unwrap();
    let run_dir = tmp.path().join("run");
    assert!(run_into(&run_dir, "1500", "5").status.success());
    let rep = run_dir.join("repertoire.jsonl");
    let text = fs::read_to_string(&rep).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    assert!(lines.len() > 1, "fixture run found no success");
    let mut record: serde_json::Value = serde_json::from_str(&lines[1]).unwrap();
    for gene in record["genome"].as_array_mut().unwrap() {
        *gene = serde_json::json!(0.0);
    }
    lines[1] = record.to_string();
    fs::write(&rep, lines.join("\n") + "\n").unwrap();
    let out = e2r(&["replay", "--repertoire", rep.to_str().unwrap(), "--index", "0", "--verify", "--out", tmp.path().join("r").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(5), "{}", stdout(&out));
}

#[test]
fn metrics_on_empty_repertoire_is_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("far.toml");
    fs::write(&cfg, "[env.object]\nx = 5.0\nshape = { kind = \"circle\", radius = 0.04 }\n").unwrap();
    let run_dir = tmp.path().join("run");
    let out = e2r(&["run", "--config", cfg.to_str().unwrap(), "--budget", "200", "--out", run_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(field(&stdout(&out), "successes"), "0");
    let out = e2r(&["metrics", "--repertoire", run_dir.join("repertoire.jsonl").to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let line = stdout(&out);
    assert_eq!(field(&line, "approach_coverage"), "0");
    assert_eq!(field(&line, "grasp_coverage"), "0");
}

#[test]
fn metrics_ignore_duplicate_entries() {
    let tmp = tempfile::tempdir().unwrap();
    let run_dir = tmp.path().join("run");
    assert!(run_into(&run_dir, "1500", "5").status.success());
    let rep = run_dir.join("repertoire.jsonl");
    let text = fs::read_to_string(&rep).unwrap();
    let body: Vec<&str> = text.lines().skip(1).collect();
    let doubled = tmp.path().join("doubled.jsonl");
    fs::write(&doubled, format!("{text}{}\n", body.join("\n"))).unwrap();
    let a = stdout(&e2r(&["metrics", "--repertoire", rep.to_str().unwrap()]));
    let b = stdout(&e2r(&["metrics", "--repertoire", doubled.to_str().unwrap()]));
    assert_eq!(field(&a, "approach_coverage"), field(&b, "approach_coverage"));
    assert_eq!(field(&a, "grasp_coverage"), field(&b, "grasp_coverage"));
    assert_eq!(field(&b, "entries").parse::<usize>().unwrap(), 2 * field(&a, "entries").parse::<usize>().unwrap());
}

#[test]
fn batch_layout_and_reproducible_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = e2r(&["batch", "--strategies", "e2r,ns,random,multibd", "--seeds", "1-2", "--budget", "300", "--out", dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", stderr(&out));
        assert!(stdout(&out).contains("runs=8 failed=0"));
    }
    let dirs = fs::read_dir(&a).unwrap().filter(|e| e.as_ref().unwrap().path().is_dir()).count();
    assert_eq!(dirs, 8);
    assert!(a.join("multibd_seed2/repertoire.jsonl").is_file());
    assert_eq!(fs::read(a.join("summary.csv")).unwrap(), fs::read(b.join("summary.csv")).unwrap());
}

#[test]
fn single_pair_batch_has_no_interval() {
    let tmp = tempfile::tempdir().unwrap();
    let out = e2r(&["batch", "--strategies", "ns", "--seeds", "4", "--budget", "200", "--out", tmp.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let summary = fs::read_to_string(tmp.path().join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.ends_with(',')), "{summary}");
}

#[test]
fn unknown_strategy_is_a_usage_error() {
    let out = e2r(&["run", "--strategy", "cmaes", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
}
