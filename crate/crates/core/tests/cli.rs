mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bdaudit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bdaudit"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn bdaudit")
}

fn run_fixture(out: &Path, extra: &[&str]) -> Output {
    let cfg = common::fixture_config();
    let mut args = vec!["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    bdaudit(&args)
}

/// Relative path → bytes for every file under `dir`.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

#[test]
fn run_writes_the_file_set() {
    let tmp = TempDir::new().unwrap();
    let out = run_fixture(tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let files: Vec<String> = snapshot(tmp.path())
        .keys()
        .map(|p| p.to_string_lossy().replace('\\', "/"))
        .collect();
    let charts: Vec<&String> = files.iter().filter(|f| f.starts_with("charts/")).collect();
    assert_eq!(
        charts,
        ["charts/bd_Action.svg", "charts/bd_Romance.svg", "charts/pr_Action.svg", "charts/pr_Romance.svg"]
    );
    let csvs: Vec<&String> = files.iter().filter(|f| f.ends_with(".csv")).collect();
    assert_eq!(csvs, ["metrics.csv", "ndcg.csv", "significance.csv"]);
    let json: Vec<&String> = files.iter().filter(|f| f.ends_with(".json")).collect();
    assert_eq!(json, ["provenance.json", "report.json"]);
    assert_eq!(files.len(), 9);
}

#[test]
fn two_runs_are_byte_identical() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    assert_eq!(run_fixture(a.path(), &[]).status.code(), Some(0));
    assert_eq!(run_fixture(b.path(), &[]).status.code(), Some(0));
    let mut sa = snapshot(a.path());
    let mut sb = snapshot(b.path());
    // wall-clock timing lives only here
    sa.remove(Path::new("provenance.json"));
    sb.remove(Path::new("provenance.json"));
    assert_eq!(sa.keys().collect::<Vec<_>>(), sb.keys().collect::<Vec<_>>());
    for (k, v) in &sa {
        assert!(v == &sb[k], "{} differs between runs", k.display());
    }
}

#[test]
fn seed_flag_overrides_config() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    assert_eq!(run_fixture(a.path(), &[]).status.code(), Some(0));
    assert_eq!(run_fixture(b.path(), &["--seed", "99"]).status.code(), Some(0));
    let ra: serde_json::Value = serde_json::from_slice(&fs::read(a.path().join("report.json")).unwrap()).unwrap();
    let rb: serde_json::Value = serde_json::from_slice(&fs::read(b.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(ra["config"]["seed"], 1);
    assert_eq!(rb["config"]["seed"], 99);
    assert_ne!(
        fs::read(a.path().join("ndcg.csv")).unwrap(),
        fs::read(b.path().join("ndcg.csv")).unwrap()
    );
}

#[test]
fn report_subcommand_rerenders_identical_charts() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(run_fixture(tmp.path(), &[]).status.code(), Some(0));
    let before = snapshot(&tmp.path().join("charts"));
    fs::remove_dir_all(tmp.path().join("charts")).unwrap();
    let out = bdaudit(&["report", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(snapshot(&tmp.path().join("charts")), before);
}

#[test]
fn export_recs_writes_one_file_per_algorithm() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(run_fixture(tmp.path(), &["--export-recs"]).status.code(), Some(0));
    let text = fs::read_to_string(tmp.path().join("recommendations/MostPopular.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("fold,user,rank,item"));
    // 20 users, 5 folds, top 3
    assert_eq!(lines.count(), 20 * 5 * 3);
    assert!(tmp.path().join("recommendations/ItemKNN.csv").is_file());
}

#[test]
fn stats_prints_cohort_counts() {
    let cfg = common::fixture_config();
    let out = bdaudit(&["stats", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["n_users"], 20);
    assert_eq!(v["n_items"], 11);
    assert_eq!(v["group_sizes"]["F"], 10);
}

#[test]
fn ingest_cache_round_trips_through_run() {
    let tmp = TempDir::new().unwrap();
    let cache = tmp.path().join("cache");
    let cfg = common::fixture_config();
    let out = bdaudit(&["ingest", "--config", cfg.to_str().unwrap(), "--out", cache.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&cfg).unwrap()).unwrap();
    v["dataset"] = serde_json::json!({"kind": "cache", "dir": cache});
    let cached_cfg = tmp.path().join("cached.json");
    fs::write(&cached_cfg, v.to_string()).unwrap();

    let direct = tmp.path().join("direct");
    let via_cache = tmp.path().join("via_cache");
    assert_eq!(run_fixture(&direct, &[]).status.code(), Some(0));
    let out = bdaudit(&["run", "--config", cached_cfg.to_str().unwrap(), "--out", via_cache.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        fs::read(direct.join("metrics.csv")).unwrap(),
        fs::read(via_cache.join("metrics.csv")).unwrap()
    );
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(bdaudit(&[]).status.code(), Some(1));
    assert_eq!(bdaudit(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(bdaudit(&["run", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(bdaudit(&["run"]).status.code(), Some(1));
    assert_eq!(bdaudit(&["run", "--config", "missing.json"]).status.code(), Some(1));
    assert_eq!(bdaudit(&["report"]).status.code(), Some(1));
    assert_eq!(bdaudit(&["--help"]).status.code(), Some(0));
}

#[test]
fn invalid_config_exits_1() {
    let tmp = TempDir::new().unwrap();
    let p = tmp.path().join("bad.json");
    fs::write(&p, "{\"name\": \"x\"}").unwrap();
    assert_eq!(bdaudit(&["run", "--config", p.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn pipeline_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let cfg = common::fixture_config();
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&cfg).unwrap()).unwrap();
    v["pair"] = serde_json::json!(["Action", "Western"]);
    let dir = common::fixture_dir();
    for k in ["ratings", "movies", "users"] {
        let rel = v["dataset"][k].as_str().unwrap().to_string();
        v["dataset"][k] = serde_json::json!(dir.join(rel));
    }
    let bad = tmp.path().join("western.json");
    fs::write(&bad, v.to_string()).unwrap();
    let out = bdaudit(&["run", "--config", bad.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cohort"));
    // nothing is emitted on failure
    assert!(!tmp.path().join("o").exists());

    let out = bdaudit(&["report", "--out", tmp.path().join("nowhere").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
