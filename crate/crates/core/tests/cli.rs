use std::fs;
use std::path::Path;
use std::process::Command;

use loccforge::experiment::{run, ExperimentConfig};
use loccforge::protocol::ProtocolDocument;

const DISTILL: &str = r#"
experiment = "distill-fid"
scheme = "cmps"
copies = 2
kraus_order = 2
seed = 11
[noise]
kinds = ["amplitude_damping", "depolarizing"]
[noise.grid]
values = [0.0, 0.3, 0.6]
[optimizer]
restarts = 2
max_iters = 60
"#;

const MERGE: &str = r#"
experiment = "merge"
scheme = "ips"
seed = 5
[merge]
k = 1
m = 1
samples = 3
objective = "average"
[optimizer]
restarts = 2
max_iters = 60
"#;

fn loccforge(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_loccforge")).args(args).output().expect("binary runs")
}

/// CSV text with the trailing wall-time column removed.
fn without_wall_time(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn identical_config_and_seed_give_identical_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("distill.toml");
    fs::write(&cfg_path, DISTILL).unwrap();
    let mut csvs = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        let o = loccforge(&["distill-fid", "--config", cfg_path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        csvs.push(without_wall_time(&out.join("results.csv")));
        assert!(out.join("manifest.json").exists());
        assert!(out.join("protocols/distill-fid-p002.json").exists());
    }
    assert_eq!(csvs[0], csvs[1]);
    assert!(csvs[0].starts_with("# loccforge-results v1\n"));
    assert_eq!(csvs[0].lines().count(), 2 + 3);

    let other = tmp.path().join("c");
    let o = loccforge(&["distill-fid", "--config", cfg_path.to_str().unwrap(), "--seed", "12", "--out", other.to_str().unwrap()]);
    assert!(o.status.success());
    assert_ne!(without_wall_time(&other.join("results.csv")), csvs[0]);
}

#[test]
fn exported_protocols_reevaluate_to_the_logged_value() {
    let tmp = tempfile::tempdir().unwrap();
    for text in [DISTILL, MERGE] {
        let mut cfg = ExperimentConfig::from_toml(text).unwrap();
        cfg.output.dir = tmp.path().join(cfg.kind().unwrap().label());
        let out = run(&cfg).unwrap();
        assert_eq!(out.failures, 0);
        assert_eq!(out.protocol_paths.len(), out.rows.len());
        for (row, path) in out.rows.iter().zip(&out.protocol_paths) {
            let doc = ProtocolDocument::from_json(&fs::read_to_string(path).unwrap()).unwrap();
            let (protocol, point) = doc.restore().unwrap();
            let objective = cfg.objective(row.point, row.sample.unwrap_or(0)).unwrap();
            assert_eq!(&protocol, objective.protocol());
            let value = objective.value(&point).unwrap();
            assert!((value - row.value.unwrap()).abs() <= 1e-9, "{value} vs {:?}", row.value);
        }
    }
}

#[test]
fn merging_rows_carry_entropy_and_dominated_values() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::from_toml(MERGE).unwrap();
    cfg.with_bound = true;
    cfg.output.dir = tmp.path().to_path_buf();
    let out = run(&cfg).unwrap();
    assert_eq!(out.rows.len(), 3);
    for r in &out.rows {
        assert!(r.conditional_entropy.unwrap().abs() <= 1.0 + 1e-9);
        assert!(r.bound.unwrap() >= r.value.unwrap() - 1e-4);
    }
    assert!(out.dominance.violations.is_empty());
}

#[test]
fn invalid_config_is_a_usage_error_naming_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("bad.toml");
    fs::write(&cfg_path, "[merge]\nsamples = 0\nscheme = \"ips\"\n").unwrap();
    let o = loccforge(&["merge", "--config", cfg_path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("scheme"));

    fs::write(&cfg_path, "scheme = \"ips\"\n[merge]\nsamples = 0\n").unwrap();
    let o = loccforge(&["merge", "--config", cfg_path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("merge.samples"));

    fs::write(&cfg_path, "experiment = \"merge\"\n").unwrap();
    let o = loccforge(&["distill-avg", "--config", cfg_path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("experiment"));
}

#[test]
fn ppt_bound_subcommand_writes_bounds_only() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("ppt.toml");
    fs::write(&cfg_path, "[noise]\nkinds = [\"depolarizing\"]\n[noise.grid]\nvalues = [0.0, 1.0]\n").unwrap();
    let out = tmp.path().join("o");
    let o = loccforge(&["ppt-bound", "--config", cfg_path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    let values: Vec<f64> = csv.lines().skip(2).map(|l| l.split(',').nth(7).unwrap().parse().unwrap()).collect();
    assert!((values[0] - 1.0).abs() < 1e-4);
    assert!((values[1] - 0.5).abs() < 1e-4);
    assert!(!out.join("protocols").exists());
}
