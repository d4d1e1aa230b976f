use std::path::Path;
use std::process::Command;

use vnmig::cli::{main_with, EXIT_ABORT, EXIT_CONFIG, EXIT_OK};

const THREE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/three_host_line.toml");
const TWO: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/two_node.toml");

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["vnmig"];
    full.extend_from_slice(args);
    let code = main_with(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn run_writes_provenance_and_fixed_columns() {
    let (code, out, err) = run(&["run", "--scenario", TWO, "--seed", "5"]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(err.is_empty());
    let mut lines = out.lines();
    let header = lines.next().unwrap();
    let cfg: serde_json::Value = serde_json::from_str(header.strip_prefix("# config: ").unwrap()).unwrap();
    assert_eq!(cfg["seed"], 5);
    assert_eq!(cfg["scenario"]["migration"]["ordering"], "simultaneous");
    assert_eq!(
        lines.next().unwrap(),
        "rep,seed,strategy,ordering,channel,src,dst,rate_pps,sent,received,duplicates,lost,loss_pct,max_gap_ms,migration_duration_ms,aborted"
    );
    assert_eq!(lines.count(), 2);
}

#[test]
fn json_output_is_versioned() {
    let (code, out, _) = run(&["run", "--scenario", TWO, "--format", "json", "--reps", "2"]);
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
    assert_eq!(v["rows"][1]["seed"], 2);
}

#[test]
fn missing_scenario_leaves_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.csv");
    let (code, stdout, err) =
        run(&["run", "--scenario", "/nonexistent/x.toml", "--out", out.to_str().unwrap()]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(stdout.is_empty());
    assert!(!out.exists());
    let rec: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(rec["error"], "config");
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn unknown_keys_are_all_listed() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(THREE).unwrap().replace("migrate_at", "migrate_time").replace("hosts = 3", "hosts = 3\nswitch_count = 2");
    let p = write(dir.path(), "bad.toml", &text);
    let (code, _, err) = run(&["run", "--scenario", &p]);
    assert_eq!(code, EXIT_CONFIG);
    let rec: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(rec["keys"], serde_json::json!(["migration.migrate_time", "topology.switch_count"]));
}

#[test]
fn bare_numbers_need_units() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(TWO).unwrap().replace("\"1s\"", "1");
    let p = write(dir.path(), "nounit.toml", &text);
    let (code, _, err) = run(&["run", "--scenario", &p]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("no unit suffix"), "{err}");
}

#[test]
fn bad_flag_values_are_config_errors() {
    let (code, _, err) = run(&["run", "--scenario", TWO, "--ordering", "sideways"]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.starts_with('{'));
    let (code, _, _) = run(&["run", "--scenario", TWO, "--reps", "0"]);
    assert_eq!(code, EXIT_CONFIG);
}

#[test]
fn aborted_migration_has_its_own_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(TWO).unwrap().replace("migrate_at = \"1s\"", "migrate_at = \"1s\"\nloss_probability = 1.0");
    let p = write(dir.path(), "lossy.toml", &text);
    let out = dir.path().join("r.csv");
    let (code, _, err) = run(&["run", "--scenario", &p, "--out", out.to_str().unwrap()]);
    assert_eq!(code, EXIT_ABORT);
    assert!(err.contains("migration-aborted"));
    let csv = std::fs::read_to_string(out).unwrap();
    assert!(csv.lines().skip(2).all(|l| l.ends_with(",true")));
}

#[test]
fn sweep_rejects_empty_values() {
    let (code, _, err) = run(&["sweep", "--scenario", TWO, "--axis", "rate", "--values"]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("\"values\""));
}

#[test]
fn table_size_sweep_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "tables.toml",
        r#"
[topology]
layout = "gateway"
hosts = 2
switches = 1
links = []

[latency]
default = "1ms"

[migration]
channel = "ideal"
migrate_at = "0s"
settle = "0s"
"#,
    );
    let (code, out, err) = run(&["sweep", "--scenario", &p, "--axis", "table-size", "--values", "100,1000,10000"]);
    assert_eq!(code, EXIT_OK, "{err}");
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(out.as_bytes());
    let d: Vec<f64> = rdr.records().map(|r| r.unwrap()[3].parse().unwrap()).collect();
    assert_eq!(d.len(), 3);
    assert!(d.windows(2).all(|w| w[0] <= w[1]), "{d:?}");
    assert!((d[2] - 7000.0).abs() < 700.0);
}

#[test]
fn rate_sweep_has_a_row_per_value_variant_and_direction() {
    let (code, out, _) = run(&["sweep", "--scenario", TWO, "--axis", "rate", "--values", "100pkt/s,200pkt/s", "--reps", "2"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.lines().filter(|l| !l.starts_with('#')).count(), 1 + 2 * 3 * 2);
}

#[test]
fn lag_cdf_and_validate() {
    let (code, out, _) = run(&["lag-cdf", "--channel", "of-message", "--samples", "20", "--seed", "1"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.lines().nth(1), Some("rank,lag_ms,cumulative"));
    assert_eq!(out.lines().count(), 22);
    let (code, out, _) = run(&["validate", "--scenario", THREE]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("\"ok\":true"));
}

#[test]
fn binary_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("{i}.json"));
        let status = Command::new(env!("CARGO_BIN_EXE_vnmig"))
            .args(["run", "--scenario", THREE, "--seed", "21", "--format", "json", "--out"])
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(std::fs::read(out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let status = Command::new(env!("CARGO_BIN_EXE_vnmig")).args(["run", "--scenario", "missing.toml"]).stderr(std::process::Stdio::null()).status().unwrap();
    assert_eq!(status.code(), Some(EXIT_CONFIG));
}
