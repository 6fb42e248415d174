use std::path::Path;
use std::process::{Command, Output};

use edwards::experiments::SuiteReport;
use serde_json::Value;

fn edwards(args: &[&str], out_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_edwards"));
    cmd.args(args).env_remove("EDWARDS_OUT_DIR");
    if let Some(d) = out_dir {
        cmd.env("EDWARDS_OUT_DIR", d);
    }
    cmd.output().expect("binary runs")
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn spectrum_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spectrum.csv");
    let out = edwards(
        &["spectrum", "--x-max", "20", "--h", "0.001", "--n-eig", "8", "--out", path.to_str().unwrap()],
        None,
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("# version: "));
    assert!(text.contains("# seed: 1"));
    let lines = data_lines(&text);
    assert_eq!(lines[0], "n,rho");
    assert_eq!(lines.len(), 9);
    let rho: Vec<f64> = lines[1..].iter().map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(rho[0] > 2.18 && rho[0] < 2.19);
    assert!(rho.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn kernel_output_is_byte_identical_across_runs() {
    let args = ["kernel", "--op", "K", "--l", "1", "--mu", "0", "--v", "1", "--n", "100000", "--seed", "3"];
    let a = edwards(&args, None);
    let b = edwards(&args, None);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let doc: Value = serde_json::from_slice(&a.stdout).unwrap();
    let keys: Vec<&String> = doc["records"][0].as_object().unwrap().keys().collect();
    assert_eq!(keys, ["op", "params", "mean", "stderr", "n", "seed"]);
    assert_eq!(doc["meta"]["seed"], 3);
    assert_eq!(doc["records"][0]["n"], 100000);
}

#[test]
fn verify_emits_report_and_exit_code() {
    let ok = edwards(&["verify", "airy"], None);
    assert_eq!(ok.status.code(), Some(0));
    let report: SuiteReport = serde_json::from_slice(&ok.stdout).unwrap();
    assert!(report.pass);
    assert_eq!(report.pass, report.checks.iter().all(|c| c.pass));
    let doc: Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert!(doc.get("wall_time_s").is_none());

    // B(6) is about 3% of J_1(6), above the 1% the suite asks for
    let bad = edwards(&["verify", "prop84", "--n", "1000"], None);
    assert_eq!(bad.status.code(), Some(1), "{}", String::from_utf8_lossy(&bad.stderr));
    let report: SuiteReport = serde_json::from_slice(&bad.stdout).unwrap();
    assert!(!report.pass);
}

#[test]
fn usage_and_validation_errors_exit_2() {
    for args in [
        &["spectrum", "--bogus"][..],
        &["frobnicate"],
        &["kernel"],
        &["kernel", "--op", "K", "--n", "-5"],
        &["kernel", "--op", "K", "--v", "-1"],
        &["kernel", "--op", "K", "--n", "10"],
        &["density", "--op", "ds", "--s", "2", "--t", "1"],
        &["verify", "nope"],
    ] {
        let out = edwards(args, None);
        assert_eq!(out.status.code(), Some(2), "edwards {args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let target = blocker.join("spectrum.csv");
    let out = edwards(&["spectrum", "--n-eig", "2", "--out", target.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(3));
    let missing = dir.path().join("absent.conf");
    let out = edwards(&["spectrum", "--config", missing.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn config_file_merges_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "# manifest\nseed = 9\nl = 2  # level\nv = 0.5\nformat = csv\n").unwrap();
    let out = edwards(&["kernel", "--op", "alpha", "--config", conf.to_str().unwrap(), "--v", "1"], None);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("# seed: 9"));
    let lines = data_lines(&text);
    assert_eq!(lines[0], "op,l,v,mean,stderr,n,seed");
    let cells: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(cells[1].parse::<f64>().unwrap(), 2.0);
    assert_eq!(cells[2].parse::<f64>().unwrap(), 1.0);
    let alpha = 2.0 / (8.0 * std::f64::consts::PI).sqrt() * (-0.5f64).exp();
    assert_eq!(cells[3].parse::<f64>().unwrap(), alpha);

    std::fs::write(&conf, "gamma = 1\n").unwrap();
    let out = edwards(&["spectrum", "--config", conf.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = edwards(&["density", "--op", "d1", "--x", "0.5,1,2"], Some(dir.path()));
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(dir.path().join("density.csv")).unwrap();
    let lines = data_lines(&text);
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], "x,density");
}

#[test]
fn csv_and_json_carry_the_same_bits() {
    let args = ["sample", "--process", "besq2", "--l", "0.5", "--t", "1", "--dy", "0.125", "--seed", "4"];
    let csv = edwards(&args, None);
    let json = edwards(&[&args[..], &["--format", "json"]].concat(), None);
    let text = String::from_utf8(csv.stdout).unwrap();
    let doc: Value = serde_json::from_slice(&json.stdout).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    let lines = data_lines(&text);
    assert_eq!(lines.len(), rows.len() + 1);
    for (line, row) in lines[1..].iter().zip(rows) {
        let v: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(v.to_bits(), row[1].as_f64().unwrap().to_bits());
    }
    assert_eq!(doc["meta"]["params"]["process"], "besq2");
}
