use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn capdrop(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_capdrop"));
    cmd.args(args).env_remove("CAPDROP_OUT");
    if let Some(dir) = env_out {
        cmd.env("CAPDROP_OUT", dir);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn data_rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn simulate_circle_gives_zero_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sigma0 = 1\nalpha0 = 1\nN = 16\n[simulate]\ndt = 0.01\nt_final = 0.1\nmonitor_every = 1\n");
    let out = dir.path().join("out");
    let res = capdrop(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(text.starts_with("# capdrop "));
    assert!(text.lines().nth(1).unwrap().starts_with("# config_sha256 "));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 11);
    for row in rows {
        assert!(row[1..=32].iter().all(|&v| v == 0.0));
    }
}

#[test]
fn identical_config_and_seed_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sigma0 = 1\nalpha0 = 0.5\nN = 32\nseed = 11\n[simulate]\ndt = 0.01\nt_final = 0.2\ninitial = { kind = \"random\", amplitude = 0.005, lmax = 4, decay = 2.0 }\n",
    );
    let run = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec!["simulate", "--config", &cfg, "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        assert!(capdrop(&args, None).status.success());
        (fs::read(out.join("trajectory.csv")).unwrap(), fs::read(out.join("simulate.json")).unwrap())
    };
    let a = run("a", &[]);
    let b = run("b", &["--threads", "2"]);
    assert_eq!(a, b);
    let c = run("c", &["--seed", "12"]);
    assert_ne!(a.0, c.0);
}

#[test]
fn resonances_report_contains_mode_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sigma0 = 1\nalpha0 = 0\n[resonances]\nkappa = 1\nl_max = 8\n");
    let res = capdrop(&["resonances", "--config", &cfg], Some(dir.path()));
    assert!(res.status.success());
    let doc: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("resonances.json")).unwrap()).unwrap();
    assert_eq!(doc["meta"]["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(doc["meta"]["config_sha256"].as_str().unwrap().len(), 64);
    let entry = doc["report"]["entries"].as_array().unwrap().iter().find(|e| e["l"] == 2).unwrap();
    let want = 1.5f64.sqrt();
    assert!((entry["omega_plus"].as_f64().unwrap() - want).abs() < 1e-12);
    assert!((entry["omega_minus"].as_f64().unwrap() + want).abs() < 1e-12);
}

#[test]
fn stability_at_bond_boundary_has_zero_lambda1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sigma0 = 1\nalpha0 = 2\n[stability]\nl_max = 16\ntruncation = 32\n");
    let out = dir.path().join("s");
    let res = capdrop(&["stability", "--config", &cfg, "--out", out.to_str().unwrap()], Some(dir.path()));
    assert!(res.status.success());
    assert!(!dir.path().join("stability.csv").exists());
    let text = fs::read_to_string(out.join("stability.csv")).unwrap();
    let value = |q: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(&format!("{q},"))).unwrap();
        line.rsplit(',').next().unwrap().parse().unwrap()
    };
    assert_eq!(value("lambda1_zero"), 0.0);
    assert_eq!(value("modified_bond"), 0.25);
    assert!(value("constrained_min") > 0.0);
}

#[test]
fn branch_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sigma0 = 1\nalpha0 = 0\nN = 32\n[branch]\nl = 2\nstart = 1e-3\nstop = 3e-3\npoints = 3\nexport_modes = 2\n",
    );
    let res = capdrop(&["branch", "--config", &cfg, "--out", dir.path().to_str().unwrap()], None);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let rows = data_rows(&fs::read_to_string(dir.path().join("branch.csv")).unwrap());
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[2] <= 1e-10 && r.len() == 16));
    let doc: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("branch.json")).unwrap()).unwrap();
    assert!(doc["stopped"].is_null());
    assert_eq!(doc["points"].as_array().unwrap().len(), 3);
}

#[test]
fn invalid_config_reports_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sigma0 = -1\nalpha0 = 0\n");
    let res = capdrop(&["stability", "--config", &cfg], Some(dir.path()));
    assert!(!res.status.success());
    let err: Value = serde_json::from_str(String::from_utf8(res.stderr).unwrap().trim()).unwrap();
    assert_eq!(err["error"]["kind"], "config");
    assert!(err["error"]["message"].as_str().unwrap().contains("sigma0"));

    let cfg = write_config(dir.path(), "sigma0 = 1\nalpha0 = 0\nfoo = 2\n");
    let res = capdrop(&["stability", "--config", &cfg], Some(dir.path()));
    assert!(!res.status.success());
    assert!(String::from_utf8(res.stderr).unwrap().contains("line 3"));

    let res = capdrop(&["stability"], Some(dir.path()));
    assert!(!res.status.success());
}

#[test]
fn selftest_single_criterion() {
    let res = capdrop(&["selftest", "5", "9"], None);
    assert!(res.status.success());
    let text = String::from_utf8(res.stdout).unwrap();
    assert!(text.contains("PASS [05]") && text.contains("PASS [09]"), "{text}");
}
