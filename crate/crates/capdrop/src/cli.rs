//! Command execution and artifact writing.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::dynamics::{simulate, write_trajectory_csv};
use crate::error::{Error, Result};
use crate::linear::{constrained_coercivity, hessian_spectrum, linear_spectrum, resonance_report};
use crate::selftest::{run_all, run_criterion, CriterionResult};
use crate::waves::{continue_branch, write_branch_csv, BranchPointRecord};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable overriding the configured output directory.
pub const OUT_DIR_ENV: &str = "CAPDROP_OUT";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Resonances,
    Branch,
    Stability,
}

/// Files written by a command and an optional failure found after writing them.
#[derive(Debug)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub failure: Option<Error>,
}

#[derive(Serialize)]
struct Meta<'a> {
    tool: &'static str,
    version: &'static str,
    config_sha256: String,
    command: &'a str,
    seed: u64,
    config: &'a RunConfig,
}

fn meta<'a>(cfg: &'a RunConfig, command: &'a str) -> Result<Meta<'a>> {
    Ok(Meta { tool: "capdrop", version: VERSION, config_sha256: cfg.hash()?, command, seed: cfg.seed, config: cfg })
}

/// Output directory: explicit flag, then environment, then config, then ".".
pub fn resolve_out_dir(flag: Option<&Path>, env: Option<&str>, cfg: &RunConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| env.filter(|s| !s.is_empty()).map(PathBuf::from))
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn csv_preamble(cfg: &RunConfig) -> Result<Vec<u8>> {
    Ok(format!("# capdrop {VERSION}\n# config_sha256 {}\n", cfg.hash()?).into_bytes())
}

fn write_file(dir: &Path, name: &str, bytes: &[u8], files: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes)?;
    files.push(path);
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| Error::Serialize(e.to_string()))?;
    v.push(b'\n');
    Ok(v)
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn run(command: Command, cfg: &RunConfig, out_dir: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let mut files = vec![];
    let failure = match command {
        Command::Simulate => run_simulate(cfg, out_dir, &mut files)?,
        Command::Resonances => run_resonances(cfg, out_dir, &mut files)?,
        Command::Branch => run_branch(cfg, out_dir, &mut files)?,
        Command::Stability => run_stability(cfg, out_dir, &mut files)?,
    };
    Ok(RunOutcome { files, failure })
}

fn run_simulate(cfg: &RunConfig, dir: &Path, files: &mut Vec<PathBuf>) -> Result<Option<Error>> {
    let model = cfg.model();
    let w0 = cfg.initial_state()?;
    let tr = simulate(&w0, &model, &cfg.integrator())?;
    let mut buf = csv_preamble(cfg)?;
    write_trajectory_csv(&tr, &mut buf)?;
    write_file(dir, "trajectory.csv", &buf, files)?;
    let last = tr.last();
    let summary = json!({
        "meta": meta(cfg, "simulate")?,
        "t_end": last.t,
        "aborted": tr.aborted,
        "initial": tr.points[0].conserved,
        "final": last.conserved,
    });
    write_file(dir, "simulate.json", &to_json(&summary)?, files)?;
    let t_end = last.t;
    Ok(tr.aborted.clone().map(|reason| Error::StepRejected { t: t_end, reason }))
}

fn run_resonances(cfg: &RunConfig, dir: &Path, files: &mut Vec<PathBuf>) -> Result<Option<Error>> {
    let report = resonance_report(&cfg.params(), cfg.resonances.kappa, cfg.resonances.l_max)?;
    let doc = json!({ "meta": meta(cfg, "resonances")?, "report": report });
    write_file(dir, "resonances.json", &to_json(&doc)?, files)?;
    Ok(None)
}

fn run_branch(cfg: &RunConfig, dir: &Path, files: &mut Vec<PathBuf>) -> Result<Option<Error>> {
    let branch = continue_branch(&cfg.continuation(), &cfg.model(), &cfg.grid()?)?;
    let mut buf = csv_preamble(cfg)?;
    write_branch_csv(&branch, cfg.branch.export_modes, &mut buf)?;
    write_file(dir, "branch.csv", &buf, files)?;
    let points: Vec<BranchPointRecord> = branch.points.iter().map(BranchPointRecord::from).collect();
    let doc = json!({
        "meta": meta(cfg, "branch")?,
        "continuation": cfg.continuation(),
        "stopped": branch.stopped,
        "points": points,
    });
    write_file(dir, "branch.json", &to_json(&doc)?, files)?;
    Ok(branch.stopped.map(Error::BranchStopped))
}

fn run_stability(cfg: &RunConfig, dir: &Path, files: &mut Vec<PathBuf>) -> Result<Option<Error>> {
    let p = cfg.params();
    let hs = hessian_spectrum(&p, cfg.stability.l_max);
    let coer = constrained_coercivity(&p, cfg.stability.truncation)?;
    let spectrum = linear_spectrum(&p, cfg.stability.l_max)?;

    let mut rows: Vec<(String, String, String)> = vec![];
    let mut scalar = |q: &str, v: f64| rows.push((q.into(), String::new(), num(v)));
    scalar("sigma0", p.sigma0);
    scalar("alpha0", p.alpha0);
    scalar("modified_bond", hs.modified_bond.unwrap_or(f64::INFINITY));
    scalar("lambda1_zero", hs.lambda1_zero);
    scalar("lambda2_zero", hs.lambda2_zero);
    scalar("unconstrained_min", coer.unconstrained_min);
    scalar("constrained_min", coer.constrained_min);
    scalar("lambda_minus_2", coer.lambda_minus_2);
    scalar("lambda_plus_2", coer.lambda_plus_2);
    scalar("has_negative_direction", f64::from(u8::from(coer.has_negative_direction)));
    scalar("coercive", f64::from(u8::from(coer.coercive)));
    for e in &hs.entries {
        for (q, v) in [
            ("hessian_lambda_minus", e.lambda_minus),
            ("hessian_lambda_plus", e.lambda_plus),
            ("hessian_det", e.det),
            ("closed_form_lambda_minus", e.closed_form_lambda_minus),
            ("closed_form_lambda_plus", e.closed_form_lambda_plus),
        ] {
            rows.push((q.into(), e.l.to_string(), num(v)));
        }
    }
    for e in &spectrum {
        for (q, v) in [
            ("lambda_sq_block", e.lambda_sq_block),
            ("lambda_sq_expanded", e.lambda_sq_expanded),
            ("lambda_sq_compact", e.lambda_sq_compact),
            ("discrepancy_expanded", e.discrepancy_expanded()),
            ("discrepancy_compact", e.discrepancy_compact()),
            ("max_real_part", e.max_real_part()),
        ] {
            rows.push((q.into(), e.l.to_string(), num(v)));
        }
    }
    let mut buf = csv_preamble(cfg)?;
    {
        let mut wr = csv::Writer::from_writer(&mut buf);
        let csv_err = |e: csv::Error| Error::Serialize(e.to_string());
        wr.write_record(["quantity", "l", "value"]).map_err(csv_err)?;
        for r in &rows {
            wr.write_record([&r.0, &r.1, &r.2]).map_err(csv_err)?;
        }
        wr.flush()?;
    }
    write_file(dir, "stability.csv", &buf, files)?;
    let doc = json!({
        "meta": meta(cfg, "stability")?,
        "hessian": hs,
        "coercivity": coer,
        "spectrum": spectrum,
    });
    write_file(dir, "stability.json", &to_json(&doc)?, files)?;
    Ok(None)
}

/// Runs the acceptance checks, printing one line each.
pub fn run_selftest(ids: &[usize], out: &mut impl Write) -> Result<Vec<CriterionResult>> {
    let results = if ids.is_empty() { run_all() } else { ids.iter().map(|&i| run_criterion(i)).collect() };
    for r in &results {
        writeln!(out, "{r}")?;
    }
    Ok(results)
}

/// Machine-readable error document.
pub fn error_json(err: &Error) -> String {
    json!({ "error": { "kind": err.kind(), "message": err.to_string() } }).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn out_dir_precedence() {
        let mut cfg = parse_config("sigma0 = 1\nalpha0 = 0\n").unwrap();
        assert_eq!(resolve_out_dir(None, None, &cfg), PathBuf::from("."));
        cfg.out_dir = Some("cfg".into());
        assert_eq!(resolve_out_dir(None, None, &cfg), PathBuf::from("cfg"));
        assert_eq!(resolve_out_dir(None, Some("env"), &cfg), PathBuf::from("env"));
        assert_eq!(resolve_out_dir(Some(Path::new("flag")), Some("env"), &cfg), PathBuf::from("flag"));
    }

    #[test]
    fn stability_at_bond_boundary() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config("sigma0 = 1\nalpha0 = 2\nN = 32\n[stability]\nl_max = 8\ntruncation = 32\n").unwrap();
        let out = run(Command::Stability, &cfg, dir.path()).unwrap();
        assert!(out.failure.is_none());
        let text = fs::read_to_string(dir.path().join("stability.csv")).unwrap();
        assert!(text.starts_with("# capdrop"));
        assert!(text.lines().any(|l| l == "lambda1_zero,,0.0000000000000000e0"), "{text}");
        assert!(text.lines().any(|l| l.starts_with("modified_bond,,2.5")));
    }

    #[test]
    fn error_document_is_json() {
        let v: serde_json::Value = serde_json::from_str(&error_json(&Error::Config("sigma0: bad".into()))).unwrap();
        assert_eq!(v["error"]["kind"], "config");
    }
}
