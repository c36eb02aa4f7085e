use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use capdrop::cli::{error_json, resolve_out_dir, run, run_selftest, Command, OUT_DIR_ENV};
use capdrop::config::parse_config;
use capdrop::{Error, Result};

/// Capillary drop with constant vorticity: simulation, resonances, rotating waves and stability.
#[derive(Parser)]
#[command(name = "capdrop", version)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the environment and the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Random seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate the flow and write trajectory.csv.
    Simulate,
    /// Resonance table as resonances.json.
    Resonances,
    /// Rotating-wave continuation as branch.csv and branch.json.
    Branch,
    /// Hessian, coercivity and linear spectrum as stability.csv and stability.json.
    Stability,
    /// Run the acceptance checks.
    Selftest {
        /// Criterion ids to run; all when omitted.
        ids: Vec<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::from(2)
        }
    }
}

fn execute(cli: Cli) -> Result<ExitCode> {
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Error::Config(format!("threads: {e}")))?;
    }
    let command = match cli.command {
        Cmd::Selftest { ids } => {
            let results = run_selftest(&ids, &mut std::io::stdout())?;
            let failed = results.iter().filter(|r| !r.passed).count();
            println!("{} passed, {failed} failed", results.len() - failed);
            return Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE });
        }
        Cmd::Simulate => Command::Simulate,
        Cmd::Resonances => Command::Resonances,
        Cmd::Branch => Command::Branch,
        Cmd::Stability => Command::Stability,
    };
    let path = cli.config.ok_or_else(|| Error::Config("--config is required for this command".into()))?;
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = parse_config(&text)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.validate()?;
    }
    let env = std::env::var(OUT_DIR_ENV).ok();
    let out_dir = resolve_out_dir(cli.out.as_deref(), env.as_deref(), &cfg);
    let outcome = run(command, &cfg, &out_dir)?;
    for f in &outcome.files {
        println!("{}", f.display());
    }
    match outcome.failure {
        None => Ok(ExitCode::SUCCESS),
        Some(e) => {
            eprintln!("{}", error_json(&e));
            Ok(ExitCode::from(3))
        }
    }
}
