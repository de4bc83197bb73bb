use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use inflap::commands::{self, Outcome};
use inflap::config::{ExperimentConfig, RawConfig};
use inflap_core::Error;

#[derive(Parser)]
#[command(name = "inflap", version, about = "Singularly perturbed infinity-Laplacian experiments")]
struct Cli {
    /// Experiment configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Sampling seed; overrides `geometry.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the Dirichlet problem once.
    Solve,
    /// Continuation along the eps schedule.
    Continuation,
    /// Measure the geometry of a saved field.
    Geometry {
        /// Snapshot to measure; overrides `geometry.snapshot`.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Compare the radial barrier with its closed forms.
    BarrierCheck,
    /// Integrate the one-dimensional profile.
    Oned,
    /// Run the built-in checks with known answers.
    Selftest,
}

const CONFIG_ERROR: u8 = 2;
const ASSERTION_FAILED: u8 = 1;

fn threads() -> Result<Option<usize>, String> {
    match std::env::var("INFLAP_THREADS") {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(format!("INFLAP_THREADS must be a positive integer, got `{s}`")),
        },
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, String> {
    let raw = match &cli.config {
        Some(p) => RawConfig::load(p),
        None => RawConfig::parse(""),
    }
    .map_err(|e| e.to_string())?;
    let mut cfg = ExperimentConfig::from_raw(&raw).map_err(|e| e.to_string())?;
    if let Some(seed) = cli.seed {
        cfg.continuation.geometry.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn run(cli: &Cli, cfg: &ExperimentConfig) -> inflap_core::Result<Outcome> {
    let dir = cfg.out_dir.as_path();
    commands::ensure_dir(dir)?;
    match &cli.cmd {
        Cmd::Solve => commands::solve(cfg, dir),
        Cmd::Continuation => commands::continuation(cfg, dir),
        Cmd::Geometry { snapshot } => {
            let path = snapshot
                .clone()
                .or_else(|| cfg.snapshot.clone())
                .ok_or_else(|| Error::Parameter("geometry needs --snapshot or geometry.snapshot".into()))?;
            commands::geometry(cfg, dir, &path)
        }
        Cmd::BarrierCheck => commands::barrier_check(cfg, dir),
        Cmd::Oned => commands::oned(cfg, dir),
        Cmd::Selftest => commands::selftest(dir),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match threads().and_then(|t| {
        if let Some(n) = t {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
        }
        load(&cli)
    }) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    let out = match run(&cli, &cfg) {
        Ok(o) => o,
        Err(e @ (Error::Parameter(_) | Error::Grid(_))) => {
            eprintln!("config error: {e}");
            return ExitCode::from(CONFIG_ERROR);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(ASSERTION_FAILED);
        }
    };
    for line in &out.summary {
        println!("{line}");
    }
    for p in &out.artifacts {
        println!("wrote {}", p.display());
    }
    let enforce = cfg.assert || matches!(cli.cmd, Cmd::Selftest);
    if enforce && !out.failures.is_empty() {
        eprint!("{}", out.failure_table());
        return ExitCode::from(ASSERTION_FAILED);
    }
    ExitCode::SUCCESS
}
