use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use dipole_bounds_cli::config::{parse_config, PRESETS};
use dipole_bounds_cli::run::{execute, Subcommand};
use dipole_bounds_cli::CliError;

const THREADS_VAR: &str = "DIPOLE_BOUNDS_THREADS";

/// Cramér–Rao and quantum Fisher-information bounds for a dipole scatterer.
#[derive(Debug, Parser)]
#[command(name = "dipole-bounds", version)]
struct Args {
    /// crb-scan, qfi-time, size-scan, farfield or validate.
    subcommand: String,
    /// JSON document layered over the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// fig2, fig3, fig3-12.6, hemisphere or size.
    #[arg(long, default_value = "fig2")]
    preset: String,
    /// Override a single key, e.g. `--set detector.refinement=3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Output directory; defaults to `run.out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Validation level for `validate`: quick or full.
    #[arg(long)]
    level: Option<String>,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_VAR) else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Resource(format!("{THREADS_VAR} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Resource(format!("thread pool: {e}")))
}

fn run(args: Args) -> Result<(), CliError> {
    let sub = Subcommand::parse(&args.subcommand).ok_or_else(|| {
        let names: Vec<_> = Subcommand::ALL.iter().map(|s| s.name()).collect();
        CliError::Schema(format!("unknown subcommand `{}`; expected one of {}", args.subcommand, names.join(", ")))
    })?;
    if !PRESETS.contains(&args.preset.as_str()) {
        return Err(CliError::Schema(format!(
            "unknown preset `{}`; expected one of {}",
            args.preset,
            PRESETS.join(", ")
        )));
    }
    let mut sets = args.sets;
    if let Some(level) = args.level {
        sets.push(format!("run.level=\"{level}\""));
    }
    let cfg = parse_config(args.config.as_deref(), &args.preset, &sets)?;
    init_threads()?;
    let out = args.out.unwrap_or_else(|| PathBuf::from(&cfg.run.out_dir));
    execute(sub, &cfg, &out)?;
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
