use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use sdot_cli::commands::{cmd_coverage, cmd_infer, cmd_solve, cmd_validate};
use sdot_cli::config::LoadedConfig;
use sdot_cli::output::{OutputDir, Provenance};
use sdot_cli::CliError;

#[derive(Parser)]
#[command(name = "sdot", version, about = "Semidiscrete optimal transport and inference for the empirical OT map")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Problem configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the optimal dual potentials.
    Solve(Common),
    /// Plug-in estimate, limit laws, bootstrap, confidence sets and band.
    Infer(Common),
    /// Numerical self-checks of derivatives and backends.
    Validate(Common),
    /// Outer Monte Carlo coverage of the confidence set and band.
    CoverageStudy(Common),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, common) = match &cli.command {
        Command::Solve(c) => ("solve", c),
        Command::Infer(c) => ("infer", c),
        Command::Validate(c) => ("validate", c),
        Command::CoverageStudy(c) => ("coverage-study", c),
    };
    if let Some(t) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let cfg = LoadedConfig::from_path(&common.config)?;
    let seed = common.seed.unwrap_or(cfg.config.seed);
    let out = OutputDir::create(
        &common.out,
        Provenance {
            config_sha256: cfg.sha256.clone(),
            seed,
        },
    )?;
    let start = Instant::now();
    match cli.command {
        Command::Solve(_) => cmd_solve(&cfg, &out)?,
        Command::Infer(_) => cmd_infer(&cfg, seed, &out)?,
        Command::Validate(_) => cmd_validate(&cfg, seed, &out)?,
        Command::CoverageStudy(_) => cmd_coverage(&cfg, seed, &out)?,
    }
    eprintln!("{name} finished in {:.3?}", start.elapsed());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
