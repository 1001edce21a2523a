use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use seplab::config::ExperimentConfig;
use seplab::output::Sink;
use seplab::{commands, criteria, CliError};

/// Default verification manifest, shipped with the binary.
const DEFAULT_MANIFEST: &str = include_str!("../configs/verify.toml");

#[derive(Parser, Debug)]
#[command(name = "seplab", version, about = "Exclusion-process edge statistics experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment configuration (`verify` falls back to the shipped manifest).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Omit the generation-time header line.
    #[arg(long, global = true)]
    no_timestamp: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Replicate samples and Gumbel tables per horizon.
    Simulate,
    /// Exact and asymptotic mean tables.
    Theory,
    /// Acceptance criteria; exit 3 on any failure.
    Verify,
    /// Distance to the limit law along the t-grid.
    Sweep,
    /// ASEP with drift into the step against its stationary law.
    Asep,
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let mut config = match (&cli.config, cli.command) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Command::Verify) => ExperimentConfig::from_toml(DEFAULT_MANIFEST)?,
        (None, _) => return Err(CliError::ConfigInvalid("--config is required".into())),
    };
    if let Some(seed) = cli.seed {
        config.simulation.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output.dir = out.clone();
    }
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::ConfigInvalid(format!("workers: {e}")))?;
    }
    let exp = config.validate()?;
    let sink = Sink::new(&exp.config.output.dir, !cli.no_timestamp, exp.hash())?;
    let paths = match cli.command {
        Command::Simulate => commands::simulate(&exp, &sink)?,
        Command::Theory => commands::theory(&exp, &sink)?,
        Command::Sweep => commands::sweep(&exp, &sink)?,
        Command::Asep => commands::asep(&exp, &sink)?,
        Command::Verify => {
            let (results, path) = commands::verify(&exp, &sink)?;
            eprintln!("wrote {}", path.display());
            let failed = results.iter().filter(|r| !r.pass).count();
            if !criteria::all_pass(&results) {
                return Err(CliError::VerificationFailed {
                    failed,
                    total: results.len(),
                });
            }
            return Ok(());
        }
    };
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
