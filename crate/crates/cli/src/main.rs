use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rnsa::config::{parse_config, RunConfig};
use rnsa::dispatch::{run_command, CommandKind};

#[derive(Parser)]
#[command(name = "rnsa", version, about = "Rotating filtered Navier-Stokes toolkit", long_about = None)]
struct Cli {
    /// TOML configuration file; every key has a documented default
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides output.dir)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for parallel sections; 0 picks the machine default
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// RNG seed (overrides output.seed)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Suppress the per-file and summary lines on stdout
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the full rotating filtered system
    Simulate,
    /// Integrate the resonant limit system on the catalytic channels
    LimitSim,
    /// Enumerate resonant triads and the small-divisor histogram
    Resonances,
    /// Evaluate the attractor dimension bound chain
    Bounds,
    /// Run a comparison experiment (filter sweep or averaging decay)
    Compare,
    /// Check the spectral identities on random fields
    Verify,
}

impl Command {
    fn kind(&self) -> CommandKind {
        match self {
            Command::Simulate => CommandKind::Simulate,
            Command::LimitSim => CommandKind::LimitSim,
            Command::Resonances => CommandKind::Resonances,
            Command::Bounds => CommandKind::Bounds,
            Command::Compare => CommandKind::Compare,
            Command::Verify => CommandKind::Verify,
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, String> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let raw = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            parse_config(&raw).map_err(|e| e.to_string())?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.output.seed = seed;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: cannot size the thread pool: {e}");
            return ExitCode::from(2);
        }
    }

    let cfg = match load_config(&cli) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };

    let out_dir = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output.dir));

    match run_command(cli.command.kind(), &cfg, &out_dir) {
        Ok(artifacts) => {
            if !cli.quiet {
                for line in &artifacts.summary {
                    println!("{line}");
                }
                for file in &artifacts.files {
                    println!("wrote {}", file.display());
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
