use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dmaloc::config::parse_config;
use dmaloc::experiments::{run, RunOptions};
use dmaloc::DmaError;

#[derive(Parser)]
#[command(name = "dmaloc", version, about = "DMA near-field localization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, env = "DMALOC_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Truncation error of the coupling inverse versus approximation order.
    ApproxError(Common),
    /// One combiner design at the configured user position.
    Design(Common),
    /// Position error bound versus number of RF chains.
    PebSweep(Common),
    /// Monte Carlo RMSE versus pilot power.
    RmseCurve(Common),
}

fn execute(cli: Cli) -> Result<String, DmaError> {
    let (kind, args) = match &cli.command {
        Command::ApproxError(a) => ("approx-error", a),
        Command::Design(a) => ("design", a),
        Command::PebSweep(a) => ("peb-sweep", a),
        Command::RmseCurve(a) => ("rmse-curve", a),
    };
    let text = std::fs::read_to_string(&args.config).map_err(|e| DmaError::Io {
        path: args.config.display().to_string(),
        reason: e.to_string(),
    })?;
    let cfg = parse_config(&text)?;
    if cfg.experiment.kind() != kind {
        return Err(DmaError::Config {
            key: "experiment.kind".into(),
            reason: format!("config is `{}` but subcommand is `{kind}`", cfg.experiment.kind()),
        });
    }
    let manifest = run(
        &cfg,
        &RunOptions {
            seed: args.seed,
            out: args.out.clone(),
            threads: args.threads,
        },
    )?;
    let out = &manifest.outputs[0];
    Ok(format!("{} {} rows sha256={}", out.file, out.rows, out.sha256))
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            // one line, tab-separated: kind, message
            let kind = match &e {
                DmaError::Config { .. } => "config",
                DmaError::Io { .. } => "io",
                _ => "model",
            };
            eprintln!("error\t{kind}\t{}", e.to_string().replace(['\n', '\t'], " "));
            ExitCode::FAILURE
        }
    }
}
