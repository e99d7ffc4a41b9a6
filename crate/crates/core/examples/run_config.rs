//! Run a TOML experiment file in-process, as the CLI does.
//!
//! `cargo run --example run_config -- configs/design.toml [out-dir]`

use dmaloc::config::parse_config;
use dmaloc::experiments::{run, RunOptions};

fn main() -> dmaloc::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "configs/design.toml".into());
    let text = std::fs::read_to_string(&path).map_err(|e| dmaloc::DmaError::Io {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    let cfg = parse_config(&text)?;
    let manifest = run(
        &cfg,
        &RunOptions {
            out: args.next().map(Into::into),
            ..RunOptions::default()
        },
    )?;
    println!("{} seed={} {:.2}s", manifest.experiment, manifest.seed, manifest.wall_seconds);
    for o in &manifest.outputs {
        println!("  {} {} rows {} bytes sha256={}", o.file, o.rows, o.bytes, o.sha256);
    }
    Ok(())
}
