//! `shaped-photon`: spectroscopy sweeps, pulse design, emission, tomography
//! and network scaling from one JSON configuration.

mod commands;
mod config;
mod output;
mod svg;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use commands::Ctx;
use config::RunConfig;

#[derive(Parser)]
#[command(name = "shaped-photon", version, about)]
struct Cli {
    /// JSON run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Tomography seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps and tomography (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Square-pulse sweep over drive amplitude and frequency.
    Spectroscopy,
    /// Calibration tables, shaped drives and phase correction per target.
    Design,
    /// Simulate the designed drives and record the emitted photons.
    Emit,
    /// Homodyne tomography of the emitted photonic qubits.
    Tomography,
    /// Matching probability and tolerable spread versus tuning range.
    Scaling,
    /// Overlap of detuned fixed-frequency modes.
    Overlap,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker pool")?;
    }
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    if let Some(seed) = cli.seed {
        cfg.tomography.seed = seed;
    }
    let ctx = Ctx::new(cfg.resolve()?);
    match cli.command {
        Command::Spectroscopy => commands::spectroscopy::run(&ctx),
        Command::Design => commands::design::run(&ctx),
        Command::Emit => commands::emit::run(&ctx),
        Command::Tomography => commands::tomography::run(&ctx),
        Command::Scaling => commands::network::scaling(&ctx),
        Command::Overlap => commands::network::overlap(&ctx),
    }
}
