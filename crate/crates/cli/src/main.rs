//! `fdcell`: single-cell full-duplex network simulator front end.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fdcell_cli::{run_preset, run_single, PresetOptions, RunManifest, RunOptions};

#[derive(Parser)]
#[command(name = "fdcell", version, about = "Single-cell full-duplex network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write metrics.json, summary.csv, and a
    /// manifest.
    Run {
        /// TOML configuration file; omit for the built-in defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Drop count override.
        #[arg(long)]
        drops: Option<usize>,
        /// Slots per drop override.
        #[arg(long)]
        slots: Option<usize>,
        /// Output directory (created if missing).
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Run a bundled experiment preset: fig2, gains, or asymmetry.
    Preset {
        /// Preset name.
        name: String,
        /// Master seed (default 1).
        #[arg(long)]
        seed: Option<u64>,
        /// Drops per cell; for fig2, the number of sampled pairings
        /// (default 200).
        #[arg(long)]
        drops: Option<usize>,
        /// Slots per drop (default 2000; unused by fig2).
        #[arg(long)]
        slots: Option<usize>,
        /// Output directory (created if missing).
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, drops, slots, out_dir } => {
            run_single(&RunOptions { config, out_dir, seed, drops, slots })
        }
        Command::Preset { name, seed, drops, slots, out_dir } => {
            let mut opts = PresetOptions { out_dir, ..PresetOptions::default() };
            if let Some(seed) = seed {
                opts.seed = seed;
            }
            if let Some(drops) = drops {
                opts.drops = drops;
            }
            if let Some(slots) = slots {
                opts.slots = slots;
            }
            run_preset(&name, &opts)
        }
    };
    match result {
        Ok(manifest) => {
            report(&manifest);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn report(manifest: &RunManifest) {
    for out in &manifest.outputs {
        println!("wrote {}", out.path);
    }
    println!("wrote manifest.json (seed {})", manifest.master_seed);
}
