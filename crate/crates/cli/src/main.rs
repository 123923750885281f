//! `orchard`: batch front end for generating, scanning and scoring orchard
//! panel datasets from one config file.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser)]
#[command(name = "orchard", version, about = "Deterministic orchard panel simulator")]
struct Cli {
    /// Pipeline config file (TOML).
    #[arg(long, short, global = true, default_value = "orchard.toml")]
    config: PathBuf,
    /// Worker threads; 0 uses every core. Outputs do not depend on it.
    #[arg(long, short, global = true, default_value_t = 0)]
    jobs: usize,
    /// Overrides `master_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `output_dir` (relative to the working directory).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the base trunk/branch library.
    GenBase,
    /// Generate the tree pool from the library.
    GenTrees,
    /// Assemble panels from the tree pool and sample surface clouds.
    GenPanels,
    /// Scan every panel once per configured scanner resolution.
    Scan,
    /// Voxelize every panel cloud present.
    Voxelize,
    /// Score prediction files against one dataset.
    Eval,
    /// Print dataset statistics and scan hit rates.
    Stats,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let loaded = config::load(&cli.config, cli.seed, cli.output_dir.as_deref())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::GenBase => commands::gen_base(&loaded),
        Command::GenTrees => commands::gen_trees(&loaded),
        Command::GenPanels => commands::gen_panels(&loaded),
        Command::Scan => commands::scan(&loaded),
        Command::Voxelize => commands::voxelize_cmd(&loaded),
        Command::Eval => commands::eval(&loaded).map(|text| print!("{text}")),
        Command::Stats => commands::stats(&loaded).map(|text| print!("{text}")),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.category.exit_code() as u8)
        }
    }
}
