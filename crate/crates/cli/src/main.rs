use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use memrate_cli::{execute, list_recipes, load_config, recipe, RunOptions};

/// Information-rate bounds for finite-state channels.
#[derive(Parser)]
#[command(name = "memrate", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment from a config file or a bundled recipe name.
    Run {
        config: String,
        /// Master seed, replacing run.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: MEMRATE_THREADS, else all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Exit with status 3 if any numeric warning was raised.
        #[arg(long)]
        strict: bool,
        /// Validate and print the resolved plan without running anything.
        #[arg(long)]
        dry_run: bool,
        /// Output directory, replacing output.dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the bundled recipes.
    Recipes,
    /// Print a bundled recipe.
    Show { name: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Recipes => {
            for r in list_recipes() {
                println!("{r}");
            }
            ExitCode::SUCCESS
        }
        Cmd::Show { name } => match recipe(&name) {
            Some(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("no recipe named '{name}'");
                ExitCode::from(2)
            }
        },
        Cmd::Run { config, seed, threads, strict, dry_run, out } => {
            let opts = RunOptions { seed, threads, strict, dry_run, out };
            match load_config(&config).and_then(|cfg| execute(cfg, &opts)) {
                Ok(o) => {
                    for l in &o.lines {
                        println!("{l}");
                    }
                    for w in &o.warnings {
                        eprintln!("warning: {w}");
                    }
                    ExitCode::from(o.exit_code(strict) as u8)
                }
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
    }
}
