use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use sft_core::experiment::{self, ExperimentConfig, Format};

/// Sparse Fourier transform experiments.
#[derive(Parser)]
#[command(name = "sft", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Base seed (trial i uses seed + i).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// jsonl or csv.
        #[arg(long)]
        format: Option<String>,
        /// Output file; defaults to the config's `output`, then
        /// $SFT_OUTPUT_DIR/<experiment>.<ext>, then stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, env = "SFT_OUTPUT_DIR", hide_env_values = true)]
        output_dir: Option<PathBuf>,
    },
    /// List registered experiments.
    List,
    /// Re-check the payload invariants of a json-lines result file.
    Verify { rows: PathBuf },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, seed, trials, format, out, output_dir } => {
            let mut cfg = ExperimentConfig::from_file(&config)
                .with_context(|| format!("reading config {}", config.display()))?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = trials {
                anyhow::ensure!(t >= 1, "--trials must be at least 1");
                cfg.trials = t;
            }
            if let Some(f) = format {
                cfg.format = f.parse::<Format>()?;
            }
            let rows = experiment::run_experiment(&cfg)?;
            let path = experiment::output_path(&cfg, out.as_deref(), output_dir.as_deref());
            experiment::emit(&rows, cfg.format, path.as_deref())?;
            let ok = rows.iter().filter(|r| r.success).count();
            eprintln!("{}: {ok}/{} rows succeeded", cfg.experiment, rows.len());
            Ok(true)
        }
        Command::List => {
            for e in experiment::experiments() {
                println!("{:<24} criterion {:>2}  {}", e.name, e.criterion, e.summary);
            }
            Ok(true)
        }
        Command::Verify { rows } => {
            let text = std::fs::read_to_string(&rows).with_context(|| format!("reading {}", rows.display()))?;
            let parsed = experiment::read_rows(&text)?;
            let rep = experiment::verify_rows(&parsed);
            for (line, why) in &rep.failures {
                println!("row {line}: {why}");
            }
            println!("{} rows, {} failed", rep.rows, rep.failures.len());
            Ok(rep.ok())
        }
    }
}
