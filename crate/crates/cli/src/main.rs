use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use netembed::pipeline::{self, PipelineError, RunConfig};

#[derive(Parser)]
#[command(name = "netembed", version, about = "Sparsified NetMF network embedding")]
struct Cli {
    /// Worker threads (overrides LIGHTNE_THREADS and the config).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a text edge list to the binary graph format.
    Convert {
        input: PathBuf,
        output: PathBuf,
        /// Store block-compressed adjacency.
        #[arg(long)]
        compress: bool,
    },
    /// Build the embedding described by the config.
    Embed,
    /// Score an embedding on the config's task.
    Eval { embedding: PathBuf },
    /// Search hyperparameters on the config's task.
    Tune {
        #[arg(long, default_value_t = 20)]
        budget: usize,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli.config.as_deref().context("--config is required for this command")?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.params.seed = seed;
    }
    Ok(cfg)
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Convert { input, output, compress } => {
            let threads = pipeline::resolve_threads(cli.threads, None)?;
            let report = pipeline::with_threads(threads, || pipeline::cmd_convert(input, output, *compress))??;
            print_json(&report)
        }
        Command::Embed => {
            let cfg = load_config(cli)?;
            let threads = pipeline::resolve_threads(cli.threads, cfg.threads)?;
            let stats = pipeline::with_threads(threads, || pipeline::cmd_embed(&cfg))??;
            print_json(&stats)
        }
        Command::Eval { embedding } => {
            let cfg = load_config(cli)?;
            let threads = pipeline::resolve_threads(cli.threads, cfg.threads)?;
            let metrics = pipeline::with_threads(threads, || pipeline::cmd_eval(embedding, &cfg))??;
            print_json(&metrics)
        }
        Command::Tune { budget } => {
            let cfg = load_config(cli)?;
            let threads = pipeline::resolve_threads(cli.threads, cfg.threads)?;
            let summary = pipeline::with_threads(threads, || pipeline::cmd_tune(&cfg, *budget))??;
            print_json(&serde_json::json!({
                "best_trial": summary.best_trial,
                "best_objective": summary.best_objective,
                "initial_objective": summary.initial_objective,
                "best": summary.best,
            }))
        }
    }
}

fn error_json(err: &anyhow::Error) -> serde_json::Value {
    let kind = err.downcast_ref::<PipelineError>().map_or("error", PipelineError::kind);
    serde_json::json!({ "error": kind, "message": format!("{err:#}") })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", error_json(&err));
            ExitCode::FAILURE
        }
    }
}
