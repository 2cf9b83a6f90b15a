//! `codeport`: knowledge-base-driven, retrieval-augmented code translation
//! for incremental repository migration.

mod commands;
mod ingest;

use clap::{Parser, Subcommand};
use commands::CliFailure;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "codeport",
    version,
    about = "Retrieval-augmented repository-level code translation"
)]
struct Cli {
    /// Configuration file (defaults to ./codeport.json when present).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Knowledge base directory, overriding the config.
    #[arg(long, global = true, value_name = "PATH")]
    kb: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Knowledge base lifecycle.
    Kb {
        #[command(subcommand)]
        action: KbCommand,
    },
    /// Translate a batch of tasks from a manifest.
    Translate {
        /// Manifest document listing the task files.
        #[arg(long, value_name = "PATH")]
        manifest: PathBuf,
        /// Scripted LLM responses keyed by (task id, round); offline mode.
        #[arg(long, value_name = "PATH")]
        mock_llm: Option<PathBuf>,
        /// Worker threads; 1 keeps strict evolution ordering.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Where run artifacts go, overriding the config.
        #[arg(long, value_name = "PATH")]
        run_dir: Option<PathBuf>,
    },
    /// Score a finished run and emit the metrics report.
    Evaluate {
        /// Run directory holding outcomes.jsonl.
        #[arg(long, value_name = "PATH")]
        run: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum KbCommand {
    /// Ingest target-language corpora into the sample store.
    Build {
        /// Corpus roots: one subdirectory per project.
        #[arg(long, required = true, value_name = "DIR")]
        corpus: Vec<PathBuf>,
        /// Project names to exclude (anti-leakage).
        #[arg(long, value_name = "NAME")]
        exclude: Vec<String>,
    },
    /// Ingest newly appeared projects from the configured watch dirs.
    Sync,
    /// Write a staged snapshot retaining a fraction of each store.
    Sample {
        #[arg(long)]
        fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print store counts.
    Stats,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliFailure> {
    let config = commands::load_config(cli.config.as_deref(), cli.kb.as_deref())?;
    match cli.command {
        Command::Kb { action } => match action {
            KbCommand::Build { corpus, exclude } => {
                commands::cmd_kb_build(&config, &corpus, &exclude)
            }
            KbCommand::Sync => commands::cmd_kb_sync(&config),
            KbCommand::Sample { fraction, seed } => {
                commands::cmd_kb_sample(&config, fraction, seed)
            }
            KbCommand::Stats => commands::cmd_kb_stats(&config),
        },
        Command::Translate {
            manifest,
            mock_llm,
            jobs,
            run_dir,
        } => commands::cmd_translate(
            &config,
            &manifest,
            mock_llm.as_deref(),
            jobs,
            run_dir.as_deref(),
        ),
        Command::Evaluate { run } => commands::cmd_evaluate(&config, run.as_deref()),
    }
}
