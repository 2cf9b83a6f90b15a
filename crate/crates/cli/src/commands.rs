//! Subcommand implementations.

use crate::ingest;
use anyhow::{anyhow, Context, Result};
use codeport::config::{Config, VerifierMode};
use codeport::kbstore::KnowledgeBase;
use codeport::metrics;
use codeport::orchestrator::{
    self, HttpLlm, LlmClient, MockLlm, RunDeps, StubVerifier, ToolchainVerifier, Verifier,
};
use codeport::retrieval::{self, Embedder, HashEmbedder, RemoteEmbedder};
use codeport::task;
use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

/// Exit code taxonomy: 0 success, 1 infrastructure, 2 invalid input.
pub enum CliFailure {
    Invalid(String),
    Infra(String),
}

impl CliFailure {
    pub fn code(&self) -> i32 {
        match self {
            CliFailure::Invalid(_) => 2,
            CliFailure::Infra(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliFailure::Invalid(m) | CliFailure::Infra(m) => m,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> CliFailure {
    CliFailure::Invalid(e.to_string())
}

fn infra(e: impl std::fmt::Display) -> CliFailure {
    CliFailure::Infra(e.to_string())
}

pub fn load_config(path: Option<&Path>, kb_override: Option<&Path>) -> Result<Config, CliFailure> {
    let mut config = match path {
        Some(p) => Config::load(p).map_err(invalid)?,
        None => {
            let default_path = Path::new("codeport.json");
            if default_path.exists() {
                Config::load(default_path).map_err(invalid)?
            } else {
                Config::default()
            }
        }
    };
    if let Some(kb) = kb_override {
        config.kb_path = kb.to_path_buf();
    }
    Ok(config)
}

fn open_kb(config: &Config) -> Result<KnowledgeBase, CliFailure> {
    KnowledgeBase::open_or_create(&config.kb_path, config.target_language).map_err(infra)
}

pub fn cmd_kb_build(
    config: &Config,
    corpus_dirs: &[PathBuf],
    exclusions: &[String],
) -> Result<(), CliFailure> {
    for dir in corpus_dirs {
        if !dir.is_dir() {
            return Err(invalid(format!(
                "corpus root {} is not a directory",
                dir.display()
            )));
        }
    }
    let mut kb = open_kb(config)?;
    if !exclusions.is_empty() {
        let names: BTreeSet<String> = exclusions.iter().cloned().collect();
        let removed = kb.apply_exclusion(&names).map_err(infra)?;
        println!(
            "excluded {} project name(s), removed {removed} existing sample(s)",
            names.len()
        );
    }
    let mut added = 0;
    let mut found = 0;
    for dir in corpus_dirs {
        let summary = ingest_dir(&mut kb, dir)?;
        added += summary.samples_added;
        found += summary.functions_found;
    }
    rebuild_indexes(&kb, config)?;
    println!(
        "{added} samples added ({} duplicates or excluded)",
        found - added
    );
    print_stats(&kb);
    Ok(())
}

fn ingest_dir(kb: &mut KnowledgeBase, dir: &Path) -> Result<ingest::IngestSummary, CliFailure> {
    ingest::ingest_corpus(kb, dir).map_err(infra)
}

fn rebuild_indexes(kb: &KnowledgeBase, config: &Config) -> Result<(), CliFailure> {
    let index = retrieval::build_sample_index(kb, &config.retrieval).map_err(infra)?;
    index
        .save(&kb.index_dir().join(retrieval::SAMPLE_INDEX_FILE))
        .map_err(infra)?;
    Ok(())
}

pub fn cmd_kb_sync(config: &Config) -> Result<(), CliFailure> {
    let mut kb = open_kb(config)?;
    let interval = kb.manifest().update_interval_secs;
    let now = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    if let Some(last) = kb.last_sync_at() {
        if now.saturating_sub(last) < interval {
            println!(
                "sync skipped: update interval of {interval}s has not elapsed (last sync {}s ago)",
                now.saturating_sub(last)
            );
            return Ok(());
        }
    }

    if let Some(hook) = &config.sync.fetch_command {
        let status = std::process::Command::new("sh")
            .arg("-c")
            .arg(hook)
            .status();
        match status {
            Ok(s) if s.success() => {}
            Ok(s) => eprintln!("warning: fetch hook exited with {s}; continuing with local state"),
            Err(e) => eprintln!("warning: fetch hook failed to run: {e}; continuing"),
        }
    } else if config.sync.watch_dirs.is_empty() {
        return Err(invalid(
            "kb sync needs sync.watch_dirs or sync.fetch_command in the config",
        ));
    }

    let fresh = ingest::new_projects(&kb, &config.sync.watch_dirs).map_err(infra)?;
    let mut added = 0;
    for (name, path) in &fresh {
        let (_, new_samples) = ingest::ingest_project(&mut kb, name, path).map_err(infra)?;
        added += new_samples;
    }
    if !fresh.is_empty() {
        rebuild_indexes(&kb, config)?;
    }
    kb.mark_synced().map_err(infra)?;
    println!("{} projects ingested, {added} samples added", fresh.len());
    Ok(())
}

pub fn cmd_kb_sample(config: &Config, fraction: f64, seed: u64) -> Result<(), CliFailure> {
    let kb = open_kb(config)?;
    let snapshot = kb.snapshot_fraction(fraction, seed).map_err(invalid)?;
    let stats = snapshot.stats();
    println!("snapshot written to {}", snapshot.root().display());
    println!(
        "samples: {}  pairs: {}  usage examples: {} ({} empty)",
        stats.samples,
        stats.pairs,
        stats.usages,
        snapshot.usages().filter(|u| !u.has_usage()).count()
    );
    Ok(())
}

pub fn cmd_kb_stats(config: &Config) -> Result<(), CliFailure> {
    let kb = open_kb(config)?;
    print_stats(&kb);
    Ok(())
}

fn print_stats(kb: &KnowledgeBase) {
    let stats = kb.stats();
    println!(
        "kb at {}: {} samples, {} pairs, {} usage examples, {} excluded projects (schema v{}, target {})",
        kb.root().display(),
        stats.samples,
        stats.pairs,
        stats.usages,
        stats.excluded_projects,
        stats.schema_version,
        stats.target_language
    );
}

pub fn cmd_translate(
    config: &Config,
    manifest: &Path,
    mock_llm: Option<&Path>,
    jobs: usize,
    run_dir_override: Option<&Path>,
) -> Result<(), CliFailure> {
    let tasks = task::load_manifest(manifest).map_err(invalid)?;
    let mut kb = open_kb(config)?;

    let llm: Box<dyn LlmClient> = match mock_llm {
        Some(path) => Box::new(MockLlm::from_file(path).map_err(invalid)?),
        None => {
            if config.llm.endpoint.is_empty() {
                return Err(invalid(
                    "llm.endpoint is empty; set it in the config or pass --mock-llm",
                ));
            }
            Box::new(HttpLlm::new())
        }
    };
    let verifier: Box<dyn Verifier> = match config.verify.mode {
        VerifierMode::Toolchain => Box::new(ToolchainVerifier::new(config.verify.limits())),
        VerifierMode::Stub => Box::new(StubVerifier),
    };
    let embedder: Box<dyn Embedder> = if config.embedder == "builtin-hash" {
        Box::new(HashEmbedder::default())
    } else {
        Box::new(RemoteEmbedder::new(config.embedder.clone(), None, 0))
    };

    let run_dir = run_dir_override.unwrap_or(&config.run_dir).to_path_buf();
    fs::create_dir_all(&run_dir).map_err(infra)?;
    let options = config.pipeline_options();
    let deps = RunDeps {
        llm: llm.as_ref(),
        llm_params: &config.llm,
        verifier: verifier.as_ref(),
        embedder: embedder.as_ref(),
        options: &options,
    };
    let outcomes = orchestrator::run_batch(&tasks, &mut kb, &deps, Some(&run_dir), jobs.max(1))
        .map_err(infra)?;

    for outcome in &outcomes {
        let status = match outcome.final_status {
            orchestrator::FinalStatus::PassedInitial => "passed_initial",
            orchestrator::FinalStatus::PassedAfterRepair => "passed_after_repair",
            orchestrator::FinalStatus::Failed => "failed",
        };
        println!(
            "task {}: {status} ({} round(s){})",
            outcome.task_id,
            outcome.attempts.len(),
            if outcome.evolved { ", evolved" } else { "" }
        );
    }
    let passed = outcomes.iter().filter(|o| o.passed()).count();
    println!(
        "{passed}/{} passed; artifacts under {}",
        outcomes.len(),
        run_dir.display()
    );
    Ok(())
}

pub fn cmd_evaluate(config: &Config, run_dir: Option<&Path>) -> Result<(), CliFailure> {
    let run_dir = run_dir.unwrap_or(&config.run_dir);
    if !run_dir.is_dir() {
        return Err(invalid(format!(
            "run directory {} not found",
            run_dir.display()
        )));
    }
    let records = orchestrator::load_outcome_records(run_dir).map_err(invalid)?;
    let task_records: Vec<metrics::TaskRecord> =
        records.iter().map(|r| r.to_task_record()).collect();
    let report = metrics::report(&task_records, &config.codebleu_weights).map_err(invalid)?;
    print!("{}", metrics::render_table(&report));
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| infra(anyhow!("report serialization: {e}")))?;
    fs::write(run_dir.join("report.json"), format!("{json}\n"))
        .with_context(|| "writing report.json")
        .map_err(infra)?;
    println!(
        "report written to {}",
        run_dir.join("report.json").display()
    );
    Ok(())
}
