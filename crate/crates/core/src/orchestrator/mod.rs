//! End-to-end task execution: retrieve, translate, verify, self-debug once,
//! and evolve the knowledge base from successes.
//!
//! The default is strictly sequential so each task sees the knowledge
//! evolved from every earlier one. The opt-in parallel mode snapshots the KB
//! at task start and serializes writes, so evolution stays visible to tasks
//! started after the write completed.

mod llm;
mod verify;

pub use llm::{CallRoute, HttpLlm, LlmClient, LlmError, LlmParams, MockLlm, API_KEY_ENV};
pub use verify::{
    StubVerifier, ToolchainVerifier, VerificationResult, Verifier, VerifyError, VerifyLimits,
};

use crate::depextract;
use crate::kbstore::{KbError, KnowledgeBase, PairProvenance, TranslationPair};
use crate::lang::Language;
use crate::metrics::TaskRecord;
use crate::promptgen::{
    build_repair_prompt, build_translation_prompt, extract_code, ExtractMode, FailureKind,
    LlmResponse, PromptText, DEFAULT_ERROR_BUDGET,
};
use crate::retrieval::{assemble_bundle, Embedder, RetrievalConfig};
use crate::task::TranslationTask;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("run directory {path}: {message}")]
    RunDir { path: PathBuf, message: String },
    #[error(transparent)]
    Kb(#[from] KbError),
}

/// Pipeline knobs beyond component configs.
#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub retrieval: RetrievalConfig,
    /// Self-debug rounds after the initial attempt; one by default.
    pub repair_rounds: u32,
    pub error_budget_bytes: usize,
    pub extract_mode: ExtractMode,
    /// Re-attach the knowledge bundle to repair prompts.
    pub attach_bundle_on_repair: bool,
    pub keep_workspaces: bool,
    /// Base directory for verification workspaces; temp dir when absent.
    pub workspace_root: Option<PathBuf>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            retrieval: RetrievalConfig::default(),
            repair_rounds: 1,
            error_budget_bytes: DEFAULT_ERROR_BUDGET,
            extract_mode: ExtractMode::LastBlock,
            attach_bundle_on_repair: false,
            keep_workspaces: false,
            workspace_root: None,
        }
    }
}

/// Shared read-only dependencies for a run.
pub struct RunDeps<'a> {
    pub llm: &'a dyn LlmClient,
    pub llm_params: &'a LlmParams,
    pub verifier: &'a dyn Verifier,
    pub embedder: &'a dyn Embedder,
    pub options: &'a PipelineOptions,
}

/// One LLM round and its verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationAttempt {
    /// 0 = initial, 1.. = repair rounds.
    pub round: u8,
    pub prompt: PromptText,
    pub response: LlmResponse,
    pub candidate_code: String,
    pub verification: VerificationResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalStatus {
    PassedInitial,
    PassedAfterRepair,
    Failed,
}

/// Everything recorded about one task's run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationOutcome {
    pub task_id: String,
    pub attempts: Vec<TranslationAttempt>,
    pub final_status: FinalStatus,
    /// Whether evolution wrote anything back to the knowledge base.
    pub evolved: bool,
    /// Non-fatal diagnostics (retrieval fallbacks, transport errors).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl TranslationOutcome {
    pub fn passed(&self) -> bool {
        self.final_status != FinalStatus::Failed
    }

    pub fn final_candidate(&self) -> Option<&str> {
        self.attempts.last().map(|a| a.candidate_code.as_str())
    }

    fn failed(task_id: &str, attempts: Vec<TranslationAttempt>, warning: String) -> Self {
        TranslationOutcome {
            task_id: task_id.to_string(),
            attempts,
            final_status: FinalStatus::Failed,
            evolved: false,
            warnings: vec![warning],
        }
    }
}

/// Runs one task end to end against a read-only KB view: bundle retrieval,
/// prompt, completion, extraction, verification, and the configured number
/// of self-debug rounds. LLM transport errors fail the task, never the run.
pub fn translate_task(
    task: &TranslationTask,
    kb: &KnowledgeBase,
    deps: &RunDeps,
) -> TranslationOutcome {
    let assembled = match assemble_bundle(task, kb, &deps.options.retrieval, deps.embedder) {
        Ok(v) => v,
        Err(e) => {
            return TranslationOutcome::failed(
                &task.task_id,
                Vec::new(),
                format!("bundle assembly failed: {e}"),
            )
        }
    };
    let mut warnings = assembled.warnings.clone();
    let bundle = assembled.bundle;

    let mut attempts: Vec<TranslationAttempt> = Vec::new();
    let mut prompt = build_translation_prompt(task, &bundle);

    for round in 0..=deps.options.repair_rounds {
        let round = round as u8;
        let route = CallRoute {
            task_id: task.task_id.clone(),
            round,
        };
        let mut response = match deps.llm.complete(&prompt, deps.llm_params, &route) {
            Ok(r) => r,
            Err(e) => {
                warnings.push(format!("llm round {round}: {e}"));
                return TranslationOutcome {
                    task_id: task.task_id.clone(),
                    attempts,
                    final_status: FinalStatus::Failed,
                    evolved: false,
                    warnings,
                };
            }
        };
        let candidate = match extract_code(
            &response.raw_text,
            task.target_language,
            deps.options.extract_mode,
        ) {
            Ok(code) => code,
            Err(e) => {
                warnings.push(format!("extraction round {round}: {e}"));
                return TranslationOutcome {
                    task_id: task.task_id.clone(),
                    attempts,
                    final_status: FinalStatus::Failed,
                    evolved: false,
                    warnings,
                };
            }
        };
        response.extracted_code = Some(candidate.clone());

        let ws =
            verify::workspace_dir(deps.options.workspace_root.as_deref(), &task.task_id, round);
        let verification = match deps.verifier.verify(&candidate, task, &ws) {
            Ok(v) => v,
            Err(e) => {
                warnings.push(format!("verification round {round}: {e}"));
                VerificationResult {
                    compiled: false,
                    tests_passed: false,
                    error_text: format!("verification error: {e}"),
                    duration_secs: 0.0,
                }
            }
        };
        if !deps.options.keep_workspaces {
            let _ = fs::remove_dir_all(&ws);
        }

        let passed = verification.tests_passed;
        let failure_kind = if verification.compiled {
            FailureKind::Test
        } else {
            FailureKind::Compile
        };
        let error_text = verification.error_text.clone();
        attempts.push(TranslationAttempt {
            round,
            prompt: prompt.clone(),
            response,
            candidate_code: candidate.clone(),
            verification,
        });

        if passed {
            return TranslationOutcome {
                task_id: task.task_id.clone(),
                attempts,
                final_status: if round == 0 {
                    FinalStatus::PassedInitial
                } else {
                    FinalStatus::PassedAfterRepair
                },
                evolved: false,
                warnings,
            };
        }
        if round as u32 == deps.options.repair_rounds {
            break;
        }
        let repair_bundle = deps.options.attach_bundle_on_repair.then_some(&bundle);
        prompt = match build_repair_prompt(
            task,
            &candidate,
            &error_text,
            failure_kind,
            deps.options.error_budget_bytes,
            repair_bundle,
        ) {
            Ok(p) => p,
            Err(e) => {
                warnings.push(format!("repair prompt round {round}: {e}"));
                break;
            }
        };
    }

    TranslationOutcome {
        task_id: task.task_id.clone(),
        attempts,
        final_status: FinalStatus::Failed,
        evolved: false,
        warnings,
    }
}

/// Writes a successful task's knowledge back: the verified translation pair
/// plus dependency usage examples mined from the final candidate. Returns
/// whether anything was written.
pub fn evolve(
    kb: &mut KnowledgeBase,
    task: &TranslationTask,
    outcome: &TranslationOutcome,
) -> Result<bool, KbError> {
    if !outcome.passed() {
        return Ok(false);
    }
    let Some(candidate) = outcome.final_candidate() else {
        return Ok(false);
    };

    let before = kb.stats().pairs;
    kb.add_translation_pair(TranslationPair::new(
        task.source_language,
        task.target_language,
        task.source_code.clone(),
        candidate.to_string(),
        PairProvenance::Evolved,
        true,
    ))?;
    let wrote_pair = kb.stats().pairs > before;

    let mut wrote_usages = false;
    if let Ok(index) = depextract::index_project(&task.project_path, task.target_language) {
        let wrapped = crate::codeparse::wrap_snippet(candidate, task.target_language);
        if let Ok(report) = crate::codeparse::parse_functions(&wrapped, task.target_language) {
            if let Some(def) = report.functions.first() {
                if let Ok(examples) = depextract::extract_from_translation(def, &index) {
                    wrote_usages = kb.add_dependency_examples(examples)? > 0;
                }
            }
        }
    }
    Ok(wrote_pair || wrote_usages)
}

/// Slim per-task record persisted to `outcomes.jsonl`. Durations are kept
/// out so records are byte-identical across mock runs; `verify.log` carries
/// the timings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub task_id: String,
    pub target_language: Language,
    pub final_status: FinalStatus,
    pub evolved: bool,
    pub rounds: usize,
    pub compiled_first: bool,
    pub passed_first: bool,
    pub passed_after_debug: bool,
    pub candidate_code: String,
    #[serde(default)]
    pub reference_code: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl OutcomeRecord {
    pub fn new(task: &TranslationTask, outcome: &TranslationOutcome) -> Self {
        let first = outcome.attempts.first();
        OutcomeRecord {
            task_id: outcome.task_id.clone(),
            target_language: task.target_language,
            final_status: outcome.final_status,
            evolved: outcome.evolved,
            rounds: outcome.attempts.len(),
            compiled_first: first.map(|a| a.verification.compiled).unwrap_or(false),
            passed_first: first.map(|a| a.verification.tests_passed).unwrap_or(false),
            passed_after_debug: outcome.passed(),
            candidate_code: outcome.final_candidate().unwrap_or("").to_string(),
            reference_code: task.reference_code.clone(),
            warnings: outcome.warnings.clone(),
        }
    }

    /// Evaluation view of this record (one generation round: n = 1).
    pub fn to_task_record(&self) -> TaskRecord {
        TaskRecord {
            task_id: self.task_id.clone(),
            language: self.target_language,
            n: 1,
            c: self.passed_first as u64,
            compiled_first: self.compiled_first,
            passed_first: self.passed_first,
            passed_after_debug: self.passed_after_debug,
            candidate_code: self.candidate_code.clone(),
            reference_code: self.reference_code.clone(),
        }
    }
}

/// Processes tasks in order. Evolution writes from task i are visible to
/// task i+1 in the sequential default. With `jobs > 1`, tasks run on worker
/// threads; each task snapshots the KB at start and writes are serialized.
/// Per-task failures never abort the batch.
pub fn run_batch(
    tasks: &[TranslationTask],
    kb: &mut KnowledgeBase,
    deps: &RunDeps,
    run_dir: Option<&Path>,
    jobs: usize,
) -> Result<Vec<TranslationOutcome>, RunError> {
    if let Some(dir) = run_dir {
        fs::create_dir_all(dir.join("tasks")).map_err(|e| RunError::RunDir {
            path: dir.to_path_buf(),
            message: e.to_string(),
        })?;
    }

    let outcomes = if jobs <= 1 {
        let mut outcomes = Vec::with_capacity(tasks.len());
        for task in tasks {
            let snapshot = kb.clone();
            let mut outcome = translate_task(task, &snapshot, deps);
            apply_evolution(kb, task, &mut outcome);
            outcomes.push(outcome);
        }
        outcomes
    } else {
        run_parallel(tasks, kb, deps, jobs)
    };

    if let Some(dir) = run_dir {
        persist_run(dir, tasks, &outcomes)?;
    }
    Ok(outcomes)
}

fn apply_evolution(
    kb: &mut KnowledgeBase,
    task: &TranslationTask,
    outcome: &mut TranslationOutcome,
) {
    match evolve(kb, task, outcome) {
        Ok(wrote) => outcome.evolved = wrote,
        Err(e) => outcome
            .warnings
            .push(format!("evolution write failed: {e}")),
    }
}

fn run_parallel(
    tasks: &[TranslationTask],
    kb: &mut KnowledgeBase,
    deps: &RunDeps,
    jobs: usize,
) -> Vec<TranslationOutcome> {
    let queue: Mutex<VecDeque<usize>> = Mutex::new((0..tasks.len()).collect());
    let slots: Mutex<Vec<Option<TranslationOutcome>>> = Mutex::new(vec![None; tasks.len()]);
    let shared_kb = Mutex::new(kb);

    std::thread::scope(|scope| {
        for _ in 0..jobs.min(tasks.len().max(1)) {
            scope.spawn(|| loop {
                let Some(i) = queue.lock().expect("queue lock").pop_front() else {
                    return;
                };
                let task = &tasks[i];
                // Snapshot under the lock: the view includes exactly the
                // writes completed before this task started.
                let snapshot = shared_kb.lock().expect("kb lock").clone();
                let mut outcome = translate_task(task, &snapshot, deps);
                {
                    let mut kb = shared_kb.lock().expect("kb lock");
                    apply_evolution(&mut kb, task, &mut outcome);
                }
                slots.lock().expect("slots lock")[i] = Some(outcome);
            });
        }
    });

    slots
        .into_inner()
        .expect("slots lock")
        .into_iter()
        .map(|o| o.expect("every task produced an outcome"))
        .collect()
}

/// Run directory layout: `tasks/<task_id>/{prompt.md, response.txt,
/// candidate.txt, verify.log}` (round-suffixed beyond round 0) plus
/// `outcomes.jsonl`; `evaluate` adds `report.json`.
fn persist_run(
    dir: &Path,
    tasks: &[TranslationTask],
    outcomes: &[TranslationOutcome],
) -> Result<(), RunError> {
    let fail = |e: std::io::Error| RunError::RunDir {
        path: dir.to_path_buf(),
        message: e.to_string(),
    };

    let mut outcomes_file = fs::File::create(dir.join("outcomes.jsonl")).map_err(fail)?;
    let mut log = String::new();
    for (task, outcome) in tasks.iter().zip(outcomes) {
        let task_dir = dir.join("tasks").join(&outcome.task_id);
        fs::create_dir_all(&task_dir).map_err(fail)?;
        let mut verify_log = String::new();
        for attempt in &outcome.attempts {
            let suffix = if attempt.round == 0 {
                String::new()
            } else {
                format!(".{}", attempt.round)
            };
            fs::write(
                task_dir.join(format!("prompt{suffix}.md")),
                &attempt.prompt.text,
            )
            .map_err(fail)?;
            fs::write(
                task_dir.join(format!("response{suffix}.txt")),
                &attempt.response.raw_text,
            )
            .map_err(fail)?;
            fs::write(
                task_dir.join(format!("candidate{suffix}.txt")),
                &attempt.candidate_code,
            )
            .map_err(fail)?;
            verify_log.push_str(&format!(
                "round {}: compiled={} tests_passed={} duration={:.2}s\n{}\n",
                attempt.round,
                attempt.verification.compiled,
                attempt.verification.tests_passed,
                attempt.verification.duration_secs,
                attempt.verification.error_text,
            ));
        }
        // The final candidate under the stable name.
        fs::write(
            task_dir.join("candidate.txt"),
            outcome.final_candidate().unwrap_or(""),
        )
        .map_err(fail)?;
        fs::write(task_dir.join("verify.log"), verify_log).map_err(fail)?;

        let record = OutcomeRecord::new(task, outcome);
        let line = serde_json::to_string(&record).expect("record serializes");
        outcomes_file.write_all(line.as_bytes()).map_err(fail)?;
        outcomes_file.write_all(b"\n").map_err(fail)?;

        for w in &outcome.warnings {
            log.push_str(&format!("{}: {w}\n", outcome.task_id));
        }
    }
    if !log.is_empty() {
        fs::write(dir.join("run.log"), log).map_err(fail)?;
    }
    Ok(())
}

/// Reads the records back from a run directory.
pub fn load_outcome_records(run_dir: &Path) -> Result<Vec<OutcomeRecord>, RunError> {
    let path = run_dir.join("outcomes.jsonl");
    let raw = fs::read_to_string(&path).map_err(|e| RunError::RunDir {
        path: run_dir.to_path_buf(),
        message: format!("outcomes.jsonl: {e}"),
    })?;
    let mut records = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| RunError::RunDir {
            path: run_dir.to_path_buf(),
            message: format!("outcomes.jsonl line {}: {e}", i + 1),
        })?;
        records.push(record);
    }
    Ok(records)
}
