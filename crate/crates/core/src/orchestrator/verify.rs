//! Candidate verification: compile-and-test in an isolated workspace.
//!
//! The project tree is copied into a per-attempt workspace, the candidate is
//! spliced over the insertion marker, then the build and the task's test
//! command run with per-phase wall-clock timeouts. The original tree is
//! never touched.

use crate::codeparse;
use crate::task::TranslationTask;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("workspace setup failed: {0}")]
    Setup(String),
    #[error("insertion marker {marker:?} found {count} times in {file} (need exactly 1)")]
    Marker {
        marker: String,
        file: String,
        count: usize,
    },
}

/// Outcome of one verification run. `error_text` is non-empty exactly when
/// the tests did not pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationResult {
    pub compiled: bool,
    pub tests_passed: bool,
    pub error_text: String,
    pub duration_secs: f64,
}

impl VerificationResult {
    pub fn success(duration_secs: f64) -> Self {
        VerificationResult {
            compiled: true,
            tests_passed: true,
            error_text: String::new(),
            duration_secs,
        }
    }

    pub fn compile_failure(error_text: String, duration_secs: f64) -> Self {
        VerificationResult {
            compiled: false,
            tests_passed: false,
            error_text: non_empty(error_text, "build failed"),
            duration_secs,
        }
    }

    pub fn test_failure(error_text: String, duration_secs: f64) -> Self {
        VerificationResult {
            compiled: true,
            tests_passed: false,
            error_text: non_empty(error_text, "tests failed"),
            duration_secs,
        }
    }
}

fn non_empty(text: String, fallback: &str) -> String {
    if text.trim().is_empty() {
        fallback.to_string()
    } else {
        text
    }
}

/// Per-phase wall-clock limits; unattended batch runs must terminate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyLimits {
    pub build_timeout_secs: u64,
    pub test_timeout_secs: u64,
}

impl Default for VerifyLimits {
    fn default() -> Self {
        VerifyLimits {
            build_timeout_secs: 120,
            test_timeout_secs: 120,
        }
    }
}

pub trait Verifier: Send + Sync {
    fn verify(
        &self,
        candidate: &str,
        task: &TranslationTask,
        workspace: &Path,
    ) -> Result<VerificationResult, VerifyError>;
}

/// Real verification: copy, splice, build, test.
#[derive(Debug, Clone, Default)]
pub struct ToolchainVerifier {
    pub limits: VerifyLimits,
}

impl ToolchainVerifier {
    pub fn new(limits: VerifyLimits) -> Self {
        ToolchainVerifier { limits }
    }
}

impl Verifier for ToolchainVerifier {
    fn verify(
        &self,
        candidate: &str,
        task: &TranslationTask,
        workspace: &Path,
    ) -> Result<VerificationResult, VerifyError> {
        let started = Instant::now();
        prepare_workspace(candidate, task, workspace)?;

        if let Some(build_cmd) = task.effective_build_command() {
            let build = run_phase(
                &build_cmd,
                workspace,
                Duration::from_secs(self.limits.build_timeout_secs),
            );
            if !build.ok {
                return Ok(VerificationResult::compile_failure(
                    build.output,
                    started.elapsed().as_secs_f64(),
                ));
            }
        }

        let test = run_phase(
            &task.test_command,
            workspace,
            Duration::from_secs(self.limits.test_timeout_secs),
        );
        let duration = started.elapsed().as_secs_f64();
        if test.ok {
            Ok(VerificationResult::success(duration))
        } else {
            Ok(VerificationResult::test_failure(test.output, duration))
        }
    }
}

/// Offline stand-in for environments without the target toolchain: syntax is
/// checked with the real grammar, and "tests pass" means the candidate
/// matches the task's reference translation modulo whitespace.
#[derive(Debug, Clone, Default)]
pub struct StubVerifier;

impl Verifier for StubVerifier {
    fn verify(
        &self,
        candidate: &str,
        task: &TranslationTask,
        _workspace: &Path,
    ) -> Result<VerificationResult, VerifyError> {
        let started = Instant::now();
        let report = codeparse::parse_functions(
            &codeparse::wrap_snippet(candidate, task.target_language),
            task.target_language,
        )
        .map_err(|e| VerifyError::Setup(e.to_string()))?;
        if !codeparse::snippet_parses(candidate, task.target_language) {
            let mut diagnostics: Vec<String> = report
                .diagnostics
                .iter()
                .map(|d| format!("byte {}: {}", d.byte_offset, d.message))
                .collect();
            if diagnostics.is_empty() {
                diagnostics.push("candidate does not parse".to_string());
            }
            return Ok(VerificationResult::compile_failure(
                format!("stub syntax check failed:\n{}", diagnostics.join("\n")),
                started.elapsed().as_secs_f64(),
            ));
        }
        let duration = started.elapsed().as_secs_f64();
        match &task.reference_code {
            Some(reference) if normalize_ws(reference) == normalize_ws(candidate) => {
                Ok(VerificationResult::success(duration))
            }
            Some(_) => Ok(VerificationResult::test_failure(
                "stub verification: candidate differs from the reference translation".to_string(),
                duration,
            )),
            None => Ok(VerificationResult::test_failure(
                "stub verification: task has no reference translation to compare against"
                    .to_string(),
                duration,
            )),
        }
    }
}

fn normalize_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Directories never copied into a workspace.
const SKIP_DIRS: &[&str] = &[".git", "target", "node_modules", "__pycache__"];

fn prepare_workspace(
    candidate: &str,
    task: &TranslationTask,
    workspace: &Path,
) -> Result<(), VerifyError> {
    if !task.project_path.is_dir() {
        return Err(VerifyError::Setup(format!(
            "project path {} is not a directory",
            task.project_path.display()
        )));
    }
    copy_tree(&task.project_path, workspace).map_err(|e| VerifyError::Setup(e.to_string()))?;

    let target_file = workspace.join(&task.insertion_point.file);
    let content = fs::read_to_string(&target_file).map_err(|e| {
        VerifyError::Setup(format!(
            "insertion file {}: {e}",
            task.insertion_point.file.display()
        ))
    })?;
    let count = content.matches(&task.insertion_point.marker).count();
    if count != 1 {
        return Err(VerifyError::Marker {
            marker: task.insertion_point.marker.clone(),
            file: task.insertion_point.file.display().to_string(),
            count,
        });
    }
    let spliced = content.replacen(&task.insertion_point.marker, candidate, 1);
    fs::write(&target_file, spliced).map_err(|e| VerifyError::Setup(e.to_string()))?;
    Ok(())
}

fn copy_tree(from: &Path, to: &Path) -> std::io::Result<()> {
    fs::create_dir_all(to)?;
    for entry in walkdir::WalkDir::new(from)
        .follow_links(false)
        .into_iter()
        .filter_entry(|e| {
            e.depth() == 0 || !SKIP_DIRS.contains(&e.file_name().to_str().unwrap_or(""))
        })
    {
        let entry = entry.map_err(std::io::Error::other)?;
        let rel = entry
            .path()
            .strip_prefix(from)
            .expect("walk stays under root");
        if rel.as_os_str().is_empty() {
            continue;
        }
        let dest = to.join(rel);
        if entry.file_type().is_dir() {
            fs::create_dir_all(&dest)?;
        } else if entry.file_type().is_file() {
            if let Some(parent) = dest.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::copy(entry.path(), &dest)?;
        }
    }
    Ok(())
}

struct PhaseOutcome {
    ok: bool,
    output: String,
}

/// Runs a shell command in `dir`, capturing combined output, enforcing a
/// wall-clock timeout. Exceeding the timeout kills the process and reports
/// "timeout".
fn run_phase(command: &str, dir: &Path, timeout: Duration) -> PhaseOutcome {
    let stdout_path = dir.join(".phase.stdout");
    let stderr_path = dir.join(".phase.stderr");
    let spawn = || -> std::io::Result<std::process::Child> {
        Command::new("sh")
            .arg("-c")
            .arg(command)
            .current_dir(dir)
            .env("CARGO_TARGET_DIR", dir.join("target"))
            .stdin(Stdio::null())
            .stdout(fs::File::create(&stdout_path)?)
            .stderr(fs::File::create(&stderr_path)?)
            .spawn()
    };
    let mut child = match spawn() {
        Ok(child) => child,
        Err(e) => {
            return PhaseOutcome {
                ok: false,
                output: format!("failed to spawn {command:?}: {e}"),
            }
        }
    };

    let deadline = Instant::now() + timeout;
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break Some(status),
            Ok(None) => {
                if Instant::now() >= deadline {
                    let _ = child.kill();
                    let _ = child.wait();
                    break None;
                }
                std::thread::sleep(Duration::from_millis(25));
            }
            Err(e) => {
                return PhaseOutcome {
                    ok: false,
                    output: format!("wait failed: {e}"),
                }
            }
        }
    };

    let mut output = String::new();
    for path in [&stdout_path, &stderr_path] {
        if let Ok(text) = fs::read_to_string(path) {
            output.push_str(&text);
        }
        let _ = fs::remove_file(path);
    }
    let output = tail_bytes(&output, 64 * 1024);

    match status {
        Some(status) if status.success() => PhaseOutcome { ok: true, output },
        Some(status) => PhaseOutcome {
            ok: false,
            output: non_empty(output, &format!("command exited with status {status}")),
        },
        None => PhaseOutcome {
            ok: false,
            output: format!("timeout after {}s\n{output}", timeout.as_secs()),
        },
    }
}

fn tail_bytes(text: &str, budget: usize) -> String {
    if text.len() <= budget {
        return text.to_string();
    }
    let mut start = text.len() - budget;
    while !text.is_char_boundary(start) {
        start += 1;
    }
    text[start..].to_string()
}

/// A workspace directory for one verification attempt.
pub fn workspace_dir(base: Option<&Path>, task_id: &str, round: u8) -> PathBuf {
    match base {
        Some(base) => base.join(format!("{task_id}-r{round}")),
        None => std::env::temp_dir().join(format!(
            "codeport-ws-{}-{task_id}-r{round}",
            std::process::id()
        )),
    }
}
