//! Translation task documents and batch manifests.

use crate::codeparse::signature_parses;
use crate::depextract::Dependency;
use crate::lang::Language;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("unreadable task file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed task document {path}: {message}")]
    Malformed { path: PathBuf, message: String },
    #[error("invalid task {task_id}: {message}")]
    Invalid { task_id: String, message: String },
}

/// Where the candidate gets spliced into the target project: a file plus a
/// unique marker token inside it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InsertionPoint {
    pub file: PathBuf,
    pub marker: String,
}

/// One repository-level translation unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationTask {
    pub task_id: String,
    pub source_language: Language,
    pub target_language: Language,
    /// Source code of the function under translation.
    pub source_code: String,
    /// Function signature of the target function.
    pub target_signature: String,
    /// The target function dependencies.
    #[serde(default)]
    pub dependencies: Vec<Dependency>,
    /// Path to the target-language repository.
    pub project_path: PathBuf,
    pub test_command: String,
    pub insertion_point: InsertionPoint,
    /// Build command; inferred from the target language when absent.
    #[serde(default)]
    pub build_command: Option<String>,
    /// Ground-truth target function, when the benchmark provides one.
    #[serde(default)]
    pub reference_code: Option<String>,
}

impl TranslationTask {
    pub fn validate(&self) -> Result<(), TaskError> {
        let fail = |message: String| TaskError::Invalid {
            task_id: self.task_id.clone(),
            message,
        };
        if self.task_id.is_empty() {
            return Err(fail("task_id is empty".to_string()));
        }
        if self.test_command.trim().is_empty() {
            return Err(fail("test_command is empty".to_string()));
        }
        if !signature_parses(&self.target_signature, self.target_language) {
            return Err(fail(format!(
                "target_signature does not parse as {}: {:?}",
                self.target_language, self.target_signature
            )));
        }
        for dep in &self.dependencies {
            dep.validate().map_err(fail)?;
        }
        Ok(())
    }

    /// Default build step per target language, when the task does not name
    /// one. Offline flags keep verification hermetic.
    pub fn effective_build_command(&self) -> Option<String> {
        if let Some(cmd) = &self.build_command {
            return Some(cmd.clone());
        }
        match self.target_language {
            Language::Rust => Some("cargo build --offline".to_string()),
            Language::C => Some("make".to_string()),
            Language::Java => None,
            Language::Python => None,
        }
    }
}

/// Batch input: a JSON document listing task files, relative to itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskManifest {
    pub tasks: Vec<PathBuf>,
}

/// Loads one task document.
pub fn load_task(path: &Path) -> Result<TranslationTask, TaskError> {
    let raw = fs::read_to_string(path).map_err(|e| TaskError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut task: TranslationTask =
        serde_json::from_str(&raw).map_err(|e| TaskError::Malformed {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    // Relative project paths resolve against the task document's directory.
    if task.project_path.is_relative() {
        if let Some(dir) = path.parent() {
            task.project_path = dir.join(&task.project_path);
        }
    }
    task.validate()?;
    Ok(task)
}

/// Loads a manifest and every task it lists, in listed order.
pub fn load_manifest(path: &Path) -> Result<Vec<TranslationTask>, TaskError> {
    let raw = fs::read_to_string(path).map_err(|e| TaskError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let manifest: TaskManifest = serde_json::from_str(&raw).map_err(|e| TaskError::Malformed {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    manifest
        .tasks
        .iter()
        .map(|rel| {
            let task_path = if rel.is_relative() {
                base.join(rel)
            } else {
                rel.clone()
            };
            load_task(&task_path)
        })
        .collect()
}
