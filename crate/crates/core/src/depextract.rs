//! Dependency usage mining over a project tree.
//!
//! Indexes call statements (for function names) and execution statements
//! (for variable names) across every source file, then resolves each task
//! dependency to its first same-scope usage, falling back to the first match
//! project-wide. "First" means lowest (file path, byte offset).

use crate::codeparse::{
    extract_call_statements, extract_execution_statements, parse_functions, FunctionDef,
};
use crate::kbstore::DependencyUsageExample;
use crate::lang::Language;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;
use walkdir::WalkDir;

#[derive(Debug, Error)]
pub enum DepExtractError {
    #[error("unreadable project root {path}: {source}")]
    Root {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Parse(#[from] crate::codeparse::ParseError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DependencyKind {
    Function,
    Variable,
    Type,
}

/// One dependency of a translation task: its kind, name, and the declaration
/// text supplied by the task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dependency {
    pub kind: DependencyKind,
    pub name: String,
    pub code: String,
    #[serde(default)]
    pub scope: String,
}

impl Dependency {
    pub fn validate(&self) -> Result<(), String> {
        if self.name.is_empty() {
            return Err("dependency name is empty".to_string());
        }
        if !identifier_words(&self.code).any(|w| w == self.name) {
            return Err(format!(
                "dependency name {:?} does not appear in its code",
                self.name
            ));
        }
        Ok(())
    }
}

/// One indexed statement that mentions a name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageEntry {
    pub statement_text: String,
    pub byte_offset: usize,
    pub scope: String,
    pub file_path: String,
    /// Name of the function the statement sits in; used to skip a
    /// dependency's own (possibly recursive) body during resolution.
    pub enclosing_function: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexDiagnostic {
    pub file: String,
    pub reason: String,
}

/// Where a resolved usage example came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UsageOrigin {
    SameScope,
    Fallback,
    NotFound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedUsage {
    pub example: DependencyUsageExample,
    pub origin: UsageOrigin,
}

/// Immutable name-to-statements index over one project tree.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UsageIndex {
    by_name: BTreeMap<String, Vec<UsageEntry>>,
    /// Function name to full definition text, first definition wins.
    definitions: BTreeMap<String, String>,
    diagnostics: Vec<IndexDiagnostic>,
}

impl UsageIndex {
    pub fn entries(&self, name: &str) -> &[UsageEntry] {
        self.by_name.get(name).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn definition(&self, name: &str) -> Option<&str> {
        self.definitions.get(name).map(String::as_str)
    }

    pub fn diagnostics(&self) -> &[IndexDiagnostic] {
        &self.diagnostics
    }

    pub fn is_empty(&self) -> bool {
        self.by_name.is_empty()
    }
}

/// Extensions that look like source code; anything else is ignored silently.
const FOREIGN_SOURCE_EXTS: &[&str] = &[
    "c", "cc", "cpp", "cs", "go", "h", "hpp", "java", "js", "php", "py", "rb", "rs", "ts",
];

/// Scans every source file under `project_root` and builds the usage index.
/// Unreadable or unparseable files are skipped and reported as diagnostics;
/// ordering is deterministic for an unchanged tree.
pub fn index_project(
    project_root: impl AsRef<Path>,
    language: Language,
) -> Result<UsageIndex, DepExtractError> {
    let root = project_root.as_ref();
    fs::read_dir(root).map_err(|e| DepExtractError::Root {
        path: root.to_path_buf(),
        source: e,
    })?;

    let mut files: Vec<PathBuf> = WalkDir::new(root)
        .follow_links(false)
        .into_iter()
        .filter_entry(|e| e.depth() == 0 || !is_hidden(e.file_name().to_str().unwrap_or("")))
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .collect();
    files.sort();

    let mut index = UsageIndex::default();
    for file in files {
        let rel = file.strip_prefix(root).unwrap_or(&file).to_path_buf();
        let rel_str = rel.to_string_lossy().replace('\\', "/");
        let ext = file
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("")
            .to_ascii_lowercase();
        if !language.extensions().contains(&ext.as_str()) {
            if FOREIGN_SOURCE_EXTS.contains(&ext.as_str()) {
                index.diagnostics.push(IndexDiagnostic {
                    file: rel_str,
                    reason: format!("skipped: not a {language} source file"),
                });
            }
            continue;
        }
        let source = match fs::read_to_string(&file) {
            Ok(s) => s,
            Err(e) => {
                index.diagnostics.push(IndexDiagnostic {
                    file: rel_str,
                    reason: format!("unreadable: {e}"),
                });
                continue;
            }
        };
        index_file(&mut index, &rel_str, &source, language)?;
    }

    for entries in index.by_name.values_mut() {
        entries.sort_by(|a, b| (&a.file_path, a.byte_offset).cmp(&(&b.file_path, b.byte_offset)));
        // Same statement indexed under one name via both the call walk and
        // the execution-statement walk: keep the lowest offset.
        entries.dedup_by(|b, a| a.file_path == b.file_path && a.statement_text == b.statement_text);
    }
    Ok(index)
}

fn index_file(
    index: &mut UsageIndex,
    rel_path: &str,
    source: &str,
    language: Language,
) -> Result<(), DepExtractError> {
    let module_path = module_scope_for_file(rel_path);
    let report = parse_functions(source, language)?;
    for diag in &report.diagnostics {
        index.diagnostics.push(IndexDiagnostic {
            file: rel_path.to_string(),
            reason: format!("parse: {} at byte {}", diag.message, diag.byte_offset),
        });
    }

    for def in &report.functions {
        let scope = join_scope(&module_path, &def.scope);
        index
            .definitions
            .entry(def.name.clone())
            .or_insert_with(|| def.definition_text());

        for call in extract_call_statements(def)? {
            push_entry(
                &mut index.by_name,
                call.callee_name.clone(),
                UsageEntry {
                    statement_text: call.statement_text,
                    byte_offset: call.byte_offset,
                    scope: scope.clone(),
                    file_path: rel_path.to_string(),
                    enclosing_function: call.enclosing_function,
                },
            );
        }

        for (text, offset) in extract_execution_statements(def)? {
            let words: BTreeSet<&str> = identifier_words(&text)
                .filter(|w| !language.is_keyword(w))
                .collect();
            for word in words {
                push_entry(
                    &mut index.by_name,
                    word.to_string(),
                    UsageEntry {
                        statement_text: text.clone(),
                        byte_offset: offset,
                        scope: scope.clone(),
                        file_path: rel_path.to_string(),
                        enclosing_function: def.name.clone(),
                    },
                );
            }
        }
    }
    Ok(())
}

fn push_entry(map: &mut BTreeMap<String, Vec<UsageEntry>>, name: String, entry: UsageEntry) {
    map.entry(name).or_default().push(entry);
}

fn is_hidden(name: &str) -> bool {
    name.starts_with('.') && name.len() > 1
}

/// Scope contributed by a file's location: `src/hash/core.rs` becomes
/// `src::hash::core`.
pub fn module_scope_for_file(rel_path: &str) -> String {
    let without_ext = match rel_path.rfind('.') {
        Some(dot) => &rel_path[..dot],
        None => rel_path,
    };
    without_ext
        .split('/')
        .filter(|p| !p.is_empty())
        .collect::<Vec<_>>()
        .join("::")
}

fn join_scope(module_path: &str, inner: &str) -> String {
    match (module_path.is_empty(), inner.is_empty()) {
        (true, _) => inner.to_string(),
        (_, true) => module_path.to_string(),
        _ => format!("{module_path}::{inner}"),
    }
}

/// Resolves a dependency to its first usage, preferring `target_scope`.
/// Statements inside the dependency's own definition are not candidates, so
/// a recursive function does not cite itself.
pub fn resolve_usage_with_origin(
    index: &UsageIndex,
    dep: &Dependency,
    target_scope: &str,
) -> ResolvedUsage {
    let candidates: Vec<&UsageEntry> = index
        .entries(&dep.name)
        .iter()
        .filter(|e| dep.kind != DependencyKind::Function || e.enclosing_function != dep.name)
        .collect();

    let chosen = candidates
        .iter()
        .find(|e| e.scope == target_scope)
        .map(|e| (*e, UsageOrigin::SameScope))
        .or_else(|| candidates.first().map(|e| (*e, UsageOrigin::Fallback)));

    match chosen {
        Some((entry, origin)) => ResolvedUsage {
            example: DependencyUsageExample::new(
                dep.code.clone(),
                entry.statement_text.clone(),
                entry.scope.clone(),
                entry.byte_offset,
            ),
            origin,
        },
        None => ResolvedUsage {
            example: DependencyUsageExample::empty(dep.code.clone()),
            origin: UsageOrigin::NotFound,
        },
    }
}

/// Same as [`resolve_usage_with_origin`], returning just the example. The
/// usage example is empty when the dependency is never used.
pub fn resolve_usage(
    index: &UsageIndex,
    dep: &Dependency,
    target_scope: &str,
) -> DependencyUsageExample {
    resolve_usage_with_origin(index, dep, target_scope).example
}

/// Harvests usage examples from verified translated code: one example per
/// distinct project-local callee, keyed by the callee's definition text.
/// Callees without a project definition (standard library and external
/// calls) are skipped; only the first occurrence per callee is kept.
pub fn extract_from_translation(
    translated_fn: &FunctionDef,
    index: &UsageIndex,
) -> Result<Vec<DependencyUsageExample>, DepExtractError> {
    let mut out = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();

    for call in extract_call_statements(translated_fn)? {
        if call.callee_name == translated_fn.name || seen.contains(&call.callee_name) {
            continue;
        }
        if let Some(def_text) = index.definition(&call.callee_name) {
            seen.insert(call.callee_name.clone());
            out.push(DependencyUsageExample::new(
                def_text.to_string(),
                call.statement_text,
                translated_fn.scope.clone(),
                call.byte_offset,
            ));
        }
    }

    // Bare references in execution statements (function pointers, callbacks).
    for (text, offset) in extract_execution_statements(translated_fn)? {
        for word in identifier_words(&text) {
            if word == translated_fn.name || seen.contains(word) {
                continue;
            }
            if let Some(def_text) = index.definition(word) {
                seen.insert(word.to_string());
                out.push(DependencyUsageExample::new(
                    def_text.to_string(),
                    text.clone(),
                    translated_fn.scope.clone(),
                    offset,
                ));
            }
        }
    }
    Ok(out)
}

/// Whole identifier tokens of a text; `state` never matches `state_len`.
pub fn identifier_words(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !c.is_ascii_alphanumeric() && c != '_')
        .filter(|w| !w.is_empty() && !w.starts_with(|c: char| c.is_ascii_digit()))
}
