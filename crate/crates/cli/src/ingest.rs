//! Corpus ingestion: walk project directories, extract functions, add them
//! as code samples.

use anyhow::{Context, Result};
use codeport::codeparse;
use codeport::kbstore::{CodeSample, KnowledgeBase};
use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use walkdir::WalkDir;

pub struct IngestSummary {
    pub projects_seen: usize,
    pub functions_found: usize,
    pub samples_added: usize,
}

/// A corpus root holds one directory per project; files directly under the
/// root count as a project named after the root itself.
pub fn corpus_projects(corpus: &Path) -> Result<Vec<(String, std::path::PathBuf)>> {
    let mut projects = Vec::new();
    let mut loose_files = false;
    for entry in fs::read_dir(corpus)
        .with_context(|| format!("unreadable corpus root {}", corpus.display()))?
    {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            let name = entry.file_name().to_string_lossy().to_string();
            if !name.starts_with('.') {
                projects.push((name, entry.path()));
            }
        } else {
            loose_files = true;
        }
    }
    if loose_files && projects.is_empty() {
        let name = corpus
            .file_name()
            .map(|n| n.to_string_lossy().to_string())
            .unwrap_or_else(|| "corpus".to_string());
        projects.push((name, corpus.to_path_buf()));
    }
    projects.sort();
    Ok(projects)
}

/// Ingests every project under the corpus root. Returns the summary; dedup
/// and exclusion filtering happen inside the store.
pub fn ingest_corpus(kb: &mut KnowledgeBase, corpus: &Path) -> Result<IngestSummary> {
    let mut summary = IngestSummary {
        projects_seen: 0,
        functions_found: 0,
        samples_added: 0,
    };
    for (project, root) in corpus_projects(corpus)? {
        summary.projects_seen += 1;
        let (found, added) = ingest_project(kb, &project, &root)?;
        summary.functions_found += found;
        summary.samples_added += added;
    }
    Ok(summary)
}

/// Ingests one project directory as `project_name`.
pub fn ingest_project(
    kb: &mut KnowledgeBase,
    project_name: &str,
    project_root: &Path,
) -> Result<(usize, usize)> {
    let language = kb.manifest().target_language;
    let mut batch = Vec::new();
    let mut files: Vec<_> = WalkDir::new(project_root)
        .follow_links(false)
        .into_iter()
        .filter_entry(|e| e.depth() == 0 || !e.file_name().to_string_lossy().starts_with('.'))
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .collect();
    files.sort();

    for file in files {
        let ext = file
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("")
            .to_ascii_lowercase();
        if !language.extensions().contains(&ext.as_str()) {
            continue;
        }
        let Ok(source) = fs::read_to_string(&file) else {
            continue;
        };
        let rel = file
            .strip_prefix(project_root)
            .unwrap_or(&file)
            .to_string_lossy()
            .replace('\\', "/");
        let report = codeparse::parse_functions(&source, language)?;
        for def in report.functions {
            batch.push(CodeSample::new(
                project_name,
                rel.clone(),
                def.definition_text(),
                language,
            ));
        }
    }
    let found = batch.len();
    let added = kb.add_code_samples(batch)?;
    Ok((found, added))
}

/// Project names under the watch dirs that are not in the store yet.
pub fn new_projects(
    kb: &KnowledgeBase,
    watch_dirs: &[std::path::PathBuf],
) -> Result<Vec<(String, std::path::PathBuf)>> {
    let known: BTreeSet<String> = kb.sample_projects();
    let excluded = &kb.manifest().excluded_projects;
    let mut fresh = Vec::new();
    for dir in watch_dirs {
        if !dir.is_dir() {
            continue;
        }
        for (name, path) in corpus_projects(dir)? {
            if !known.contains(&name) && !excluded.contains(&name) {
                fresh.push((name, path));
            }
        }
    }
    fresh.sort();
    fresh.dedup_by(|a, b| a.0 == b.0);
    Ok(fresh)
}
