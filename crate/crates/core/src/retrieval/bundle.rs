//! Per-task knowledge bundle assembly: the three-step retrieval.
//!
//! (1) Each task dependency resolves to a usage example by exact match of its
//! code against the usage store, falling back to mining the target project.
//! (2) Code samples: BM25 top-n over the sample store, re-ranked to m by
//! embedding cosine. (3) Translation pair: same, over the pairs' source
//! functions, filtered to the task's language pair.

use super::bm25::Bm25Index;
use super::embed::{rerank, Candidate, Embedder};
use super::{RetrievalConfig, RetrievalError};
use crate::depextract::{self, UsageIndex};
use crate::kbstore::{CodeSample, DependencyUsageExample, KnowledgeBase, TranslationPair};
use crate::task::TranslationTask;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const SAMPLE_INDEX_FILE: &str = "samples.bm25.json";

/// The retrieved knowledge triple for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeBundle {
    /// One example per task dependency, in task order; empty usage when no
    /// reference exists.
    pub dependency_examples: Vec<DependencyUsageExample>,
    /// Sorted by descending rerank score.
    pub code_samples: Vec<CodeSample>,
    pub translation_pair: Option<TranslationPair>,
}

impl KnowledgeBundle {
    pub fn is_empty(&self) -> bool {
        self.dependency_examples.iter().all(|d| !d.has_usage())
            && self.code_samples.is_empty()
            && self.translation_pair.is_none()
    }
}

/// Bundle plus any non-fatal warnings (embedder fallbacks, index problems);
/// the run log records the warnings.
#[derive(Debug, Clone)]
pub struct AssembledBundle {
    pub bundle: KnowledgeBundle,
    pub warnings: Vec<String>,
}

/// Builds the BM25 index over the sample store.
pub fn build_sample_index(
    kb: &KnowledgeBase,
    config: &RetrievalConfig,
) -> Result<Bm25Index, RetrievalError> {
    config.validate()?;
    let docs: Vec<(String, String)> = kb
        .samples()
        .iter()
        .map(|s| (s.id.clone(), s.function_text.clone()))
        .collect();
    Bm25Index::build(&docs, kb.manifest().target_language)
}

/// Builds the BM25 index over the pairs' source-function side, filtered to
/// one language pair. The query at translation time is source-language code,
/// so both index and query tokenize with the source language.
pub fn build_pair_index(
    kb: &KnowledgeBase,
    source_language: crate::lang::Language,
    target_language: crate::lang::Language,
) -> Result<Bm25Index, RetrievalError> {
    let docs: Vec<(String, String)> = kb
        .pairs()
        .iter()
        .filter(|p| p.source_language == source_language && p.target_language == target_language)
        .map(|p| (p.id.clone(), p.source_function.clone()))
        .collect();
    Bm25Index::build(&docs, source_language)
}

/// Loads the persisted sample index when it still matches the store,
/// otherwise rebuilds in memory. The cache lives under `index/` in the KB
/// directory and is written by the ingestion command, never here.
fn sample_index_cached(
    kb: &KnowledgeBase,
    config: &RetrievalConfig,
    warnings: &mut Vec<String>,
) -> Result<Bm25Index, RetrievalError> {
    let expected = super::bm25::corpus_fingerprint(
        kb.samples()
            .iter()
            .map(|s| (s.id.as_str(), s.function_text.as_str())),
    );
    let path = kb.index_dir().join(SAMPLE_INDEX_FILE);
    if let Some(cached) = Bm25Index::load(&path) {
        if cached.fingerprint() == expected {
            return Ok(cached);
        }
        warnings.push("sample index cache is stale; rebuilt from the store".to_string());
    }
    build_sample_index(kb, config)
}

/// Assembles the knowledge triple for one task. Deterministic given the KB
/// contents, the config, and a deterministic embedder; empty stores yield an
/// empty-but-valid bundle.
pub fn assemble_bundle(
    task: &TranslationTask,
    kb: &KnowledgeBase,
    config: &RetrievalConfig,
    embedder: &dyn Embedder,
) -> Result<AssembledBundle, RetrievalError> {
    config.validate()?;
    let mut warnings = Vec::new();

    let dependency_examples = resolve_dependencies(task, kb, &mut warnings);

    let code_samples = if kb.samples().is_empty() {
        Vec::new()
    } else {
        let index = sample_index_cached(kb, config, &mut warnings)?;
        let hits = index.search(
            &task.source_code,
            task.source_language,
            config.n_samples,
            config,
        )?;
        let by_id: BTreeMap<&str, &CodeSample> =
            kb.samples().iter().map(|s| (s.id.as_str(), s)).collect();
        let candidates: Vec<Candidate> = hits
            .into_iter()
            .filter_map(|r| {
                by_id.get(r.doc_id.as_str()).map(|s| Candidate {
                    text: s.function_text.clone(),
                    result: r,
                })
            })
            .collect();
        let ranked = rerank_or_fallback(
            &task.source_code,
            &candidates,
            embedder,
            config.m_samples,
            &mut warnings,
        );
        ranked
            .iter()
            .filter_map(|r| by_id.get(r.doc_id.as_str()).map(|s| (*s).clone()))
            .collect()
    };

    let translation_pair = if kb.pairs().is_empty() {
        None
    } else {
        let index = build_pair_index(kb, task.source_language, task.target_language)?;
        if index.doc_count() == 0 {
            None
        } else {
            let hits = index.search(
                &task.source_code,
                task.source_language,
                config.n_pairs,
                config,
            )?;
            let by_id: BTreeMap<&str, &TranslationPair> =
                kb.pairs().iter().map(|p| (p.id.as_str(), p)).collect();
            let candidates: Vec<Candidate> = hits
                .into_iter()
                .filter_map(|r| {
                    by_id.get(r.doc_id.as_str()).map(|p| Candidate {
                        text: p.source_function.clone(),
                        result: r,
                    })
                })
                .collect();
            let ranked = rerank_or_fallback(
                &task.source_code,
                &candidates,
                embedder,
                config.m_pairs,
                &mut warnings,
            );
            ranked
                .first()
                .and_then(|r| by_id.get(r.doc_id.as_str()).map(|p| (*p).clone()))
        }
    };

    Ok(AssembledBundle {
        bundle: KnowledgeBundle {
            dependency_examples,
            code_samples,
            translation_pair,
        },
        warnings,
    })
}

/// Re-rank, falling back to BM25 order with a warning when the embedding
/// provider fails.
fn rerank_or_fallback(
    query: &str,
    candidates: &[Candidate],
    embedder: &dyn Embedder,
    m: usize,
    warnings: &mut Vec<String>,
) -> Vec<super::RetrievalResult> {
    match rerank(query, candidates, embedder, m) {
        Ok(ranked) => ranked,
        Err(e) => {
            warnings.push(format!("re-ranking fell back to BM25 order: {e}"));
            candidates
                .iter()
                .take(m)
                .map(|c| c.result.clone())
                .collect()
        }
    }
}

fn resolve_dependencies(
    task: &TranslationTask,
    kb: &KnowledgeBase,
    warnings: &mut Vec<String>,
) -> Vec<DependencyUsageExample> {
    // The project index is only built when some dependency misses the store.
    let mut project_index: Option<UsageIndex> = None;
    let target_scope = depextract::module_scope_for_file(
        &task
            .insertion_point
            .file
            .to_string_lossy()
            .replace('\\', "/"),
    );

    task.dependencies
        .iter()
        .map(|dep| {
            if let Some(stored) = kb.usage_for(&dep.code) {
                return stored.clone();
            }
            if project_index.is_none() {
                match depextract::index_project(&task.project_path, task.target_language) {
                    Ok(index) => project_index = Some(index),
                    Err(e) => {
                        warnings.push(format!(
                            "dependency mining unavailable for {}: {e}",
                            task.task_id
                        ));
                        project_index = Some(UsageIndex::default());
                    }
                }
            }
            let index = project_index.as_ref().expect("set above");
            depextract::resolve_usage(index, dep, &target_scope)
        })
        .collect()
}
