//! In-process Okapi BM25 inverted index.
//!
//! Standard document-side scoring:
//! `IDF(w) * tf(w,d) * (k1+1) / (tf(w,d) + k1 * (1 - b + b * |d|/avgdl))`
//! with `IDF(w) = ln(1 + (N - n_w + 0.5)/(n_w + 0.5))`, which is strictly
//! positive, so scores never go negative.

use super::tokenize::tokenize_code;
use super::{RetrievalConfig, RetrievalError, RetrievalResult};
use crate::hashing::fnv1a64;
use crate::lang::Language;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

/// Immutable inverted index over a tokenized corpus. Safe for concurrent
/// searches once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bm25Index {
    language: Language,
    /// token -> (doc_id, term frequency), sorted by doc_id.
    postings: BTreeMap<String, Vec<(String, u32)>>,
    doc_lengths: BTreeMap<String, u32>,
    avgdl: f64,
    /// Hash of the corpus this index was built from; the persisted index is
    /// a cache keyed by this value, never a source of truth.
    fingerprint: u64,
}

/// Stable hash of a (doc_id, text) corpus, for cache validation.
pub fn corpus_fingerprint<'a>(docs: impl Iterator<Item = (&'a str, &'a str)>) -> u64 {
    let mut acc: u64 = 0xcbf2_9ce4_8422_2325;
    for (id, text) in docs {
        acc ^= fnv1a64(id.as_bytes()).rotate_left(1) ^ fnv1a64(text.as_bytes());
        acc = acc.wrapping_mul(0x0000_0100_0000_01b3);
    }
    acc
}

impl Bm25Index {
    /// Builds the index; doc ids must be unique. Empty documents get
    /// length 0 and never match.
    pub fn build(
        docs: &[(String, String)],
        language: Language,
    ) -> Result<Bm25Index, RetrievalError> {
        let mut doc_lengths: BTreeMap<String, u32> = BTreeMap::new();
        let mut postings: BTreeMap<String, BTreeMap<String, u32>> = BTreeMap::new();
        for (id, text) in docs {
            if doc_lengths.contains_key(id) {
                return Err(RetrievalError::DuplicateDocId(id.clone()));
            }
            let tokens = tokenize_code(text, language);
            doc_lengths.insert(id.clone(), tokens.len() as u32);
            for token in tokens {
                *postings
                    .entry(token)
                    .or_default()
                    .entry(id.clone())
                    .or_insert(0) += 1;
            }
        }
        let n = doc_lengths.len();
        let avgdl = if n == 0 {
            0.0
        } else {
            doc_lengths.values().map(|&l| l as f64).sum::<f64>() / n as f64
        };
        Ok(Bm25Index {
            language,
            postings: postings
                .into_iter()
                .map(|(t, m)| (t, m.into_iter().collect()))
                .collect(),
            doc_lengths,
            avgdl,
            fingerprint: corpus_fingerprint(docs.iter().map(|(i, t)| (i.as_str(), t.as_str()))),
        })
    }

    pub fn doc_count(&self) -> usize {
        self.doc_lengths.len()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn language(&self) -> Language {
        self.language
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn contains_doc(&self, doc_id: &str) -> bool {
        self.doc_lengths.contains_key(doc_id)
    }

    fn term_frequency(&self, token: &str, doc_id: &str) -> u32 {
        self.postings
            .get(token)
            .and_then(|list| {
                list.binary_search_by(|(id, _)| id.as_str().cmp(doc_id))
                    .ok()
                    .map(|i| list[i].1)
            })
            .unwrap_or(0)
    }

    fn doc_frequency(&self, token: &str) -> usize {
        self.postings.get(token).map(Vec::len).unwrap_or(0)
    }

    fn idf(&self, token: &str) -> f64 {
        let n = self.doc_count() as f64;
        let nw = self.doc_frequency(token) as f64;
        (1.0 + (n - nw + 0.5) / (nw + 0.5)).ln()
    }

    /// BM25 score of one document for the given query tokens. Tokens absent
    /// from the document contribute zero.
    pub fn score(
        &self,
        query_tokens: &[String],
        doc_id: &str,
        config: &RetrievalConfig,
    ) -> Result<f64, RetrievalError> {
        let Some(&dl) = self.doc_lengths.get(doc_id) else {
            return Err(RetrievalError::UnknownDocId(doc_id.to_string()));
        };
        let mut total = 0.0;
        for token in query_tokens {
            let tf = self.term_frequency(token, doc_id) as f64;
            if tf == 0.0 {
                continue;
            }
            let norm = 1.0 - config.b + config.b * (dl as f64) / self.avgdl;
            total += self.idf(token) * tf * (config.k1 + 1.0) / (tf + config.k1 * norm);
        }
        Ok(total)
    }

    /// Top-n documents by BM25 score, descending; ties break by ascending
    /// doc id. Returns every document (zero scorers included) when the
    /// corpus holds fewer than `n`.
    pub fn search(
        &self,
        query_text: &str,
        query_language: Language,
        n: usize,
        config: &RetrievalConfig,
    ) -> Result<Vec<RetrievalResult>, RetrievalError> {
        if n == 0 {
            return Err(RetrievalError::InvalidTopN);
        }
        if self.doc_count() == 0 {
            return Ok(Vec::new());
        }
        let query_tokens = tokenize_code(query_text, query_language);
        let mut scores: BTreeMap<&str, f64> = BTreeMap::new();
        for token in &query_tokens {
            let idf = self.idf(token);
            if let Some(list) = self.postings.get(token) {
                for (doc_id, tf) in list {
                    let dl = self.doc_lengths[doc_id] as f64;
                    let tf = *tf as f64;
                    let norm = 1.0 - config.b + config.b * dl / self.avgdl;
                    *scores.entry(doc_id).or_insert(0.0) +=
                        idf * tf * (config.k1 + 1.0) / (tf + config.k1 * norm);
                }
            }
        }
        let mut ranked: Vec<RetrievalResult> = self
            .doc_lengths
            .keys()
            .map(|id| RetrievalResult {
                doc_id: id.clone(),
                bm25_score: scores.get(id.as_str()).copied().unwrap_or(0.0),
                rerank_score: None,
            })
            .collect();
        // BTreeMap iteration pre-sorts by doc_id, so a stable sort on the
        // score alone leaves ties in ascending id order.
        ranked.sort_by(|a, b| b.bm25_score.total_cmp(&a.bm25_score));
        ranked.truncate(n);
        Ok(ranked)
    }

    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| RetrievalError::IndexIo(e.to_string()))?;
        }
        let body =
            serde_json::to_string(self).map_err(|e| RetrievalError::IndexIo(e.to_string()))?;
        fs::write(path, body).map_err(|e| RetrievalError::IndexIo(e.to_string()))
    }

    /// Loads a cached index; `None` when missing or unreadable.
    pub fn load(path: &Path) -> Option<Bm25Index> {
        let raw = fs::read_to_string(path).ok()?;
        serde_json::from_str(&raw).ok()
    }
}
