//! Candidate knowledge retrieval and re-ranking.
//!
//! Code-aware tokenization feeds an in-process BM25 inverted index; an
//! embedding provider re-ranks the lexical candidates by cosine similarity;
//! `assemble_bundle` puts the per-task knowledge triple together.

mod bm25;
mod bundle;
mod embed;
mod tokenize;

pub use bm25::{corpus_fingerprint, Bm25Index};
pub use bundle::{
    assemble_bundle, build_pair_index, build_sample_index, AssembledBundle, KnowledgeBundle,
    SAMPLE_INDEX_FILE,
};
pub use embed::{
    cosine, rerank, Candidate, Embedder, EmbeddingVector, HashEmbedder, RemoteEmbedder,
    HASH_EMBEDDER_DIM,
};
pub use tokenize::{subtokens, tokenize_code};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("duplicate doc id: {0}")]
    DuplicateDocId(String),
    #[error("unknown doc id: {0}")]
    UnknownDocId(String),
    #[error("top-n must be at least 1")]
    InvalidTopN,
    #[error("invalid retrieval config: {0}")]
    InvalidConfig(String),
    #[error("embedding failed: {message}")]
    Embedding { message: String, retryable: bool },
    #[error("index io: {0}")]
    IndexIo(String),
}

/// Ranking parameters and top-n/top-m cutoffs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    pub k1: f64,
    pub b: f64,
    /// BM25 candidates fetched for code samples.
    pub n_samples: usize,
    /// BM25 candidates fetched for translation pairs.
    pub n_pairs: usize,
    /// Code samples kept after re-ranking.
    pub m_samples: usize,
    /// Translation pairs kept after re-ranking.
    pub m_pairs: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            k1: 1.2,
            b: 0.75,
            n_samples: 100,
            n_pairs: 10,
            m_samples: 2,
            m_pairs: 1,
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        if self.k1 <= 0.0 || !self.k1.is_finite() {
            return Err(RetrievalError::InvalidConfig(format!("k1 = {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(RetrievalError::InvalidConfig(format!("b = {}", self.b)));
        }
        if self.m_samples > self.n_samples {
            return Err(RetrievalError::InvalidConfig(
                "m_samples exceeds n_samples".to_string(),
            ));
        }
        if self.m_pairs > self.n_pairs {
            return Err(RetrievalError::InvalidConfig(
                "m_pairs exceeds n_pairs".to_string(),
            ));
        }
        Ok(())
    }
}

/// One ranked document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub doc_id: String,
    pub bm25_score: f64,
    pub rerank_score: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_matches_published_parameters() {
        let cfg = RetrievalConfig::default();
        assert_eq!(cfg.k1, 1.2);
        assert_eq!(cfg.b, 0.75);
        assert_eq!(cfg.n_samples, 100);
        assert_eq!(cfg.n_pairs, 10);
        assert_eq!(cfg.m_samples, 2);
        assert_eq!(cfg.m_pairs, 1);
        cfg.validate().unwrap();
    }

    #[test]
    fn config_validation_catches_bad_values() {
        let cfg = RetrievalConfig {
            k1: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = RetrievalConfig {
            b: 1.5,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = RetrievalConfig {
            m_samples: 101,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
