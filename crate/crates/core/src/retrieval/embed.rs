//! Embedding providers and cosine re-ranking.
//!
//! The production provider is a remote endpoint speaking
//! `{model?, inputs: [text]} -> {vectors: [[real]]}`; the builtin fallback is
//! a deterministic hashed token-frequency vector so the full pipeline runs
//! offline and reproducibly.

use super::tokenize::subtokens;
use super::{RetrievalError, RetrievalResult};
use crate::hashing::fnv1a64;
use serde::{Deserialize, Serialize};
use std::time::Duration;

pub const HASH_EMBEDDER_DIM: usize = 256;

/// Fixed-length embedding; the dimension is constant per provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn dimension(&self) -> usize {
        self.values.len()
    }
}

pub trait Embedder: Send + Sync {
    fn embed(&self, inputs: &[&str]) -> Result<Vec<EmbeddingVector>, RetrievalError>;
    fn dimension(&self) -> usize;
    fn name(&self) -> &'static str;
}

/// Deterministic signed-hash token-frequency embedder.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder {
            dim: HASH_EMBEDDER_DIM,
        }
    }
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        HashEmbedder { dim: dim.max(1) }
    }

    fn embed_one(&self, text: &str) -> EmbeddingVector {
        let mut values = vec![0.0; self.dim];
        let mut tokens = subtokens(text);
        if tokens.is_empty() && !text.trim().is_empty() {
            tokens.push(text.trim().to_string());
        }
        let had_tokens = !tokens.is_empty();
        for token in tokens {
            let h = fnv1a64(token.as_bytes());
            let idx = ((h >> 1) % self.dim as u64) as usize;
            let sign = if h & 1 == 0 { 1.0 } else { -1.0 };
            values[idx] += sign;
        }
        if had_tokens && values.iter().all(|v| *v == 0.0) {
            // Signed counts can cancel; keep non-empty inputs nonzero.
            values[0] = 1.0;
        }
        EmbeddingVector { values }
    }
}

impl Embedder for HashEmbedder {
    fn embed(&self, inputs: &[&str]) -> Result<Vec<EmbeddingVector>, RetrievalError> {
        Ok(inputs.iter().map(|t| self.embed_one(t)).collect())
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn name(&self) -> &'static str {
        "builtin-hash"
    }
}

/// Remote embedding endpoint client. Credentials come from the environment
/// variable named in `api_key_env`, sent as a bearer token when present.
pub struct RemoteEmbedder {
    pub endpoint: String,
    pub model: Option<String>,
    pub timeout: Duration,
    pub api_key_env: String,
    pub dimension: usize,
}

impl RemoteEmbedder {
    pub fn new(endpoint: impl Into<String>, model: Option<String>, dimension: usize) -> Self {
        RemoteEmbedder {
            endpoint: endpoint.into(),
            model,
            timeout: Duration::from_secs(60),
            api_key_env: "CODEPORT_API_KEY".to_string(),
            dimension,
        }
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<&'a str>,
    inputs: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

impl Embedder for RemoteEmbedder {
    fn embed(&self, inputs: &[&str]) -> Result<Vec<EmbeddingVector>, RetrievalError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .build()
            .into();
        let mut request = agent.post(&self.endpoint);
        if let Ok(key) = std::env::var(&self.api_key_env) {
            request = request.header("authorization", &format!("Bearer {key}"));
        }
        let body = EmbedRequest {
            model: self.model.as_deref(),
            inputs,
        };
        let mut response = request.send_json(&body).map_err(|e| {
            let retryable = matches!(
                &e,
                ureq::Error::StatusCode(code) if *code == 429 || *code >= 500
            ) || !matches!(&e, ureq::Error::StatusCode(_));
            RetrievalError::Embedding {
                message: e.to_string(),
                retryable,
            }
        })?;
        let parsed: EmbedResponse =
            response
                .body_mut()
                .read_json()
                .map_err(|e| RetrievalError::Embedding {
                    message: format!("bad response body: {e}"),
                    retryable: false,
                })?;
        if parsed.vectors.len() != inputs.len() {
            return Err(RetrievalError::Embedding {
                message: format!(
                    "expected {} vectors, got {}",
                    inputs.len(),
                    parsed.vectors.len()
                ),
                retryable: false,
            });
        }
        let dims: Vec<usize> = parsed.vectors.iter().map(Vec::len).collect();
        if dims.windows(2).any(|w| w[0] != w[1]) {
            return Err(RetrievalError::Embedding {
                message: "inconsistent vector dimensions".to_string(),
                retryable: false,
            });
        }
        Ok(parsed
            .vectors
            .into_iter()
            .map(|values| EmbeddingVector { values })
            .collect())
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn name(&self) -> &'static str {
        "remote"
    }
}

/// Cosine similarity, clamped to [-1, 1]; zero vectors score 0.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    let na: f64 = a.values.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.values.iter().map(|y| y * y).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// One lexical hit carrying its document text for re-ranking.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub result: RetrievalResult,
    pub text: String,
}

/// Re-ranks candidates by embedding cosine similarity against the query and
/// keeps the top `m`; ties keep the prior BM25 order. Embedding failures
/// surface so the caller can retry or fall back to lexical order.
pub fn rerank(
    query_text: &str,
    candidates: &[Candidate],
    embedder: &dyn Embedder,
    m: usize,
) -> Result<Vec<RetrievalResult>, RetrievalError> {
    if candidates.is_empty() || m == 0 {
        return Ok(Vec::new());
    }
    let mut inputs: Vec<&str> = Vec::with_capacity(candidates.len() + 1);
    inputs.push(query_text);
    inputs.extend(candidates.iter().map(|c| c.text.as_str()));
    let vectors = embedder.embed(&inputs)?;
    let (query_vec, doc_vecs) = vectors.split_first().expect("query vector present");

    let mut scored: Vec<RetrievalResult> = candidates
        .iter()
        .zip(doc_vecs)
        .map(|(c, v)| RetrievalResult {
            doc_id: c.result.doc_id.clone(),
            bm25_score: c.result.bm25_score,
            rerank_score: Some(cosine(query_vec, v)),
        })
        .collect();
    // Stable sort: equal rerank scores keep BM25 (input) order.
    scored.sort_by(|a, b| {
        b.rerank_score
            .unwrap_or(f64::NEG_INFINITY)
            .total_cmp(&a.rerank_score.unwrap_or(f64::NEG_INFINITY))
    });
    scored.truncate(m);
    Ok(scored)
}
