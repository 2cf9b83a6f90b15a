//! Retrieval-augmented code translation for incremental repository migration.
//!
//! The pipeline maintains a knowledge base of three knowledge kinds
//! (dependency usage examples, target-language code samples, verified
//! translation pairs), retrieves per-task knowledge with BM25 plus embedding
//! re-ranking, drives an LLM through knowledge-augmented translation with one
//! self-debug round, verifies candidates by compiling and testing, and scores
//! runs with match-based and execution-based metrics.

pub mod codeparse;
pub mod config;
pub mod depextract;
pub mod kbstore;
pub mod lang;
pub mod metrics;
pub mod orchestrator;
pub mod promptgen;
pub mod retrieval;
pub mod task;

pub(crate) mod hashing;

pub use config::Config;
pub use kbstore::KnowledgeBase;
pub use lang::Language;
pub use task::TranslationTask;
