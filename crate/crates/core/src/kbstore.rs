//! Persistent translation knowledge base.
//!
//! Three typed stores live under one directory as JSON-Lines files next to a
//! manifest: target-language code samples, verified translation pairs, and
//! dependency usage examples keyed by dependency source text. Mutating
//! operations persist before returning; the layout is diffable and can be
//! re-ingested by streaming one line at a time.
//!
//! Layout: `manifest.json`, `samples.jsonl`, `pairs.jsonl`, `dep_usage.jsonl`,
//! plus `index/` owned by the retrieval layer. Unknown fields on records are
//! preserved on rewrite.

use crate::hashing::{content_id, seeded_shuffle};
use crate::lang::Language;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

const MANIFEST_FILE: &str = "manifest.json";
const SAMPLES_FILE: &str = "samples.jsonl";
const PAIRS_FILE: &str = "pairs.jsonl";
const USAGE_FILE: &str = "dep_usage.jsonl";

#[derive(Debug, Error)]
pub enum KbError {
    #[error("unreadable path {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest unreadable: {0}")]
    ManifestUnreadable(String),
    #[error("schema_version {found} is newer than supported {supported}")]
    SchemaTooNew { found: u32, supported: u32 },
    #[error("corrupt store {file} line {line}: {message}")]
    CorruptStore {
        file: String,
        line: usize,
        message: String,
    },
    #[error("language mismatch: sample is {sample}, store is {store}")]
    LanguageMismatch { sample: Language, store: Language },
    #[error("unverified pair")]
    UnverifiedPair,
    #[error("fraction out of range: {0}")]
    FractionOutOfRange(f64),
    #[error("snapshot path {0} exists and is not a knowledge base")]
    SnapshotPathOccupied(PathBuf),
}

/// Store metadata. `update_interval_secs` is the corpus refresh cadence
/// honored by `kb sync`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KbManifest {
    pub schema_version: u32,
    pub target_language: Language,
    pub excluded_projects: BTreeSet<String>,
    pub created_at: u64,
    pub updated_at: u64,
    pub update_interval_secs: u64,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl KbManifest {
    fn new(target_language: Language) -> Self {
        let now = unix_now();
        KbManifest {
            schema_version: SCHEMA_VERSION,
            target_language,
            excluded_projects: BTreeSet::new(),
            created_at: now,
            updated_at: now,
            update_interval_secs: 86_400,
            extra: Map::new(),
        }
    }
}

/// One target-language function harvested from a corpus project.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeSample {
    pub id: String,
    pub project_name: String,
    pub file_path: String,
    pub function_text: String,
    pub language: Language,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl CodeSample {
    pub fn new(
        project_name: impl Into<String>,
        file_path: impl Into<String>,
        function_text: impl Into<String>,
        language: Language,
    ) -> Self {
        let project_name = project_name.into();
        let file_path = file_path.into();
        let function_text = function_text.into();
        let id = content_id("cs-", &[&project_name, &file_path, &function_text]);
        CodeSample {
            id,
            project_name,
            file_path,
            function_text,
            language,
            extra: Map::new(),
        }
    }

    /// Identity used for duplicate detection: exact (project, path, text).
    fn dedup_key(&self) -> (&str, &str, &str) {
        (&self.project_name, &self.file_path, &self.function_text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairProvenance {
    /// Harvested from a successful translation during a run.
    Evolved,
    /// Loaded from an external dataset.
    Imported,
}

/// A verified (source function, target function) translation pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationPair {
    pub id: String,
    pub source_language: Language,
    pub target_language: Language,
    pub source_function: String,
    pub target_function: String,
    pub provenance: PairProvenance,
    pub verified: bool,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl TranslationPair {
    pub fn new(
        source_language: Language,
        target_language: Language,
        source_function: impl Into<String>,
        target_function: impl Into<String>,
        provenance: PairProvenance,
        verified: bool,
    ) -> Self {
        let source_function = source_function.into();
        let target_function = target_function.into();
        let id = content_id(
            "tp-",
            &[
                source_language.tag(),
                target_language.tag(),
                &source_function,
                &target_function,
            ],
        );
        TranslationPair {
            id,
            source_language,
            target_language,
            source_function,
            target_function,
            provenance,
            verified,
            extra: Map::new(),
        }
    }
}

/// A dependency's source text paired with one invocation statement from the
/// project; `usage_example` is empty exactly when no invocation was found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependencyUsageExample {
    /// The key: source code of the dependency.
    pub dependency_code: String,
    pub usage_example: String,
    pub scope: String,
    /// Position of the retained statement; 0 when no usage exists.
    pub byte_offset: usize,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl DependencyUsageExample {
    pub fn new(
        dependency_code: impl Into<String>,
        usage_example: impl Into<String>,
        scope: impl Into<String>,
        byte_offset: usize,
    ) -> Self {
        DependencyUsageExample {
            dependency_code: dependency_code.into(),
            usage_example: usage_example.into(),
            scope: scope.into(),
            byte_offset,
            extra: Map::new(),
        }
    }

    pub fn empty(dependency_code: impl Into<String>) -> Self {
        DependencyUsageExample::new(dependency_code, "", "", 0)
    }

    pub fn has_usage(&self) -> bool {
        !self.usage_example.is_empty()
    }
}

/// Read-only counts, reported by `kb_stats`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KbStats {
    pub samples: usize,
    pub pairs: usize,
    pub usages: usize,
    pub excluded_projects: usize,
    pub schema_version: u32,
    pub target_language: Language,
}

/// Handle over the on-disk knowledge base.
///
/// Single-writer, multi-reader: mutating calls must be externally serialized;
/// every mutating call persists before it returns, so a write is visible to
/// handles opened after it completes. Cloning yields an in-memory view that
/// shares no state with the original.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    root: PathBuf,
    manifest: KbManifest,
    samples: Vec<CodeSample>,
    pairs: Vec<TranslationPair>,
    /// Keyed by dependency_code; BTreeMap keeps the on-disk order stable.
    usages: BTreeMap<String, DependencyUsageExample>,
}

impl KnowledgeBase {
    /// Opens the knowledge base at `root`, creating an empty one with a fresh
    /// manifest when none exists. New stores default to Rust as the target
    /// language; use [`KnowledgeBase::open_or_create`] to choose.
    pub fn open(root: impl AsRef<Path>) -> Result<KnowledgeBase, KbError> {
        KnowledgeBase::open_or_create(root, Language::Rust)
    }

    pub fn open_or_create(
        root: impl AsRef<Path>,
        target_language: Language,
    ) -> Result<KnowledgeBase, KbError> {
        let root = root.as_ref().to_path_buf();
        let manifest_path = root.join(MANIFEST_FILE);
        if !manifest_path.exists() {
            fs::create_dir_all(&root).map_err(|e| io_err(&root, e))?;
            let kb = KnowledgeBase {
                root,
                manifest: KbManifest::new(target_language),
                samples: Vec::new(),
                pairs: Vec::new(),
                usages: BTreeMap::new(),
            };
            kb.persist_manifest()?;
            return Ok(kb);
        }

        let raw = fs::read_to_string(&manifest_path).map_err(|e| io_err(&manifest_path, e))?;
        let manifest: KbManifest =
            serde_json::from_str(&raw).map_err(|e| KbError::ManifestUnreadable(e.to_string()))?;
        if manifest.schema_version < 1 {
            return Err(KbError::ManifestUnreadable(
                "schema_version must be at least 1".to_string(),
            ));
        }
        if manifest.schema_version > SCHEMA_VERSION {
            return Err(KbError::SchemaTooNew {
                found: manifest.schema_version,
                supported: SCHEMA_VERSION,
            });
        }

        let samples: Vec<CodeSample> = read_jsonl(&root.join(SAMPLES_FILE))?;
        let pairs: Vec<TranslationPair> = read_jsonl(&root.join(PAIRS_FILE))?;
        let usage_list: Vec<DependencyUsageExample> = read_jsonl(&root.join(USAGE_FILE))?;
        let mut usages = BTreeMap::new();
        for u in usage_list {
            usages.insert(u.dependency_code.clone(), u);
        }
        Ok(KnowledgeBase {
            root,
            manifest,
            samples,
            pairs,
            usages,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &KbManifest {
        &self.manifest
    }

    pub fn index_dir(&self) -> PathBuf {
        self.root.join("index")
    }

    pub fn samples(&self) -> &[CodeSample] {
        &self.samples
    }

    pub fn pairs(&self) -> &[TranslationPair] {
        &self.pairs
    }

    pub fn usages(&self) -> impl Iterator<Item = &DependencyUsageExample> {
        self.usages.values()
    }

    pub fn usage_for(&self, dependency_code: &str) -> Option<&DependencyUsageExample> {
        self.usages.get(dependency_code)
    }

    /// Appends code samples, skipping exact duplicates and samples from
    /// excluded projects. Returns the number actually added.
    pub fn add_code_samples(&mut self, samples: Vec<CodeSample>) -> Result<usize, KbError> {
        for s in &samples {
            if s.language != self.manifest.target_language {
                return Err(KbError::LanguageMismatch {
                    sample: s.language,
                    store: self.manifest.target_language,
                });
            }
        }
        let mut seen: BTreeSet<(String, String, String)> = self
            .samples
            .iter()
            .map(|s| {
                let (a, b, c) = s.dedup_key();
                (a.to_string(), b.to_string(), c.to_string())
            })
            .collect();
        let mut added = 0;
        for s in samples {
            if s.function_text.is_empty()
                || self.manifest.excluded_projects.contains(&s.project_name)
            {
                continue;
            }
            let (a, b, c) = s.dedup_key();
            let key = (a.to_string(), b.to_string(), c.to_string());
            if seen.insert(key) {
                self.samples.push(s);
                added += 1;
            }
        }
        if added > 0 {
            self.persist_samples()?;
            self.touch()?;
        }
        Ok(added)
    }

    /// Stores a verified translation pair and returns its id. Re-inserting an
    /// identical pair returns the existing id without growing the store.
    pub fn add_translation_pair(&mut self, pair: TranslationPair) -> Result<String, KbError> {
        if !pair.verified {
            return Err(KbError::UnverifiedPair);
        }
        if let Some(existing) = self.pairs.iter().find(|p| p.id == pair.id) {
            return Ok(existing.id.clone());
        }
        let id = pair.id.clone();
        self.pairs.push(pair);
        self.persist_pairs()?;
        self.touch()?;
        Ok(id)
    }

    /// Merges dependency usage examples keyed by dependency source text. On a
    /// key collision the entry with the smaller byte offset wins, so the first
    /// occurrence is retained across incremental evolution writes. Returns the
    /// number of entries inserted or replaced.
    pub fn add_dependency_examples(
        &mut self,
        examples: Vec<DependencyUsageExample>,
    ) -> Result<usize, KbError> {
        let mut changed = 0;
        for ex in examples {
            match self.usages.get(&ex.dependency_code) {
                Some(existing) => {
                    let replace = if existing.has_usage() == ex.has_usage() {
                        ex.has_usage() && ex.byte_offset < existing.byte_offset
                    } else {
                        // A real usage always beats an empty placeholder.
                        ex.has_usage()
                    };
                    if replace {
                        self.usages.insert(ex.dependency_code.clone(), ex);
                        changed += 1;
                    }
                }
                None => {
                    self.usages.insert(ex.dependency_code.clone(), ex);
                    changed += 1;
                }
            }
        }
        if changed > 0 {
            self.persist_usages()?;
            self.touch()?;
        }
        Ok(changed)
    }

    /// Removes every code sample from the named projects (exact,
    /// case-sensitive match) and records the names so later ingestion rejects
    /// them. Returns the number of samples removed.
    pub fn apply_exclusion(&mut self, project_names: &BTreeSet<String>) -> Result<usize, KbError> {
        let before = self.samples.len();
        self.samples
            .retain(|s| !project_names.contains(&s.project_name));
        let removed = before - self.samples.len();
        let mut grew = false;
        for name in project_names {
            grew |= self.manifest.excluded_projects.insert(name.clone());
        }
        if removed > 0 {
            self.persist_samples()?;
        }
        if removed > 0 || grew {
            self.touch()?;
        }
        Ok(removed)
    }

    /// Materializes a staged copy of this knowledge base at a sibling path,
    /// retaining `floor(fraction * n)` usage examples (non-retained
    /// dependencies keep their key with an empty usage), `floor(fraction * p)`
    /// projects' worth of code samples, and `floor(fraction * m)` pairs.
    /// Selection is deterministic given `seed`.
    pub fn snapshot_fraction(&self, fraction: f64, seed: u64) -> Result<KnowledgeBase, KbError> {
        if !(0.0..=1.0).contains(&fraction) || fraction.is_nan() {
            return Err(KbError::FractionOutOfRange(fraction));
        }
        let path = self.snapshot_path(fraction, seed);
        if path.exists() {
            if path.join(MANIFEST_FILE).exists() {
                fs::remove_dir_all(&path).map_err(|e| io_err(&path, e))?;
            } else if fs::read_dir(&path)
                .map_err(|e| io_err(&path, e))?
                .next()
                .is_some()
            {
                return Err(KbError::SnapshotPathOccupied(path));
            }
        }

        let keep = |n: usize| (fraction * n as f64).floor() as usize;

        // Projects: keep whole projects' worth of samples.
        let mut projects: Vec<String> = {
            let set: BTreeSet<&str> = self
                .samples
                .iter()
                .map(|s| s.project_name.as_str())
                .collect();
            set.into_iter().map(|s| s.to_string()).collect()
        };
        seeded_shuffle(&mut projects, seed ^ 0x01);
        let kept_projects: BTreeSet<String> = projects
            .into_iter()
            .take(keep_count_projects(fraction, &self.samples))
            .collect();
        let samples: Vec<CodeSample> = self
            .samples
            .iter()
            .filter(|s| kept_projects.contains(&s.project_name))
            .cloned()
            .collect();

        let mut pair_ids: Vec<String> = self.pairs.iter().map(|p| p.id.clone()).collect();
        pair_ids.sort();
        seeded_shuffle(&mut pair_ids, seed ^ 0x02);
        let kept_pairs: BTreeSet<String> =
            pair_ids.into_iter().take(keep(self.pairs.len())).collect();
        let pairs: Vec<TranslationPair> = self
            .pairs
            .iter()
            .filter(|p| kept_pairs.contains(&p.id))
            .cloned()
            .collect();

        let mut usage_keys: Vec<String> = self.usages.keys().cloned().collect();
        seeded_shuffle(&mut usage_keys, seed ^ 0x03);
        let kept_usages: BTreeSet<String> = usage_keys
            .into_iter()
            .take(keep(self.usages.len()))
            .collect();
        let usages: BTreeMap<String, DependencyUsageExample> = self
            .usages
            .iter()
            .map(|(k, v)| {
                let record = if kept_usages.contains(k) {
                    v.clone()
                } else {
                    DependencyUsageExample::empty(k.clone())
                };
                (k.clone(), record)
            })
            .collect();

        let mut manifest = self.manifest.clone();
        let now = unix_now();
        manifest.created_at = now;
        manifest.updated_at = now;
        let kb = KnowledgeBase {
            root: path.clone(),
            manifest,
            samples,
            pairs,
            usages,
        };
        fs::create_dir_all(&path).map_err(|e| io_err(&path, e))?;
        kb.persist_manifest()?;
        kb.persist_samples()?;
        kb.persist_pairs()?;
        kb.persist_usages()?;
        Ok(kb)
    }

    fn snapshot_path(&self, fraction: f64, seed: u64) -> PathBuf {
        let name = self
            .root
            .file_name()
            .map(|n| n.to_string_lossy().to_string())
            .unwrap_or_else(|| "kb".to_string());
        let pct = (fraction * 100.0).round() as u32;
        let sibling = format!("{name}-frac{pct:03}-seed{seed}");
        match self.root.parent() {
            Some(parent) if parent.as_os_str().is_empty() => PathBuf::from(sibling),
            Some(parent) => parent.join(sibling),
            None => PathBuf::from(sibling),
        }
    }

    pub fn stats(&self) -> KbStats {
        KbStats {
            samples: self.samples.len(),
            pairs: self.pairs.len(),
            usages: self.usages.len(),
            excluded_projects: self.manifest.excluded_projects.len(),
            schema_version: self.manifest.schema_version,
            target_language: self.manifest.target_language,
        }
    }

    /// Set of project names currently present in the sample store.
    pub fn sample_projects(&self) -> BTreeSet<String> {
        self.samples
            .iter()
            .map(|s| s.project_name.clone())
            .collect()
    }

    pub fn set_update_interval(&mut self, secs: u64) -> Result<(), KbError> {
        self.manifest.update_interval_secs = secs;
        self.persist_manifest()
    }

    /// When the last corpus sync completed, if any.
    pub fn last_sync_at(&self) -> Option<u64> {
        self.manifest
            .extra
            .get("last_sync_at")
            .and_then(Value::as_u64)
    }

    /// Records a completed corpus sync.
    pub fn mark_synced(&mut self) -> Result<(), KbError> {
        self.manifest
            .extra
            .insert("last_sync_at".to_string(), Value::from(unix_now()));
        self.touch()
    }

    fn touch(&mut self) -> Result<(), KbError> {
        self.manifest.updated_at = unix_now();
        self.persist_manifest()
    }

    fn persist_manifest(&self) -> Result<(), KbError> {
        let path = self.root.join(MANIFEST_FILE);
        let body = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        write_atomic(&path, body.as_bytes())
    }

    fn persist_samples(&self) -> Result<(), KbError> {
        write_jsonl(&self.root.join(SAMPLES_FILE), self.samples.iter())
    }

    fn persist_pairs(&self) -> Result<(), KbError> {
        write_jsonl(&self.root.join(PAIRS_FILE), self.pairs.iter())
    }

    fn persist_usages(&self) -> Result<(), KbError> {
        write_jsonl(&self.root.join(USAGE_FILE), self.usages.values())
    }
}

fn keep_count_projects(fraction: f64, samples: &[CodeSample]) -> usize {
    let distinct: BTreeSet<&str> = samples.iter().map(|s| s.project_name.as_str()).collect();
    (fraction * distinct.len() as f64).floor() as usize
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn io_err(path: &Path, source: std::io::Error) -> KbError {
    KbError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, KbError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let raw = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| KbError::CorruptStore {
            file: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

fn write_jsonl<'a, T: Serialize + 'a>(
    path: &Path,
    records: impl Iterator<Item = &'a T>,
) -> Result<(), KbError> {
    let mut buf = Vec::new();
    for r in records {
        let line = serde_json::to_string(r).expect("record serializes");
        buf.extend_from_slice(line.as_bytes());
        buf.push(b'\n');
    }
    write_atomic(path, &buf)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), KbError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
        f.write_all(bytes).map_err(|e| io_err(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}
