//! Run configuration: one structured file, overridable by CLI flags.
//! Secrets never live here; the LLM and embedder read credentials from the
//! environment.

use crate::lang::Language;
use crate::metrics::CodeBleuWeights;
use crate::orchestrator::{LlmParams, PipelineOptions, VerifyLimits};
use crate::promptgen::{ExtractMode, DEFAULT_ERROR_BUDGET};
use crate::retrieval::RetrievalConfig;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unreadable config {path}: {message}")]
    Unreadable { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VerifierMode {
    /// Compile and test with the real toolchain.
    #[default]
    Toolchain,
    /// Syntax check plus reference comparison; no toolchain needed.
    Stub,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifySettings {
    pub mode: VerifierMode,
    pub build_timeout_secs: u64,
    pub test_timeout_secs: u64,
    pub keep_workspaces: bool,
}

impl Default for VerifySettings {
    fn default() -> Self {
        let limits = VerifyLimits::default();
        VerifySettings {
            mode: VerifierMode::Toolchain,
            build_timeout_secs: limits.build_timeout_secs,
            test_timeout_secs: limits.test_timeout_secs,
            keep_workspaces: false,
        }
    }
}

impl VerifySettings {
    pub fn limits(&self) -> VerifyLimits {
        VerifyLimits {
            build_timeout_secs: self.build_timeout_secs,
            test_timeout_secs: self.test_timeout_secs,
        }
    }
}

/// Corpus refresh hooks for `kb sync`: directories watched for new project
/// checkouts, plus an optional fetch command run first. Remote crawling is
/// out of scope; the hook is the extension point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct SyncSettings {
    pub watch_dirs: Vec<PathBuf>,
    pub fetch_command: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptSettings {
    pub extract_mode: ExtractMode,
    pub error_budget_bytes: usize,
    pub attach_bundle_on_repair: bool,
}

impl Default for PromptSettings {
    fn default() -> Self {
        PromptSettings {
            extract_mode: ExtractMode::LastBlock,
            error_budget_bytes: DEFAULT_ERROR_BUDGET,
            attach_bundle_on_repair: false,
        }
    }
}

/// Top-level configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub kb_path: PathBuf,
    pub run_dir: PathBuf,
    pub target_language: Language,
    pub retrieval: RetrievalConfig,
    pub llm: LlmParams,
    /// "builtin-hash" or the URL of a remote embedding endpoint.
    pub embedder: String,
    pub codebleu_weights: CodeBleuWeights,
    pub repair_rounds: u32,
    pub verify: VerifySettings,
    pub sync: SyncSettings,
    pub prompt: PromptSettings,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            kb_path: PathBuf::from("kb"),
            run_dir: PathBuf::from("runs/latest"),
            target_language: Language::Rust,
            retrieval: RetrievalConfig::default(),
            llm: LlmParams::default(),
            embedder: "builtin-hash".to_string(),
            codebleu_weights: CodeBleuWeights::default(),
            repair_rounds: 1,
            verify: VerifySettings::default(),
            sync: SyncSettings::default(),
            prompt: PromptSettings::default(),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let raw = fs::read_to_string(path).map_err(|e| ConfigError::Unreadable {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let config: Config = serde_json::from_str(&raw).map_err(|e| ConfigError::Unreadable {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Fail-fast validation; no command touches the KB with a bad config.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.retrieval
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.codebleu_weights
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.llm.validate().map_err(ConfigError::Invalid)?;
        if self.embedder != "builtin-hash"
            && !self.embedder.starts_with("http://")
            && !self.embedder.starts_with("https://")
        {
            return Err(ConfigError::Invalid(format!(
                "embedder must be \"builtin-hash\" or an http(s) URL, got {:?}",
                self.embedder
            )));
        }
        if self.prompt.error_budget_bytes == 0 {
            return Err(ConfigError::Invalid(
                "prompt.error_budget_bytes must be positive".to_string(),
            ));
        }
        Ok(())
    }

    pub fn pipeline_options(&self) -> PipelineOptions {
        PipelineOptions {
            retrieval: self.retrieval.clone(),
            repair_rounds: self.repair_rounds,
            error_budget_bytes: self.prompt.error_budget_bytes,
            extract_mode: self.prompt.extract_mode,
            attach_bundle_on_repair: self.prompt.attach_bundle_on_repair,
            keep_workspaces: self.verify.keep_workspaces,
            workspace_root: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    #[test]
    fn default_config_is_valid_and_pins_published_parameters() {
        let config = Config::default();
        config.validate().unwrap();
        assert_eq!(config.retrieval.k1, 1.2);
        assert_eq!(config.retrieval.b, 0.75);
        assert_eq!(config.repair_rounds, 1);
        assert_eq!(config.llm.temperature, 0.0);
        assert_eq!(config.embedder, "builtin-hash");
    }

    #[test]
    fn load_round_trip_with_partial_file() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("config.json");
        fs::write(&path, r#"{"kb_path": "my-kb", "repair_rounds": 0}"#).unwrap();
        let config = Config::load(&path).unwrap();
        assert_eq!(config.kb_path, PathBuf::from("my-kb"));
        assert_eq!(config.repair_rounds, 0);
        // Everything else defaulted.
        assert_eq!(config.retrieval.n_samples, 100);
    }

    #[test]
    fn invalid_configs_fail_fast() {
        let mut config = Config::default();
        config.retrieval.k1 = -1.0;
        assert!(config.validate().is_err());

        let config = Config {
            embedder: "ftp://nope".to_string(),
            ..Default::default()
        };
        assert!(config.validate().is_err());

        let mut bad_weights = Config::default();
        bad_weights.codebleu_weights.alpha = 0.9;
        assert!(bad_weights.validate().is_err());

        let dir = TempDir::new().unwrap();
        let path = dir.path().join("config.json");
        fs::write(&path, "{ not json").unwrap();
        assert!(Config::load(&path).is_err());
    }

    #[test]
    fn pipeline_options_mirror_config() {
        let mut config = Config {
            repair_rounds: 2,
            ..Default::default()
        };
        config.verify.keep_workspaces = true;
        let options = config.pipeline_options();
        assert_eq!(options.repair_rounds, 2);
        assert!(options.keep_workspaces);
        assert_eq!(options.retrieval, config.retrieval);
    }
}
