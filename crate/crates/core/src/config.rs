//! Campaign configuration: loading, validation, defaulting, and the
//! stable config digest that keys run directories.
//!
//! Configs are TOML. Unknown keys are rejected with the offending key
//! named, so typos fail loudly. Secrets never live in the config file:
//! the search API key, search engine id, and LLM API key come from the
//! `NEWSTREND_SEARCH_API_KEY`, `NEWSTREND_SEARCH_ENGINE_ID`, and
//! `NEWSTREND_LLM_API_KEY` environment variables.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate_periods, CampaignScope, SourceLabel, TimePeriod};
use crate::trend::{PriorConfig, SamplerConfig};
use crate::util::sha256_hex;

pub const SEARCH_API_KEY_ENV: &str = "NEWSTREND_SEARCH_API_KEY";
pub const SEARCH_ENGINE_ID_ENV: &str = "NEWSTREND_SEARCH_ENGINE_ID";
pub const LLM_API_KEY_ENV: &str = "NEWSTREND_LLM_API_KEY";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Io { path: String, message: String },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {field}: {message}")]
    Validation { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Live,
    Fixtures,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Limits {
    pub max_results: usize,
    pub search_parallelism: usize,
    pub fetch_parallelism: usize,
    pub llm_parallelism: usize,
    pub llm_retries: u32,
    pub min_text_chars: usize,
    pub max_text_chars: usize,
    pub context_budget_chars: usize,
    pub fetch_timeout_secs: u64,
    pub politeness_delay_ms: u64,
    pub user_agent: String,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_results: 10,
            search_parallelism: 4,
            fetch_parallelism: 4,
            llm_parallelism: 2,
            llm_retries: 2,
            min_text_chars: crate::extract::DEFAULT_MIN_TEXT_CHARS,
            max_text_chars: crate::extract::DEFAULT_MAX_TEXT_CHARS,
            context_budget_chars: crate::llm::DEFAULT_CONTEXT_BUDGET_CHARS,
            fetch_timeout_secs: 30,
            politeness_delay_ms: 1000,
            user_agent: "Mozilla/5.0 (X11; Linux x86_64) newstrend/0.1".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSettings {
    pub endpoint: String,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self {
            endpoint: "https://www.googleapis.com/customsearch/v1".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LlmSettings {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
}

impl Default for LlmSettings {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".to_string(),
            model: "gpt-4o".to_string(),
            temperature: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub fixtures_dir: PathBuf,
    pub templates_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            fixtures_dir: PathBuf::from("fixtures"),
            templates_dir: PathBuf::from("templates"),
        }
    }
}

/// The full campaign configuration. Relative paths are resolved against
/// the config file's directory at load time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub query: String,
    pub candidates: Vec<String>,
    pub mode: RunMode,
    pub periods: Vec<TimePeriod>,
    pub sources: Vec<SourceLabel>,
    #[serde(default)]
    pub limits: Limits,
    #[serde(default)]
    pub search: SearchSettings,
    #[serde(default)]
    pub llm: LlmSettings,
    #[serde(default)]
    pub priors: PriorConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub paths: Paths,
}

impl CampaignConfig {
    /// Digest of the canonical encoding; stable under key reordering in
    /// the TOML source. Keys the run directory.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        sha256_hex(canonical.as_bytes())
    }

    pub fn scope(&self) -> CampaignScope {
        CampaignScope {
            candidates: self.candidates.clone(),
            period_indexes: self.periods.iter().map(|p| p.index).collect(),
            sources: self.sources.iter().map(|s| s.name.clone()).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.query.trim().is_empty() {
            return Err(invalid("query", "must be non-empty"));
        }
        if self.candidates.len() < 2 {
            return Err(invalid("candidates", "need at least 2 candidates"));
        }
        for c in &self.candidates {
            if c.trim().is_empty() {
                return Err(invalid("candidates", "candidate names must be non-empty"));
            }
        }
        let mut names = self.candidates.clone();
        names.sort();
        names.dedup();
        if names.len() != self.candidates.len() {
            return Err(invalid("candidates", "candidate names must be unique"));
        }
        validate_periods(&self.periods).map_err(|m| invalid("periods", m))?;
        if self.sources.is_empty() {
            return Err(invalid("sources", "need at least one source"));
        }
        let mut source_names: Vec<&str> = self.sources.iter().map(|s| s.name.as_str()).collect();
        source_names.sort();
        source_names.dedup();
        if source_names.len() != self.sources.len() {
            return Err(invalid("sources", "source names must be unique"));
        }
        if self.sources.iter().any(|s| s.name.trim().is_empty()) {
            return Err(invalid("sources", "source names must be non-empty"));
        }
        if self.limits.max_results == 0 {
            return Err(invalid("limits.max_results", "must be at least 1"));
        }
        if self.limits.min_text_chars == 0 || self.limits.max_text_chars < self.limits.min_text_chars {
            return Err(invalid(
                "limits.max_text_chars",
                "text budget must be at least min_text_chars",
            ));
        }
        self.priors
            .validate()
            .map_err(|e| invalid("priors", e.to_string()))?;
        self.sampler
            .validate()
            .map_err(|e| invalid("sampler", e.to_string()))?;
        Ok(())
    }
}

/// Loads, parses, validates, and defaults a config file. Unknown keys
/// are parse errors naming the key; validation errors name the field.
pub fn load_config(path: &Path) -> Result<CampaignConfig, ConfigError> {
    let body = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut config: CampaignConfig =
        toml::from_str(&body).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    // canonicalize so the digest does not depend on how the config path
    // was spelled
    let resolve = |p: &PathBuf| {
        let joined = if p.is_relative() { base.join(p) } else { p.clone() };
        joined.canonicalize().unwrap_or(joined)
    };
    config.paths.fixtures_dir = resolve(&config.paths.fixtures_dir);
    config.paths.templates_dir = resolve(&config.paths.templates_dir);
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn minimal_toml() -> String {
        r#"
query = "Kamala Harris AND Donald Trump"
candidates = ["Kamala Harris", "Donald Trump"]
mode = "fixtures"

[[periods]]
index = 0
start_date = "2024-08-01"
end_date = "2024-08-15"

[[periods]]
index = 1
start_date = "2024-08-16"
end_date = "2024-08-31"

[[sources]]
name = "Web sites"

[[sources]]
name = "CNN"
site_filter = "cnn.com"
"#
        .to_string()
    }

    fn write_config(body: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("campaign.toml");
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        (dir, path)
    }

    #[test]
    fn minimal_config_loads_with_defaults() {
        let (_dir, path) = write_config(&minimal_toml());
        let config = load_config(&path).unwrap();
        assert_eq!(config.limits.max_results, 10);
        assert_eq!(config.sampler.chains, 4);
        assert_eq!(config.llm.model, "gpt-4o");
        assert_eq!(config.priors.alpha.mean, 0.5);
        assert!(config.paths.fixtures_dir.is_absolute() || config.paths.fixtures_dir.starts_with(_dir.path()));
    }

    #[test]
    fn reversed_dates_fail_validation() {
        let body = minimal_toml().replace(
            "start_date = \"2024-08-01\"\nend_date = \"2024-08-15\"",
            "start_date = \"2024-08-15\"\nend_date = \"2024-08-01\"",
        );
        let (_dir, path) = write_config(&body);
        let err = load_config(&path).unwrap_err();
        assert!(matches!(err, ConfigError::Validation { ref field, .. } if field == "periods"));
    }

    #[test]
    fn unknown_key_is_a_parse_error_naming_the_key() {
        let body = format!("{}\nmodle = \"fixtures\"\n", minimal_toml());
        let (_dir, path) = write_config(&body);
        let err = load_config(&path).unwrap_err();
        match err {
            ConfigError::Parse(message) => {
                assert!(message.contains("modle"), "message: {message}")
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_source_names_rejected() {
        let body = format!(
            "{}\n[[sources]]\nname = \"CNN\"\nsite_filter = \"cnn.com\"\n",
            minimal_toml()
        );
        let (_dir, path) = write_config(&body);
        let err = load_config(&path).unwrap_err();
        assert!(matches!(err, ConfigError::Validation { ref field, .. } if field == "sources"));
    }

    #[test]
    fn digest_is_stable_under_key_reordering() {
        let (_dir, path) = write_config(&minimal_toml());
        let a = load_config(&path).unwrap();
        // same config with top-level keys in different order
        let reordered = r#"
candidates = ["Kamala Harris", "Donald Trump"]
mode = "fixtures"
query = "Kamala Harris AND Donald Trump"

[[periods]]
index = 0
start_date = "2024-08-01"
end_date = "2024-08-15"

[[periods]]
index = 1
start_date = "2024-08-16"
end_date = "2024-08-31"

[[sources]]
name = "Web sites"

[[sources]]
name = "CNN"
site_filter = "cnn.com"
"#;
        let (_dir2, path2) = write_config(reordered);
        let b = load_config(&path2).unwrap();
        // paths resolve against different temp dirs; align them before
        // comparing digests
        let mut b = b;
        b.paths = a.paths.clone();
        assert_eq!(a.digest(), b.digest());
    }

    #[test]
    fn digest_changes_with_content() {
        let (_dir, path) = write_config(&minimal_toml());
        let a = load_config(&path).unwrap();
        let mut b = a.clone();
        b.limits.max_results = 3;
        assert_ne!(a.digest(), b.digest());
    }
}
