//! Application configuration: a TOML file (comment-capable key/value
//! format) with per-model gateway entries, corpus, judge, and run settings.
//! CLI flags override file values, which override built-in defaults.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusFormat, CorpusSpec};
use crate::gateway::GatewayConfig;
use crate::pipeline::PipelineMode;
use crate::prompts::{Dimension, LanguageTag, Metric, PromptForge};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn default_run_dir() -> PathBuf {
    PathBuf::from("runs")
}
fn default_seed() -> u64 {
    42
}
fn default_runs() -> u32 {
    3
}
fn default_src() -> String {
    "en".into()
}
fn default_tgt() -> String {
    "zh".into()
}
fn default_modes() -> Vec<String> {
    vec!["base".into(), "full".into()]
}
fn default_models() -> Vec<String> {
    vec!["mock".into()]
}
fn default_variant() -> String {
    "V1".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub name: String,
    pub path: PathBuf,
    #[serde(default = "default_csv")]
    pub format: String,
    pub text_column: String,
    #[serde(default)]
    pub id_column: Option<String>,
    #[serde(default = "default_src")]
    pub language: String,
}

fn default_csv() -> String {
    "csv".into()
}

impl CorpusConfig {
    /// Config for a plain CSV corpus with the conventional column names,
    /// as used by command-line `--corpus` overrides.
    pub fn from_path(path: PathBuf) -> Self {
        let format = match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") => "jsonl",
            _ => "csv",
        };
        CorpusConfig {
            name: path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("corpus")
                .to_string(),
            path,
            format: format.into(),
            text_column: "text".into(),
            id_column: Some("id".into()),
            language: default_src(),
        }
    }

    pub fn to_spec(&self) -> Result<CorpusSpec, ConfigError> {
        Ok(CorpusSpec {
            name: self.name.clone(),
            path: self.path.clone(),
            format: CorpusFormat::parse(&self.format)
                .ok_or_else(|| ConfigError::Invalid(format!("corpus format {}", self.format)))?,
            text_column: self.text_column.clone(),
            id_column: self.id_column.clone(),
            language: LanguageTag::parse(&self.language)
                .map_err(|e| ConfigError::Invalid(e.to_string()))?,
        })
    }
}

/// One named model's gateway settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayEntry {
    /// "mock" or "http".
    pub backend: String,
    pub base_url: String,
    pub api_key_env: String,
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    pub rate_limit_count: usize,
    pub rate_limit_window_ms: u64,
    pub max_concurrency: usize,
    pub cache_dir: Option<PathBuf>,
    /// Omitted from the wire when unset so provider defaults apply.
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
}

impl Default for GatewayEntry {
    fn default() -> Self {
        let g = GatewayConfig::default();
        Self {
            backend: "mock".into(),
            base_url: g.base_url,
            api_key_env: g.api_key_env,
            max_retries: g.max_retries,
            backoff_base_ms: g.backoff_base_ms,
            rate_limit_count: g.rate_limit.0,
            rate_limit_window_ms: g.rate_limit.1,
            max_concurrency: g.max_concurrency,
            cache_dir: None,
            temperature: None,
            max_tokens: None,
        }
    }
}

impl GatewayEntry {
    /// Entry for the offline mock backend: no point throttling or backing
    /// off against an in-process script.
    pub fn mock() -> Self {
        Self {
            backend: "mock".into(),
            backoff_base_ms: 1,
            rate_limit_count: 1_000_000,
            rate_limit_window_ms: 1_000,
            max_concurrency: 16,
            ..Self::default()
        }
    }

    pub fn to_gateway_config(&self) -> GatewayConfig {
        GatewayConfig {
            base_url: self.base_url.clone(),
            api_key_env: self.api_key_env.clone(),
            max_retries: self.max_retries,
            backoff_base_ms: self.backoff_base_ms,
            rate_limit: (self.rate_limit_count, self.rate_limit_window_ms),
            max_concurrency: self.max_concurrency,
            cache_dir: self.cache_dir.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct JudgeConfig {
    pub model: String,
    pub metrics: Vec<String>,
    pub dimensions: Vec<String>,
    pub judge_runs: u32,
}

impl Default for JudgeConfig {
    fn default() -> Self {
        Self {
            model: "mock".into(),
            metrics: vec!["sqm".into(), "stars".into()],
            dimensions: vec!["humour".into(), "fluency".into(), "coherence".into()],
            judge_runs: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AppConfig {
    pub run_dir: PathBuf,
    pub seed: u64,
    pub runs: u32,
    /// Sample size; 0 means the whole corpus.
    pub n: usize,
    pub src: String,
    pub tgt: String,
    pub modes: Vec<String>,
    pub models: Vec<String>,
    pub prompt_variant: String,
    pub back_translate: bool,
    pub prompt_dir: Option<PathBuf>,
    pub corpus: Option<CorpusConfig>,
    pub gateway: BTreeMap<String, GatewayEntry>,
    pub judge: JudgeConfig,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            run_dir: default_run_dir(),
            seed: default_seed(),
            runs: default_runs(),
            n: 0,
            src: default_src(),
            tgt: default_tgt(),
            modes: default_modes(),
            models: default_models(),
            prompt_variant: default_variant(),
            back_translate: false,
            prompt_dir: None,
            corpus: None,
            gateway: BTreeMap::new(),
            judge: JudgeConfig::default(),
        }
    }
}

impl AppConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Gateway entry for a model name. `mock` gets an implicit default
    /// entry so offline runs need no config file.
    pub fn gateway_entry(&self, model: &str) -> Result<GatewayEntry, ConfigError> {
        if let Some(entry) = self.gateway.get(model) {
            return Ok(entry.clone());
        }
        if model == "mock" {
            return Ok(GatewayEntry::mock());
        }
        Err(ConfigError::Invalid(format!(
            "model {model} has no [gateway.{model}] entry"
        )))
    }

    pub fn src_tag(&self) -> Result<LanguageTag, ConfigError> {
        LanguageTag::parse(&self.src).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn tgt_tag(&self) -> Result<LanguageTag, ConfigError> {
        LanguageTag::parse(&self.tgt).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn mode_list(&self) -> Result<Vec<PipelineMode>, ConfigError> {
        self.modes
            .iter()
            .map(|m| {
                PipelineMode::parse(m)
                    .ok_or_else(|| ConfigError::Invalid(format!("unknown mode: {m}")))
            })
            .collect()
    }

    pub fn metric_list(&self) -> Result<Vec<Metric>, ConfigError> {
        self.judge
            .metrics
            .iter()
            .map(|m| {
                Metric::parse(m).ok_or_else(|| ConfigError::Invalid(format!("unknown metric: {m}")))
            })
            .collect()
    }

    pub fn dimension_list(&self) -> Result<Vec<Dimension>, ConfigError> {
        self.judge
            .dimensions
            .iter()
            .map(|d| {
                Dimension::parse(d)
                    .ok_or_else(|| ConfigError::Invalid(format!("unknown dimension: {d}")))
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let src = self.src_tag()?;
        let tgt = self.tgt_tag()?;
        if src.code == tgt.code {
            return Err(ConfigError::Invalid(format!(
                "SameLanguage: src and tgt are both {}",
                src.code
            )));
        }
        if self.runs < 1 {
            return Err(ConfigError::Invalid("runs must be >= 1".into()));
        }
        self.mode_list()?;
        self.metric_list()?;
        self.dimension_list()?;
        PromptForge::new(&self.prompt_variant)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        for model in &self.models {
            self.gateway_entry(model)?;
        }
        self.gateway_entry(&self.judge.model)?;
        if let Some(c) = &self.corpus {
            c.to_spec()?;
        }
        Ok(())
    }
}
