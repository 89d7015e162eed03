//! The JSON configuration file: engine settings, chat backend, analysis.

use std::fs;
use std::path::{Path, PathBuf};

use ebg_core::analysis::FdSteps;
use ebg_core::engine::EngineConfig;
use ebg_core::llm::{DecodingParams, ReplayMode};
use serde::{Deserialize, Serialize};

pub const ENV_API_URL: &str = "EBG_API_URL";
pub const ENV_API_KEY: &str = "EBG_API_KEY";
pub const ENV_MODEL: &str = "EBG_MODEL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendMode {
    #[default]
    Live,
    Replay,
    /// Live calls, with every exchange appended to the run's transcript.
    Record,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub mode: BackendMode,
    /// Full URL of a chat-completions endpoint.
    pub endpoint_url: Option<String>,
    /// Usually supplied through the environment; never written back out.
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub transcript: Option<PathBuf>,
    pub replay_mode: ReplayMode,
    pub timeout_secs: u64,
    /// Extra tries for transport errors, 429 and 5xx before giving up on a call.
    pub http_retries: u32,
    pub retry_backoff_ms: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        let decoding = DecodingParams::default();
        BackendConfig {
            mode: BackendMode::Live,
            endpoint_url: None,
            api_key: None,
            model: decoding.model,
            temperature: decoding.temperature,
            max_tokens: decoding.max_tokens,
            transcript: None,
            replay_mode: ReplayMode::Strict,
            timeout_secs: 120,
            http_retries: 3,
            retry_backoff_ms: 1000,
        }
    }
}

impl BackendConfig {
    pub fn decoding(&self) -> DecodingParams {
        DecodingParams {
            model: self.model.clone(),
            temperature: self.temperature,
            max_tokens: self.max_tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub sobol_base_samples: usize,
    pub curvature_points: usize,
    pub fd_steps: FdSteps,
    pub seed: u64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            sobol_base_samples: 1024,
            curvature_points: 1000,
            fd_steps: FdSteps::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub engine: EngineConfig,
    pub backend: BackendConfig,
    pub analysis: AnalysisConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_owned(),
            source,
        })
    }

    pub fn to_pretty_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Applies `EBG_API_URL`, `EBG_API_KEY` and `EBG_MODEL` from `lookup`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        if let Some(url) = lookup(ENV_API_URL).filter(|v| !v.is_empty()) {
            self.backend.endpoint_url = Some(url);
        }
        if let Some(key) = lookup(ENV_API_KEY).filter(|v| !v.is_empty()) {
            self.backend.api_key = Some(key);
        }
        if let Some(model) = lookup(ENV_MODEL).filter(|v| !v.is_empty()) {
            self.backend.model = model;
        }
    }

    /// Every violated constraint, as `field: message`.
    pub fn validate(&self) -> Vec<String> {
        let mut errors = self.engine.validate();
        let b = &self.backend;
        match b.mode {
            BackendMode::Live | BackendMode::Record => {
                if b.endpoint_url.as_deref().is_none_or(str::is_empty) {
                    errors.push(format!(
                        "backend.endpoint_url: required in {} mode (or set {ENV_API_URL})",
                        mode_name(b.mode)
                    ));
                }
            }
            BackendMode::Replay => {
                if b.transcript.is_none() {
                    errors.push("backend.transcript: required in replay mode".into());
                }
            }
        }
        if b.model.is_empty() {
            errors.push("backend.model: must not be empty".into());
        }
        if !(b.temperature >= 0.0 && b.temperature.is_finite()) {
            errors.push("backend.temperature: must be a nonnegative number".into());
        }
        if b.max_tokens == 0 {
            errors.push("backend.max_tokens: must be at least 1".into());
        }
        if b.timeout_secs == 0 {
            errors.push("backend.timeout_secs: must be at least 1".into());
        }
        errors.extend(self.validate_analysis());
        errors
    }

    pub fn validate_analysis(&self) -> Vec<String> {
        let a = &self.analysis;
        let mut errors = Vec::new();
        if a.sobol_base_samples < 2 {
            errors.push("analysis.sobol_base_samples: must be at least 2".into());
        }
        if a.curvature_points < 4 {
            errors.push("analysis.curvature_points: must be at least 4".into());
        }
        let width = self.engine.inner.space.width();
        for (name, h) in [("gradient", a.fd_steps.gradient), ("hessian", a.fd_steps.hessian)] {
            if !(h > 0.0 && h < width / 2.0) {
                errors.push(format!(
                    "analysis.fd_steps.{name}: must be positive and below half the box width"
                ));
            }
        }
        errors
    }
}

pub fn mode_name(mode: BackendMode) -> &'static str {
    match mode {
        BackendMode::Live => "live",
        BackendMode::Replay => "replay",
        BackendMode::Record => "record",
    }
}
