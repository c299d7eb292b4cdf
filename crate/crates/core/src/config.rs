//! Command-line configuration: a TOML file, then environment variables, then
//! flags, each layer overriding the previous one.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{LiveConfig, ENDPOINT_ENV, KEY_ENV};
use crate::sandbox::{JdkRegistry, SandboxConfig, DEFAULT_JDK, SUPPORTED_JDKS};

pub const MODEL_ENV: &str = "ABB_MODEL";
pub const JOBS_ENV: &str = "ABB_JOBS";
pub const WORK_ROOT_ENV: &str = "ABB_WORK_ROOT";
pub const MAX_CALLS_ENV: &str = "ABB_MAX_LLM_CALLS";
pub const SDK_ENV: &str = "ANDROID_SDK_ROOT";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },
    #[error("{name}: {message}")]
    Value { name: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub endpoint: Option<String>,
    pub api_key: Option<String>,
    pub model: String,
    pub max_in_flight: usize,
    pub request_timeout_s: u64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            endpoint: None,
            api_key: None,
            model: "gemini-2.5-pro".into(),
            max_in_flight: 8,
            request_timeout_s: 600,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SandboxSection {
    /// JDK homes keyed by major version.
    pub jdks: BTreeMap<String, PathBuf>,
    pub default_jdk: u32,
    pub android_sdk_root: Option<PathBuf>,
    pub work_root: Option<PathBuf>,
    pub build_timeout_s: u64,
    pub command_timeout_s: u64,
}

impl Default for SandboxSection {
    fn default() -> Self {
        SandboxSection {
            jdks: BTreeMap::new(),
            default_jdk: DEFAULT_JDK,
            android_sdk_root: None,
            work_root: None,
            build_timeout_s: 30 * 60,
            command_timeout_s: 30 * 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSection {
    pub max_llm_calls: Option<u32>,
    pub sub_agent_max_calls: u32,
    pub temperature: f64,
}

impl Default for AgentSection {
    fn default() -> Self {
        AgentSection {
            max_llm_calls: None,
            sub_agent_max_calls: crate::agent::DEFAULT_SUB_AGENT_CALLS,
            temperature: crate::agent::DEFAULT_TEMPERATURE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Worker threads; 0 means one per core.
    pub jobs: usize,
    pub samples: u32,
    pub ks: Vec<u32>,
    pub exclude_env_errors: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            jobs: 0,
            samples: crate::eval::DEFAULT_SAMPLES,
            ks: vec![1, 2, 4],
            exclude_env_errors: false,
        }
    }
}

/// Effective configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub model: ModelSection,
    pub sandbox: SandboxSection,
    pub agent: AgentSection,
    pub eval: EvalSection,
}

/// Values given on the command line; `None` leaves the lower layers alone.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub model: Option<String>,
    pub endpoint: Option<String>,
    pub jobs: Option<usize>,
    pub max_llm_calls: Option<u32>,
    pub work_root: Option<PathBuf>,
    pub jdks: Vec<(u32, PathBuf)>,
    pub samples: Option<u32>,
    pub ks: Option<Vec<u32>>,
}

fn parse_value<T: std::str::FromStr>(name: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.trim().parse().map_err(|e: T::Err| ConfigError::Value {
        name: name.into(),
        message: e.to_string(),
    })
}

impl CliConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: CliConfig = toml::from_str(text).map_err(|e| ConfigError::Value {
            name: "config".into(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::File {
            path: path.into(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text).map_err(|e| ConfigError::File {
            path: path.into(),
            message: e.to_string(),
        })
    }

    /// File (or defaults), then the process environment, then `flags`.
    pub fn resolve(file: Option<&Path>, flags: &Overrides) -> Result<Self, ConfigError> {
        let mut cfg = match file {
            Some(p) => Self::load(p)?,
            None => CliConfig::default(),
        };
        cfg.apply_env(std::env::vars())?;
        cfg.apply_flags(flags);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<(), ConfigError> {
        for (k, v) in vars {
            match k.as_str() {
                ENDPOINT_ENV => self.model.endpoint = Some(v),
                KEY_ENV => self.model.api_key = Some(v),
                MODEL_ENV => self.model.model = v,
                JOBS_ENV => self.eval.jobs = parse_value(&k, &v)?,
                MAX_CALLS_ENV => self.agent.max_llm_calls = Some(parse_value(&k, &v)?),
                WORK_ROOT_ENV => self.sandbox.work_root = Some(v.into()),
                SDK_ENV => self.sandbox.android_sdk_root = Some(v.into()),
                _ => {
                    if let Some(ver) = k.strip_prefix("ABB_JDK_").and_then(|r| r.strip_suffix("_HOME")) {
                        let ver: u32 = parse_value(&k, ver)?;
                        self.sandbox.jdks.insert(ver.to_string(), v.into());
                    }
                }
            }
        }
        Ok(())
    }

    pub fn apply_flags(&mut self, f: &Overrides) {
        if let Some(m) = &f.model {
            self.model.model = m.clone();
        }
        if let Some(e) = &f.endpoint {
            self.model.endpoint = Some(e.clone());
        }
        if let Some(j) = f.jobs {
            self.eval.jobs = j;
        }
        if let Some(n) = f.max_llm_calls {
            self.agent.max_llm_calls = Some(n);
        }
        if let Some(w) = &f.work_root {
            self.sandbox.work_root = Some(w.clone());
        }
        for (v, home) in &f.jdks {
            self.sandbox.jdks.insert(v.to_string(), home.clone());
        }
        if let Some(s) = f.samples {
            self.eval.samples = s;
        }
        if let Some(ks) = &f.ks {
            self.eval.ks = ks.clone();
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for v in self.sandbox.jdks.keys() {
            let n: u32 = parse_value("sandbox.jdks", v)?;
            if !SUPPORTED_JDKS.contains(&n) {
                return Err(ConfigError::Value {
                    name: "sandbox.jdks".into(),
                    message: format!("unsupported JDK {n}; supported: {SUPPORTED_JDKS:?}"),
                });
            }
        }
        if !SUPPORTED_JDKS.contains(&self.sandbox.default_jdk) {
            return Err(ConfigError::Value {
                name: "sandbox.default_jdk".into(),
                message: format!("unsupported JDK {}", self.sandbox.default_jdk),
            });
        }
        if self.eval.samples == 0 {
            return Err(ConfigError::Value {
                name: "eval.samples".into(),
                message: "must be positive".into(),
            });
        }
        if let Some(k) = self.eval.ks.iter().find(|&&k| k == 0 || k > self.eval.samples) {
            return Err(ConfigError::Value {
                name: "eval.ks".into(),
                message: format!("k={k} outside 1..={}", self.eval.samples),
            });
        }
        Ok(())
    }

    /// TOML rendering with the API key masked.
    pub fn show(&self) -> String {
        let mut shown = self.clone();
        if shown.model.api_key.is_some() {
            shown.model.api_key = Some("***".into());
        }
        toml::to_string_pretty(&shown).expect("config serializes")
    }

    pub fn sandbox_config(&self) -> SandboxConfig {
        let mut jdks = JdkRegistry::default();
        for (v, home) in &self.sandbox.jdks {
            if let Ok(v) = v.parse() {
                jdks.set_home(v, home);
            }
        }
        let jdks = JdkRegistry::new(
            jdks.versions().into_iter().filter_map(|v| Some((v, jdks.home(v)?.to_path_buf()))).collect(),
            self.sandbox.default_jdk,
        );
        SandboxConfig {
            build_timeout: Duration::from_secs(self.sandbox.build_timeout_s),
            command_timeout: Duration::from_secs(self.sandbox.command_timeout_s),
            jdks,
            android_sdk_root: self.sandbox.android_sdk_root.clone(),
            work_root: self.sandbox.work_root.clone(),
        }
    }

    /// `None` without an endpoint.
    pub fn live_config(&self) -> Option<LiveConfig> {
        let mut c = LiveConfig::new(self.model.endpoint.clone()?, self.model.model.clone());
        c.api_key = self.model.api_key.clone();
        c.max_in_flight = self.model.max_in_flight;
        c.request_timeout = Duration::from_secs(self.model.request_timeout_s);
        Some(c)
    }
}
