//! TOML application config and construction of the oracle and verifier it
//! names. Relative paths resolve against the config file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use specloop_core::oracle::{
    FixtureStore, HttpConfig, HttpOracle, Oracle, RecordingOracle, ReplayOracle, StochasticOracle,
    StochasticOracleConfig,
};
use specloop_core::prompting::PromptSet;
use specloop_core::verifier::{MockVerifier, PatternTable, SubprocessVerifier, Verifier};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_dir: Option<PathBuf>,
    pub oracle: OracleConfig,
    pub verifier: VerifierConfig,
}

fn default_parallelism() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum OracleConfig {
    Http {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        base_url: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        timeout_secs: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_retries: Option<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        context_window: Option<u64>,
        /// Append every completion to this fixture file.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        record: Option<PathBuf>,
        /// Decoding parameters passed through to the request body.
        #[serde(default)]
        params: BTreeMap<String, toml::Value>,
    },
    Replay {
        fixture: PathBuf,
    },
    Stochastic {
        /// JSON file holding a stochastic oracle config.
        profile: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum VerifierConfig {
    Mock {
        rules: PathBuf,
    },
    Subprocess {
        command: String,
        /// Pattern table; the built-in mock grammar when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        patterns: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        timeout_secs: Option<u64>,
    },
}

/// A parsed config plus the directory its relative paths hang off.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: AppConfig,
    pub base_dir: PathBuf,
}

/// Values given on the command line; each one wins over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub parallelism: Option<usize>,
}

impl LoadedConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut config: AppConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if let Some(seed) = overrides.seed {
            config.seed = seed;
        }
        if let Some(p) = overrides.parallelism {
            config.parallelism = p;
        }
        let base_dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        let loaded = LoadedConfig { config, base_dir };
        loaded.validate()?;
        Ok(loaded)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_owned()
        } else {
            self.base_dir.join(p)
        }
    }

    fn existing(&self, p: &Path, what: &str) -> Result<PathBuf> {
        let full = self.resolve(p);
        if !full.exists() {
            bail!("{what} {} does not exist", full.display());
        }
        Ok(full)
    }

    fn validate(&self) -> Result<()> {
        if self.config.parallelism == 0 {
            bail!("parallelism must be at least 1");
        }
        if let Some(dir) = &self.config.template_dir {
            self.existing(dir, "template directory")?;
        }
        match &self.config.oracle {
            OracleConfig::Replay { fixture } => {
                self.existing(fixture, "replay fixture")?;
            }
            OracleConfig::Stochastic { profile } => {
                self.existing(profile, "stochastic profile")?;
            }
            OracleConfig::Http { .. } => {
                if self.config.model.is_none() {
                    bail!("the http oracle needs a model name");
                }
            }
        }
        match &self.config.verifier {
            VerifierConfig::Mock { rules } => {
                self.existing(rules, "mock rules")?;
            }
            VerifierConfig::Subprocess { patterns, .. } => {
                if let Some(p) = patterns {
                    self.existing(p, "pattern table")?;
                }
            }
        }
        Ok(())
    }

    /// SHA-256 over the effective configuration in canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(&self.config).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn prompts(&self) -> Result<PromptSet> {
        let Some(dir) = &self.config.template_dir else {
            return Ok(PromptSet::bundled());
        };
        let set = PromptSet::load_dir(&self.resolve(dir))?;
        for name in set.drift() {
            log::warn!("template {name} differs from the bundled text");
        }
        Ok(set)
    }

    pub fn oracle(&self) -> Result<Box<dyn Oracle>> {
        Ok(match &self.config.oracle {
            OracleConfig::Replay { fixture } => Box::new(ReplayOracle::new(FixtureStore::open(self.resolve(fixture))?)),
            OracleConfig::Stochastic { profile } => {
                let path = self.resolve(profile);
                let text = std::fs::read_to_string(&path)?;
                let cfg: StochasticOracleConfig =
                    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
                Box::new(StochasticOracle::new(cfg)?)
            }
            OracleConfig::Http {
                base_url,
                timeout_secs,
                max_retries,
                context_window,
                record,
                params,
            } => {
                let model = self.config.model.clone().unwrap_or_default();
                let mut http = HttpConfig::from_env(model);
                if let Some(base) = base_url {
                    http.base_url = base.clone();
                }
                if let Some(t) = timeout_secs {
                    http.request_timeout = Duration::from_secs(*t);
                }
                if let Some(r) = max_retries {
                    http.max_retries = *r;
                }
                http.context_window = *context_window;
                for (k, v) in params {
                    http.params.insert(k.clone(), serde_json::to_value(v)?);
                }
                let client = HttpOracle::new(http)?;
                match record {
                    Some(path) => Box::new(RecordingOracle::new(client, FixtureStore::open(self.resolve(path))?)),
                    None => Box::new(client),
                }
            }
        })
    }

    pub fn verifier(&self) -> Result<Box<dyn Verifier>> {
        Ok(match &self.config.verifier {
            VerifierConfig::Mock { rules } => Box::new(MockVerifier::from_json_file(&self.resolve(rules))?),
            VerifierConfig::Subprocess {
                command,
                patterns,
                timeout_secs,
            } => {
                let table = match patterns {
                    Some(p) => PatternTable::from_file(&self.resolve(p))?,
                    None => PatternTable::default(),
                };
                let timeout = timeout_secs
                    .map(Duration::from_secs)
                    .unwrap_or(specloop_core::verifier::DEFAULT_TIMEOUT);
                Box::new(SubprocessVerifier::new(command, table, timeout)?)
            }
        })
    }
}
