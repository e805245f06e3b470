//! TOML configuration shared by the CLI and the service.
//!
//! ```toml
//! [gateway]
//! mode = "replay"              # replay | record | live
//! cassette = "fixtures/cassette.jsonl"
//! model = "gpt-4o"
//! strategy_model = "gpt-4.1"
//!
//! [provider]
//! url = "https://api.openai.com/v1/chat/completions"
//! api_key_env = "STORYREMIX_API_KEY"
//!
//! [analysis]
//! classifier = "prompt-default"
//! lexicon = "NRC-VAD-Lexicon.txt"
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use crate::analysis::ClassifierKind;
use crate::arc::{LexiconError, ValenceLexicon};
use crate::gateway::{Cassette, Gateway, GatewaySettings, HttpProvider, Mode, Provider, ScriptedProvider};

pub const PROVIDER_URL_ENV: &str = "STORYREMIX_PROVIDER_URL";
pub const API_KEY_ENV: &str = "STORYREMIX_API_KEY";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error("{0}")]
    Provider(String),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewaySection {
    pub mode: Option<Mode>,
    pub cassette: Option<PathBuf>,
    pub model: Option<String>,
    pub strategy_model: Option<String>,
    pub analysis_temperature: Option<f32>,
    pub generation_temperature: Option<f32>,
    pub max_tokens: Option<u32>,
    pub max_in_flight: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderSection {
    pub url: Option<String>,
    pub api_key_env: Option<String>,
    pub embedding_url: Option<String>,
    pub embedding_model: Option<String>,
    pub classifier_url: Option<String>,
    /// Canned responses (a JSON rule list) instead of an HTTP provider.
    pub script: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub classifier: ClassifierKind,
    pub lexicon: Option<PathBuf>,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            classifier: ClassifierKind::PromptDefault,
            lexicon: None,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub gateway: GatewaySection,
    pub provider: ProviderSection,
    pub analysis: AnalysisSection,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Reads `path`; relative paths inside the file resolve against its
    /// directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text)?;
        if let Some(dir) = path.parent() {
            let rebase = |p: &mut Option<PathBuf>| {
                if let Some(inner) = p.as_mut().filter(|p| p.is_relative()) {
                    *inner = dir.join(&*inner);
                }
            };
            rebase(&mut cfg.gateway.cassette);
            rebase(&mut cfg.provider.script);
            rebase(&mut cfg.analysis.lexicon);
        }
        Ok(cfg)
    }

    pub fn settings(&self) -> GatewaySettings {
        let d = GatewaySettings::default();
        let g = &self.gateway;
        GatewaySettings {
            mode: g.mode.unwrap_or(d.mode),
            model: g.model.clone().unwrap_or(d.model),
            strategy_model: g.strategy_model.clone().unwrap_or(d.strategy_model),
            analysis_temperature: g.analysis_temperature.unwrap_or(d.analysis_temperature),
            generation_temperature: g.generation_temperature.unwrap_or(d.generation_temperature),
            max_tokens: g.max_tokens.unwrap_or(d.max_tokens),
            max_in_flight: g.max_in_flight.unwrap_or(d.max_in_flight),
        }
    }

    /// The configured provider, if any. The environment overrides the URL.
    pub fn provider(&self) -> Result<Option<Arc<dyn Provider>>, ConfigError> {
        let p = &self.provider;
        if let Some(script) = &p.script {
            let scripted = ScriptedProvider::from_file(script).map_err(|e| ConfigError::Provider(e.0))?;
            return Ok(Some(Arc::new(scripted)));
        }
        let url = std::env::var(PROVIDER_URL_ENV).ok().or_else(|| p.url.clone());
        let Some(url) = url else {
            return Ok(None);
        };
        let key_var = p.api_key_env.as_deref().unwrap_or(API_KEY_ENV);
        let mut http = HttpProvider::new(url, std::env::var(key_var).ok()).map_err(|e| ConfigError::Provider(e.0))?;
        if let Some(e) = &p.embedding_url {
            http = http.with_embeddings(
                e,
                p.embedding_model
                    .clone()
                    .unwrap_or_else(|| "text-embedding-3-small".into()),
            );
        }
        if let Some(c) = &p.classifier_url {
            http = http.with_classifier(c);
        }
        Ok(Some(Arc::new(http)))
    }

    pub fn gateway(&self) -> Result<Gateway, ConfigError> {
        let cassette = match &self.gateway.cassette {
            Some(path) => Cassette::open(path).map_err(|source| ConfigError::Io {
                path: path.clone(),
                source,
            })?,
            None => Cassette::in_memory(),
        };
        let settings = self.settings();
        let provider = match settings.mode {
            Mode::Replay => None,
            Mode::Record | Mode::Live => self.provider()?,
        };
        Ok(Gateway::new(settings, provider, cassette))
    }

    pub fn lexicon(&self) -> Result<ValenceLexicon, ConfigError> {
        Ok(match &self.analysis.lexicon {
            Some(path) => ValenceLexicon::load(path)?,
            None => ValenceLexicon::bundled(),
        })
    }
}
