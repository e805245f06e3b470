//! The single choke point for model calls.
//!
//! Every prompt is rendered from a [`TemplateId`], keyed by a fixture key
//! (SHA-256 over template, rendered text and decode parameters), and either
//! replayed from a cassette or sent to a [`Provider`]. Structured responses
//! are validated against their schema with exactly one repair retry.

pub mod cassette;
pub mod prompts;
pub mod provider;
pub mod schema;

use std::sync::{Arc, Condvar, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cassette::Cassette;
pub use prompts::{bindings, render, Bindings, ModelRole, RenderedPrompt, TemplateId};
pub use provider::{ChatRequest, HttpProvider, Provider, ProviderError, ScriptRule, ScriptedProvider};
pub use schema::SchemaId;

use crate::model::TurningPoint;

/// Appended to the original context when a structured response fails to
/// parse.
pub const REPAIR_INSTRUCTION: &str = "Return valid JSON matching the schema.";

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum GatewayError {
    #[error("placeholder {{{{{0}}}}} is unbound")]
    UnboundPlaceholder(String),
    #[error("no model provider is configured")]
    NoProvider,
    #[error("no cassette entry for {template} ({fixture_key})")]
    FixtureMiss { template: String, fixture_key: String },
    #[error("{template} response failed schema validation twice: {reason}")]
    SchemaInvalidAfterRetry {
        template: String,
        reason: String,
        first_raw: String,
        second_raw: String,
    },
    #[error("provider error: {0}")]
    Provider(String),
    #[error("cassette error: {0}")]
    Cassette(String),
}

impl GatewayError {
    pub fn code(&self) -> &'static str {
        match self {
            GatewayError::UnboundPlaceholder(_) => "UnboundPlaceholder",
            GatewayError::NoProvider => "NoProvider",
            GatewayError::FixtureMiss { .. } => "FixtureMiss",
            GatewayError::SchemaInvalidAfterRetry { .. } => "SchemaInvalidAfterRetry",
            GatewayError::Provider(_) => "ProviderError",
            GatewayError::Cassette(_) => "CassetteError",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Answer only from the cassette.
    #[default]
    Replay,
    /// Answer known keys from the cassette; call the provider for new keys
    /// and append their responses.
    Record,
    /// Call the provider, record nothing.
    Live,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub temperature: f32,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatewaySettings {
    pub mode: Mode,
    pub model: String,
    pub strategy_model: String,
    pub analysis_temperature: f32,
    pub generation_temperature: f32,
    pub max_tokens: u32,
    pub max_in_flight: usize,
}

impl Default for GatewaySettings {
    fn default() -> Self {
        GatewaySettings {
            mode: Mode::Replay,
            model: "gpt-4o".into(),
            strategy_model: "gpt-4.1".into(),
            analysis_temperature: 0.0,
            generation_temperature: 0.8,
            max_tokens: 4096,
            max_in_flight: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub raw: String,
    pub parsed: Option<Value>,
    pub fixture_key: String,
    pub attempts: u8,
}

pub struct Gateway {
    settings: GatewaySettings,
    provider: Option<Arc<dyn Provider>>,
    cassette: Mutex<Cassette>,
    slots: Slots,
}

impl Gateway {
    pub fn new(settings: GatewaySettings, provider: Option<Arc<dyn Provider>>, cassette: Cassette) -> Self {
        let slots = Slots::new(settings.max_in_flight.max(1));
        Gateway {
            settings,
            provider,
            cassette: Mutex::new(cassette),
            slots,
        }
    }

    /// Replay-only gateway over `cassette`.
    pub fn replay(cassette: Cassette) -> Self {
        Gateway::new(GatewaySettings::default(), None, cassette)
    }

    /// Live gateway over `provider` that records nothing.
    pub fn live(provider: Arc<dyn Provider>) -> Self {
        let settings = GatewaySettings {
            mode: Mode::Live,
            ..GatewaySettings::default()
        };
        Gateway::new(settings, Some(provider), Cassette::in_memory())
    }

    pub fn settings(&self) -> &GatewaySettings {
        &self.settings
    }

    pub fn default_params(&self, template: TemplateId) -> DecodeParams {
        DecodeParams {
            temperature: if template.is_generation() {
                self.settings.generation_temperature
            } else {
                self.settings.analysis_temperature
            },
            max_tokens: self.settings.max_tokens,
        }
    }

    /// Renders `template` and completes it with default decode parameters.
    pub fn run(&self, template: TemplateId, bindings: &Bindings) -> Result<Completion, GatewayError> {
        let prompt = render(template, bindings)?;
        self.complete(&prompt, self.default_params(template))
    }

    pub fn complete(&self, prompt: &RenderedPrompt, params: DecodeParams) -> Result<Completion, GatewayError> {
        let key = fixture_key(prompt, params);
        let raw = self.fetch(prompt, params, &key)?;
        let Some(schema) = prompt.schema else {
            return Ok(Completion {
                raw,
                parsed: None,
                fixture_key: key,
                attempts: 1,
            });
        };
        match schema.validate(&raw) {
            Ok(parsed) => Ok(Completion {
                raw,
                parsed: Some(parsed),
                fixture_key: key,
                attempts: 1,
            }),
            Err(first_reason) => {
                tracing::warn!(template = %prompt.template, reason = %first_reason, "structured output invalid, retrying once");
                let retry = repair_prompt(prompt, &raw);
                let retry_key = fixture_key(&retry, params);
                let second = self.fetch(&retry, params, &retry_key)?;
                match schema.validate(&second) {
                    Ok(parsed) => Ok(Completion {
                        raw: second,
                        parsed: Some(parsed),
                        fixture_key: key,
                        attempts: 2,
                    }),
                    Err(reason) => Err(GatewayError::SchemaInvalidAfterRetry {
                        template: prompt.template.key(),
                        reason,
                        first_raw: raw,
                        second_raw: second,
                    }),
                }
            }
        }
    }

    /// Yes/no from an external turning-point classifier, cassette-backed
    /// like every other call.
    pub fn external_decision(&self, turning_point: TurningPoint, text: &str) -> Result<bool, GatewayError> {
        let key = hash_parts(&["external-classifier", &format!("{turning_point:?}"), text]);
        let template = format!("external-classifier/{turning_point:?}");
        let raw = self.fetch_with(&template, &key, |p| {
            p.classify(turning_point, text)
                .map(|b| serde_json::json!({ "present": b }).to_string())
        })?;
        serde_json::from_str::<Value>(&raw)
            .ok()
            .and_then(|v| v["present"].as_bool())
            .ok_or_else(|| GatewayError::Provider(format!("bad classifier record: {raw}")))
    }

    /// Embedding vectors, cassette-backed.
    pub fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, GatewayError> {
        let mut parts = vec!["embed"];
        parts.extend(texts.iter().map(String::as_str));
        let key = hash_parts(&parts);
        let raw = self.fetch_with("embed", &key, |p| {
            p.embed(texts)
                .map(|v| serde_json::to_string(&v).expect("vectors serialize"))
        })?;
        serde_json::from_str(&raw).map_err(|e| GatewayError::Provider(format!("bad embedding record: {e}")))
    }

    fn fetch(&self, prompt: &RenderedPrompt, params: DecodeParams, key: &str) -> Result<String, GatewayError> {
        let model = match prompt.template.model_role() {
            ModelRole::Strategy => self.settings.strategy_model.as_str(),
            ModelRole::General => self.settings.model.as_str(),
        };
        self.fetch_with(&prompt.template.key(), key, |p| {
            p.chat(&ChatRequest {
                template: prompt.template,
                model,
                system: &prompt.system,
                user: &prompt.context,
                temperature: params.temperature,
                max_tokens: params.max_tokens,
            })
        })
    }

    fn fetch_with(
        &self,
        template: &str,
        key: &str,
        call: impl FnOnce(&dyn Provider) -> Result<String, ProviderError>,
    ) -> Result<String, GatewayError> {
        if self.settings.mode != Mode::Live {
            let cassette = self.cassette.lock().expect("cassette lock poisoned");
            match cassette.get(key) {
                Some(raw) => return Ok(raw.to_string()),
                None if self.settings.mode == Mode::Replay => {
                    return Err(GatewayError::FixtureMiss {
                        template: template.to_string(),
                        fixture_key: key.to_string(),
                    })
                }
                // Record mode only calls the provider for new keys.
                None => {}
            }
        }
        let provider = self.provider.as_deref().ok_or(GatewayError::NoProvider)?;
        let raw = {
            let _slot = self.slots.acquire();
            call(provider).map_err(|e| GatewayError::Provider(e.0))?
        };
        if self.settings.mode == Mode::Record {
            self.cassette
                .lock()
                .expect("cassette lock poisoned")
                .insert(key, &raw)
                .map_err(|e| GatewayError::Cassette(e.to_string()))?;
        }
        Ok(raw)
    }
}

fn repair_prompt(prompt: &RenderedPrompt, bad_output: &str) -> RenderedPrompt {
    RenderedPrompt {
        template: prompt.template,
        system: prompt.system.clone(),
        context: format!(
            "{}\n\nYour previous response was:\n{}\n\n{}",
            prompt.context, bad_output, REPAIR_INSTRUCTION
        ),
        schema: prompt.schema,
    }
}

pub fn fixture_key(prompt: &RenderedPrompt, params: DecodeParams) -> String {
    hash_parts(&[
        &prompt.template.key(),
        &prompt.system,
        &prompt.context,
        &format!("{:?}", params.temperature),
        &params.max_tokens.to_string(),
    ])
}

fn hash_parts(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    hex::encode(h.finalize())
}

/// Counting semaphore bounding concurrent provider calls.
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

struct SlotGuard<'a>(&'a Slots);

impl Slots {
    fn new(n: usize) -> Self {
        Slots {
            free: Mutex::new(n),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().expect("slot lock poisoned");
        while *free == 0 {
            free = self.cv.wait(free).expect("slot lock poisoned");
        }
        *free -= 1;
        SlotGuard(self)
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("slot lock poisoned") += 1;
        self.0.cv.notify_one();
    }
}
