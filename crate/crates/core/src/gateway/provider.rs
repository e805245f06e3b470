//! Model backends: an OpenAI-compatible HTTP client and a scripted provider
//! for offline demos and fixture recording.

use std::fs;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::prompts::TemplateId;
use crate::model::TurningPoint;

#[derive(Debug, Clone)]
pub struct ChatRequest<'a> {
    pub template: TemplateId,
    pub model: &'a str,
    pub system: &'a str,
    pub user: &'a str,
    pub temperature: f32,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct ProviderError(pub String);

pub trait Provider: Send + Sync {
    fn chat(&self, req: &ChatRequest<'_>) -> Result<String, ProviderError>;

    /// Binary decision from an external turning-point classifier.
    fn classify(&self, turning_point: TurningPoint, text: &str) -> Result<bool, ProviderError> {
        let _ = (turning_point, text);
        Err(ProviderError("provider has no external classifier".into()))
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, ProviderError> {
        let _ = texts;
        Err(ProviderError("provider has no embedding endpoint".into()))
    }
}

/// Chat-completions client for any OpenAI-compatible endpoint.
pub struct HttpProvider {
    client: reqwest::blocking::Client,
    chat_url: String,
    api_key: Option<String>,
    embedding_url: Option<String>,
    embedding_model: Option<String>,
    classifier_url: Option<String>,
}

impl HttpProvider {
    pub fn new(chat_url: impl Into<String>, api_key: Option<String>) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .map_err(|e| ProviderError(e.to_string()))?;
        Ok(HttpProvider {
            client,
            chat_url: chat_url.into(),
            api_key,
            embedding_url: None,
            embedding_model: None,
            classifier_url: None,
        })
    }

    pub fn with_embeddings(mut self, url: impl Into<String>, model: impl Into<String>) -> Self {
        self.embedding_url = Some(url.into());
        self.embedding_model = Some(model.into());
        self
    }

    /// Endpoint accepting `{"turning_point", "text"}` and answering
    /// `{"present": bool}`.
    pub fn with_classifier(mut self, url: impl Into<String>) -> Self {
        self.classifier_url = Some(url.into());
        self
    }

    fn post(&self, url: &str, body: &Value) -> Result<Value, ProviderError> {
        let mut req = self.client.post(url).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| ProviderError(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| ProviderError(e.to_string()))?;
        if !status.is_success() {
            return Err(ProviderError(format!("HTTP {status}: {text}")));
        }
        serde_json::from_str(&text).map_err(|e| ProviderError(format!("bad response body: {e}")))
    }
}

impl Provider for HttpProvider {
    fn chat(&self, req: &ChatRequest<'_>) -> Result<String, ProviderError> {
        let body = json!({
            "model": req.model,
            "messages": [
                {"role": "system", "content": req.system},
                {"role": "user", "content": req.user},
            ],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        let value = self.post(&self.chat_url, &body)?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| ProviderError("response has no choices[0].message.content".into()))
    }

    fn classify(&self, turning_point: TurningPoint, text: &str) -> Result<bool, ProviderError> {
        let url = self
            .classifier_url
            .as_deref()
            .ok_or_else(|| ProviderError("no classifier endpoint configured".into()))?;
        let value = self.post(url, &json!({"turning_point": turning_point, "text": text}))?;
        value["present"]
            .as_bool()
            .ok_or_else(|| ProviderError("classifier response has no boolean `present`".into()))
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, ProviderError> {
        let url = self
            .embedding_url
            .as_deref()
            .ok_or_else(|| ProviderError("no embedding endpoint configured".into()))?;
        let value = self.post(url, &json!({"model": self.embedding_model, "input": texts}))?;
        let data = value["data"]
            .as_array()
            .ok_or_else(|| ProviderError("embedding response has no `data`".into()))?;
        data.iter()
            .map(|d| {
                d["embedding"]
                    .as_array()
                    .map(|xs| xs.iter().filter_map(Value::as_f64).map(|x| x as f32).collect())
                    .ok_or_else(|| ProviderError("embedding entry has no vector".into()))
            })
            .collect()
    }
}

/// One canned response. A rule matches when the template key starts with
/// `template` and the user prompt contains `contains`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptRule {
    pub template: String,
    #[serde(default)]
    pub contains: Option<String>,
    pub response: String,
    /// How many times the rule may fire; unlimited when absent.
    #[serde(default)]
    pub times: Option<usize>,
}

/// Answers chat requests from an ordered rule list.
pub struct ScriptedProvider {
    rules: Vec<ScriptRule>,
    used: Mutex<Vec<usize>>,
}

impl ScriptedProvider {
    pub fn new(rules: Vec<ScriptRule>) -> Self {
        let used = Mutex::new(vec![0; rules.len()]);
        ScriptedProvider { rules, used }
    }

    /// Reads a JSON array of rules.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ProviderError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| ProviderError(format!("{}: {e}", path.display())))?;
        let rules: Vec<ScriptRule> =
            serde_json::from_str(&text).map_err(|e| ProviderError(format!("{}: {e}", path.display())))?;
        Ok(ScriptedProvider::new(rules))
    }
}

impl Provider for ScriptedProvider {
    fn chat(&self, req: &ChatRequest<'_>) -> Result<String, ProviderError> {
        let key = req.template.key();
        let mut used = self.used.lock().expect("script rule counter poisoned");
        for (i, rule) in self.rules.iter().enumerate() {
            if !key.starts_with(&rule.template) {
                continue;
            }
            if rule.contains.as_deref().is_some_and(|c| !req.user.contains(c)) {
                continue;
            }
            if rule.times.is_some_and(|t| used[i] >= t) {
                continue;
            }
            used[i] += 1;
            return Ok(rule.response.clone());
        }
        Err(ProviderError(format!("no script rule for {key}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req<'a>(template: TemplateId, user: &'a str) -> ChatRequest<'a> {
        ChatRequest {
            template,
            model: "m",
            system: "",
            user,
            temperature: 0.0,
            max_tokens: 10,
        }
    }

    #[test]
    fn scripted_rules_match_in_order_and_respect_limits() {
        let p = ScriptedProvider::new(vec![
            ScriptRule {
                template: "turning-point/".into(),
                contains: Some("wolf".into()),
                response: "first".into(),
                times: Some(1),
            },
            ScriptRule {
                template: "turning-point/".into(),
                contains: None,
                response: "fallback".into(),
                times: None,
            },
        ]);
        let t = TemplateId::TurningPoint(TurningPoint::Climax);
        assert_eq!(p.chat(&req(t, "the wolf")).unwrap(), "first");
        assert_eq!(p.chat(&req(t, "the wolf")).unwrap(), "fallback");
        assert!(p.chat(&req(TemplateId::Revise, "x")).is_err());
    }
}
