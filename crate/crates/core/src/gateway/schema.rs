//! Structured output shapes the gateway validates model responses against.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemaId {
    /// `{"plots": [{"title", "plot", "summary"}]}`
    Plots,
    /// `{"strategies": [{"strategy", "reasoning", "lexicon": [..]}]}`
    Strategies,
    /// `{"category": [..]}` with at least one entry
    Category,
    /// `{"answer": "yes" | "no"}`
    YesNo,
    /// `{"commentary", "example_cues": [..], "revised_cues": [..]}`
    Reflection,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlotsDoc {
    pub plots: Vec<PlotItem>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlotItem {
    pub title: String,
    pub plot: String,
    #[serde(default)]
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategiesDoc {
    pub strategies: Vec<StrategyItem>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyItem {
    pub strategy: String,
    pub reasoning: String,
    #[serde(default)]
    pub lexicon: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryDoc {
    pub category: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct YesNoDoc {
    pub answer: String,
}

impl YesNoDoc {
    pub fn is_yes(&self) -> bool {
        self.answer.trim().eq_ignore_ascii_case("yes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReflectionDoc {
    pub commentary: String,
    #[serde(default)]
    pub example_cues: Vec<String>,
    #[serde(default)]
    pub revised_cues: Vec<String>,
}

impl SchemaId {
    /// Parses `raw` and checks it against this schema.
    pub fn validate(self, raw: &str) -> Result<Value, String> {
        let value = extract_json(raw)?;
        match self {
            SchemaId::Plots => check::<PlotsDoc>(&value).and_then(|d| {
                if d.plots.is_empty() {
                    Err("`plots` is empty".into())
                } else {
                    Ok(())
                }
            }),
            SchemaId::Strategies => check::<StrategiesDoc>(&value).map(drop),
            SchemaId::Category => check::<CategoryDoc>(&value).and_then(|d| {
                if d.category.is_empty() {
                    Err("`category` is empty".into())
                } else {
                    Ok(())
                }
            }),
            SchemaId::YesNo => {
                check::<YesNoDoc>(&value).and_then(|d| match d.answer.trim().to_ascii_lowercase().as_str() {
                    "yes" | "no" => Ok(()),
                    other => Err(format!("`answer` must be yes or no, got {other:?}")),
                })
            }
            SchemaId::Reflection => check::<ReflectionDoc>(&value).map(drop),
        }?;
        Ok(value)
    }
}

fn check<T: DeserializeOwned>(value: &Value) -> Result<T, String> {
    serde_json::from_value(value.clone()).map_err(|e| e.to_string())
}

/// Pulls the JSON object out of a response, tolerating markdown fences and
/// surrounding prose.
pub fn extract_json(raw: &str) -> Result<Value, String> {
    let trimmed = raw.trim();
    if let Ok(v) = serde_json::from_str::<Value>(trimmed) {
        return Ok(v);
    }
    let (Some(start), Some(end)) = (trimmed.find('{'), trimmed.rfind('}')) else {
        return Err("no JSON object in response".into());
    };
    if end < start {
        return Err("no JSON object in response".into());
    }
    serde_json::from_str(&trimmed[start..=end]).map_err(|e| e.to_string())
}

pub fn decode<T: DeserializeOwned>(value: &Value) -> Result<T, String> {
    check(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_fenced_json() {
        let raw = "```json\n{\"category\": [\"PLOT\"]}\n```";
        assert!(SchemaId::Category.validate(raw).is_ok());
    }

    #[test]
    fn rejects_wrong_shapes() {
        assert!(SchemaId::Category.validate("{\"category\": []}").is_err());
        assert!(SchemaId::Strategies
            .validate("{\"strategies\": [{\"strategy\": 1}]}")
            .is_err());
        assert!(SchemaId::YesNo.validate("{\"answer\": \"maybe\"}").is_err());
        assert!(SchemaId::Plots.validate("not json").is_err());
    }

    #[test]
    fn empty_strategy_list_is_valid() {
        assert!(SchemaId::Strategies.validate("{\"strategies\": []}").is_ok());
    }
}
