//! Card listing, filtering, lexical search and brushing over a store.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{AnnotationId, StrategyAnnotation};
use crate::arc::normalized_x;
use crate::corpus::{BlockId, StoryId};
use crate::gateway::{Gateway, GatewayError};
use crate::model::{Dimension, TurningPoint};
use crate::store::Store;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("unknown {filter} value {value:?}")]
    UnknownFilter { filter: &'static str, value: String },
    #[error("invalid brush rectangle: {0}")]
    InvalidRange(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

impl SearchError {
    pub fn code(&self) -> &'static str {
        match self {
            SearchError::UnknownFilter { .. } => "UnknownFilter",
            SearchError::InvalidRange(_) => "InvalidRange",
            SearchError::Gateway(g) => g.code(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyCard {
    pub id: AnnotationId,
    pub name: String,
    pub explanation: String,
    pub dimensions: Vec<Dimension>,
    /// `(text, start, end)` for every grounded cue, offsets in block chars.
    pub cues: Vec<(String, usize, usize)>,
}

impl From<&StrategyAnnotation> for StrategyCard {
    fn from(a: &StrategyAnnotation) -> Self {
        StrategyCard {
            id: a.id.clone(),
            name: a.name.clone(),
            explanation: a.explanation.clone(),
            dimensions: a.dimensions.clone(),
            cues: a
                .cues
                .iter()
                .filter_map(|c| c.span.map(|(s, e)| (c.text.clone(), s, e)))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Card {
    pub block_id: BlockId,
    pub story_id: StoryId,
    pub story_title: String,
    pub index: usize,
    pub title: String,
    pub summary: String,
    pub text: String,
    pub strategies: Vec<StrategyCard>,
    pub turning_points: Vec<TurningPoint>,
    /// Normalized story position in `[0, 1]`; absent until the arc exists.
    pub x: Option<f64>,
    /// Signed protagonist valence.
    pub y: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
pub struct BlockQuery {
    pub dimension: Option<String>,
    pub turning_point: Option<String>,
    pub q: Option<String>,
    pub q_semantic: Option<String>,
}

fn card(store: &Store, block_id: &str) -> Card {
    let b = &store.blocks[block_id];
    let story_title = store
        .stories
        .get(&b.story_id)
        .map(|s| s.title.clone())
        .unwrap_or_default();
    let point = store.arcs.get(&b.story_id).and_then(|arc| {
        arc.points
            .iter()
            .find(|p| p.block_id == b.id)
            .map(|p| (normalized_x(p.index, arc.points.len()), p.signed_valence))
    });
    Card {
        block_id: b.id.clone(),
        story_id: b.story_id.clone(),
        story_title,
        index: b.index,
        title: b.title.clone(),
        summary: b.summary.clone(),
        text: b.text.clone(),
        strategies: store
            .annotations_of(&b.id)
            .into_iter()
            .map(StrategyCard::from)
            .collect(),
        turning_points: store
            .turning_points
            .get(&b.id)
            .map(|l| l.types.iter().copied().collect())
            .unwrap_or_default(),
        x: point.map(|p| p.0),
        y: point.map(|p| p.1),
        score: None,
    }
}

/// Every block as a card, in block id order.
pub fn all_cards(store: &Store) -> Vec<Card> {
    store.blocks.keys().map(|id| card(store, id)).collect()
}

/// Lowercase alphanumeric tokens with a light suffix stemmer.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| stem(&t.to_lowercase()))
        .collect()
}

fn stem(word: &str) -> String {
    for suffix in ["ful", "ing", "ed", "ly", "s"] {
        if let Some(base) = word.strip_suffix(suffix) {
            if base.chars().count() >= 3 {
                return base.to_string();
            }
        }
    }
    word.to_string()
}

fn searchable_text(card: &Card) -> String {
    let mut parts = Vec::new();
    for s in &card.strategies {
        parts.push(s.name.as_str());
        parts.push(s.explanation.as_str());
        parts.extend(s.cues.iter().map(|c| c.0.as_str()));
    }
    parts.join(" ")
}

/// TF-IDF relevance of each card to `query`. Cards sharing no term score 0.
pub fn tfidf_scores(cards: &[Card], query: &str) -> Vec<f64> {
    let docs: Vec<HashMap<String, usize>> = cards
        .iter()
        .map(|c| {
            let mut tf = HashMap::new();
            for t in tokenize(&searchable_text(c)) {
                *tf.entry(t).or_insert(0) += 1;
            }
            tf
        })
        .collect();
    let terms: BTreeSet<String> = tokenize(query).into_iter().collect();
    let n = docs.len() as f64;
    let idf: BTreeMap<&str, f64> = terms
        .iter()
        .map(|t| {
            let df = docs.iter().filter(|d| d.contains_key(t)).count() as f64;
            (t.as_str(), if df == 0.0 { 0.0 } else { (1.0 + n / df).ln() })
        })
        .collect();
    docs.iter()
        .map(|d| {
            let len = d.values().sum::<usize>().max(1) as f64;
            idf.iter()
                .map(|(t, w)| d.get(*t).copied().unwrap_or(0) as f64 / len * w)
                .sum()
        })
        .collect()
}

fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum();
    let na: f64 = a.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn sort_by_score(cards: &mut [Card]) {
    cards.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.block_id.cmp(&b.block_id))
    });
}

/// Conjunctive filters, then lexical ranking by `q` and optional embedding
/// ranking by `q_semantic`. `gateway` is only consulted for `q_semantic`.
pub fn filter_blocks(store: &Store, query: &BlockQuery, gateway: Option<&Gateway>) -> Result<Vec<Card>, SearchError> {
    let dimension = query
        .dimension
        .as_deref()
        .filter(|s| !s.is_empty())
        .map(|d| {
            d.parse::<Dimension>().map_err(|_| SearchError::UnknownFilter {
                filter: "dimension",
                value: d.to_string(),
            })
        })
        .transpose()?;
    let turning_point = query
        .turning_point
        .as_deref()
        .filter(|s| !s.is_empty())
        .map(|t| {
            t.parse::<TurningPoint>().map_err(|_| SearchError::UnknownFilter {
                filter: "turning_point",
                value: t.to_string(),
            })
        })
        .transpose()?;

    let mut cards: Vec<Card> = all_cards(store)
        .into_iter()
        .filter(|c| dimension.is_none_or(|d| c.strategies.iter().any(|s| s.dimensions.contains(&d))))
        .filter(|c| turning_point.is_none_or(|t| c.turning_points.contains(&t)))
        .collect();

    if let Some(q) = query.q.as_deref().filter(|q| !q.trim().is_empty()) {
        let scores = tfidf_scores(&cards, q);
        cards = cards
            .into_iter()
            .zip(scores)
            .filter(|(_, s)| *s > 0.0)
            .map(|(mut c, s)| {
                c.score = Some(s);
                c
            })
            .collect();
        sort_by_score(&mut cards);
    }

    if let Some(q) = query.q_semantic.as_deref().filter(|q| !q.trim().is_empty()) {
        let gateway = gateway.ok_or(GatewayError::NoProvider)?;
        if cards.is_empty() {
            return Ok(cards);
        }
        let mut texts = vec![q.to_string()];
        texts.extend(cards.iter().map(searchable_text));
        let vectors = gateway.embed(&texts)?;
        for (c, v) in cards.iter_mut().zip(&vectors[1..]) {
            c.score = Some(cosine(&vectors[0], v));
        }
        sort_by_score(&mut cards);
    }
    Ok(cards)
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct Brush {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Brush {
    pub fn check(&self) -> Result<(), SearchError> {
        let Brush { x0, x1, y0, y1 } = *self;
        if !(0.0..=1.0).contains(&x0) || !(0.0..=1.0).contains(&x1) || x0 > x1 {
            return Err(SearchError::InvalidRange(format!(
                "need 0 <= x0 <= x1 <= 1, got [{x0}, {x1}]"
            )));
        }
        if !(-1.0..=1.0).contains(&y0) || !(-1.0..=1.0).contains(&y1) || y0 > y1 {
            return Err(SearchError::InvalidRange(format!(
                "need -1 <= y0 <= y1 <= 1, got [{y0}, {y1}]"
            )));
        }
        Ok(())
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (self.x0..=self.x1).contains(&x) && (self.y0..=self.y1).contains(&y)
    }
}

/// Blocks whose arc point falls inside the inclusive rectangle.
pub fn brush(store: &Store, rect: Brush) -> Result<Vec<Card>, SearchError> {
    rect.check()?;
    Ok(all_cards(store)
        .into_iter()
        .filter(|c| matches!((c.x, c.y), (Some(x), Some(y)) if rect.contains(x, y)))
        .collect())
}
