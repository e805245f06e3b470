//! Protagonist valence arcs and arc similarity.

pub mod dtw;
pub mod lexicon;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dtw::{arc_similarity, dtw_full, dtw_open_end, similarity_from_distance};
pub use lexicon::{LexiconError, ValenceLexicon};

use crate::corpus::{Block, BlockId, Story, StoryId};
use crate::gateway::{bindings, Gateway, GatewayError, TemplateId};

/// Raw valence assigned when none of a block's adjectives is in the lexicon.
pub const NEUTRAL_VALENCE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum ArcError {
    #[error("sequence is empty")]
    EmptySequence,
    #[error("valence {0} outside [-1, 1]")]
    ValueOutOfRange(f64),
    #[error("corpus has no arcs")]
    EmptyCorpus,
    #[error("no word list in response {0:?}")]
    UnparseableList(String),
    #[error("empty protagonist response")]
    EmptyProtagonist,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

impl ArcError {
    pub fn code(&self) -> &'static str {
        match self {
            ArcError::EmptySequence => "EmptySequence",
            ArcError::ValueOutOfRange(_) => "ValueOutOfRange",
            ArcError::EmptyCorpus => "EmptyCorpus",
            ArcError::UnparseableList(_) => "UnparseableList",
            ArcError::EmptyProtagonist => "EmptyProtagonist",
            ArcError::Gateway(g) => g.code(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcPoint {
    pub block_id: BlockId,
    pub index: usize,
    pub adjectives: [String; 3],
    pub raw_valence: f64,
    pub signed_valence: f64,
    pub coverage: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValenceArc {
    pub story_id: StoryId,
    pub points: Vec<ArcPoint>,
}

impl ValenceArc {
    pub fn signed(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.signed_valence).collect()
    }
}

/// Block position mapped onto `[0, 1]` for plotting arcs of different
/// lengths together.
pub fn normalized_x(index: usize, len: usize) -> f64 {
    if len <= 1 {
        0.0
    } else {
        index as f64 / (len - 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockValence {
    pub raw: f64,
    pub signed: f64,
    pub coverage: u8,
}

/// Mean lexicon valence over the adjectives found in the lexicon, mapped
/// to `[-1, 1]` as `2 * raw - 1`.
pub fn block_valence(adjectives: &[String], lexicon: &ValenceLexicon) -> BlockValence {
    let mut found: Vec<f64> = adjectives.iter().filter_map(|w| lexicon.lookup(w)).collect();
    if found.is_empty() {
        return BlockValence {
            raw: NEUTRAL_VALENCE,
            signed: 2.0 * NEUTRAL_VALENCE - 1.0,
            coverage: 0,
        };
    }
    // Fixed summation order so the mean does not depend on adjective order.
    found.sort_by(f64::total_cmp);
    let raw = found.iter().sum::<f64>() / found.len() as f64;
    BlockValence {
        raw,
        signed: 2.0 * raw - 1.0,
        coverage: found.len() as u8,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adjectives {
    pub words: [String; 3],
    /// Set when the response had to be padded or truncated, or was not
    /// bracketed.
    pub warning: Option<String>,
}

/// Parses a `[happy, sad, joyful]` style list into exactly three lowercase
/// words. Short lists repeat their last word, long lists are truncated.
pub fn parse_adjectives(raw: &str) -> Result<Adjectives, ArcError> {
    let trimmed = raw.trim();
    let (inner, bracketed) = match (trimmed.find('['), trimmed.rfind(']')) {
        (Some(a), Some(b)) if a < b => (&trimmed[a + 1..b], true),
        _ => (trimmed, false),
    };
    if !bracketed && inner.lines().count() > 1 {
        return Err(ArcError::UnparseableList(raw.to_string()));
    }
    let mut words = Vec::new();
    for token in inner.split(',') {
        let w = token
            .trim()
            .trim_matches(|c: char| matches!(c, '"' | '\'' | '.' | '`' | '*'))
            .trim()
            .to_lowercase();
        if w.is_empty() {
            continue;
        }
        let single_word = w.chars().all(|c| c.is_alphabetic() || c == '-' || c == '\'');
        if !single_word {
            return Err(ArcError::UnparseableList(raw.to_string()));
        }
        words.push(w);
    }
    let Some(last) = words.last().cloned() else {
        return Err(ArcError::UnparseableList(raw.to_string()));
    };
    let mut notes = Vec::new();
    if !bracketed {
        notes.push("list was not bracketed".to_string());
    }
    match words.len() {
        3 => {}
        n if n < 3 => {
            notes.push(format!("{n} words returned, padded with {last:?}"));
            words.resize(3, last);
        }
        n => {
            notes.push(format!("{n} words returned, truncated to 3"));
            words.truncate(3);
        }
    }
    let warning = (!notes.is_empty()).then(|| notes.join("; "));
    if let Some(w) = &warning {
        tracing::warn!(warning = %w, "adjective list repaired");
    }
    let [a, b, c]: [String; 3] = words.try_into().expect("exactly three words");
    Ok(Adjectives {
        words: [a, b, c],
        warning,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Protagonist {
    pub name: String,
    pub warning: Option<String>,
}

pub fn parse_protagonist(raw: &str) -> Result<Protagonist, ArcError> {
    let mut lines = raw.lines().map(str::trim).filter(|l| !l.is_empty());
    let first = lines.next().ok_or(ArcError::EmptyProtagonist)?;
    let name = first.trim_matches(|c: char| matches!(c, '"' | '*' | '`')).trim();
    if name.is_empty() {
        return Err(ArcError::EmptyProtagonist);
    }
    let warning = lines
        .next()
        .is_some()
        .then(|| "multi-line response truncated to its first line".to_string());
    Ok(Protagonist {
        name: name.to_string(),
        warning,
    })
}

pub fn identify_protagonist(gateway: &Gateway, story: &Story) -> Result<Protagonist, ArcError> {
    let c = gateway.run(TemplateId::Protagonist, &bindings([("story", story.body.as_str())]))?;
    parse_protagonist(&c.raw)
}

pub fn infer_adjectives(gateway: &Gateway, block: &Block, protagonist: &str) -> Result<Adjectives, ArcError> {
    let c = gateway.run(
        TemplateId::Emotions,
        &bindings([("protagonist", protagonist), ("plot", block.text.as_str())]),
    )?;
    parse_adjectives(&c.raw)
}

pub fn arc_point(block: &Block, adjectives: [String; 3], lexicon: &ValenceLexicon) -> ArcPoint {
    let v = block_valence(&adjectives, lexicon);
    ArcPoint {
        block_id: block.id.clone(),
        index: block.index,
        adjectives,
        raw_valence: v.raw,
        signed_valence: v.signed,
        coverage: v.coverage,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchedArc {
    pub protagonist: Protagonist,
    pub arc: ValenceArc,
    pub warnings: Vec<String>,
}

/// Protagonist, per-block adjectives and the resulting arc for a story
/// whose blocks are already known.
pub fn sketch_arc(
    gateway: &Gateway,
    story: &Story,
    blocks: &[Block],
    lexicon: &ValenceLexicon,
) -> Result<SketchedArc, ArcError> {
    let protagonist = identify_protagonist(gateway, story)?;
    let mut warnings: Vec<String> = protagonist.warning.iter().cloned().collect();
    let mut points = Vec::with_capacity(blocks.len());
    for block in blocks {
        let adj = infer_adjectives(gateway, block, &protagonist.name)?;
        if let Some(w) = &adj.warning {
            warnings.push(format!("{}: {w}", block.id));
        }
        points.push(arc_point(block, adj.words, lexicon));
    }
    Ok(SketchedArc {
        protagonist,
        arc: ValenceArc {
            story_id: story.id.clone(),
            points,
        },
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Similar {
    pub story_id: StoryId,
    #[serde(rename = "S")]
    pub score: f64,
}

/// The corpus arc most similar to `query`; equal scores go to the
/// lexicographically smallest story id.
pub fn most_similar(query: &[f64], corpus: &[ValenceArc]) -> Result<Similar, ArcError> {
    if query.is_empty() {
        return Err(ArcError::EmptySequence);
    }
    let mut best: Option<Similar> = None;
    for arc in corpus {
        let score = arc_similarity(query, &arc.signed())?;
        let better = match &best {
            None => true,
            Some(b) => score > b.score || (score == b.score && arc.story_id < b.story_id),
        };
        if better {
            best = Some(Similar {
                story_id: arc.story_id.clone(),
                score,
            });
        }
    }
    best.ok_or(ArcError::EmptyCorpus)
}
