//! Per-block analysis: strategy inference with grounded cues, dimension
//! categorization, and turning-point classification.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{self, Block, BlockId, CorpusError, SegmentCandidate, Story, ValidationReport};
use crate::gateway::schema::{self, CategoryDoc, PlotsDoc, StrategiesDoc, YesNoDoc};
use crate::gateway::{bindings, Completion, Gateway, GatewayError, TemplateId};
use crate::model::{Dimension, TurningPoint};
use crate::text::{self, Normalized};

pub type AnnotationId = String;

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum AnalysisError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
    #[error("malformed model output: {0}")]
    Malformed(String),
}

impl AnalysisError {
    pub fn code(&self) -> &'static str {
        match self {
            AnalysisError::Gateway(g) => g.code(),
            AnalysisError::Corpus(CorpusError::NotVerbatim(_)) => "NotVerbatim",
            AnalysisError::Corpus(CorpusError::OutOfOrder(_)) => "OutOfOrder",
            AnalysisError::Corpus(_) => "CorpusError",
            AnalysisError::UnknownCategory(_) => "UnknownCategory",
            AnalysisError::Malformed(_) => "Malformed",
        }
    }
}

/// A quoted phrase offered as evidence for a strategy. `span` holds
/// `[start, end)` char offsets into the block text once the cue is located.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cue {
    pub text: String,
    pub span: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnnotationFlag {
    /// Strategy name outside the 2-6 word range.
    NameLength { words: usize },
    /// No cue could be located in the block text.
    Ungrounded,
    /// The model returned more than two categories; only the first two kept.
    CategoriesTruncated { returned: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyAnnotation {
    pub id: AnnotationId,
    pub block_id: BlockId,
    pub name: String,
    pub explanation: String,
    pub cues: Vec<Cue>,
    /// Cues the model offered that do not occur in the block text.
    pub dropped_cues: Vec<String>,
    pub dimensions: Vec<Dimension>,
    pub verified: bool,
    pub flags: Vec<AnnotationFlag>,
}

impl StrategyAnnotation {
    pub fn is_ungrounded(&self) -> bool {
        self.flags.contains(&AnnotationFlag::Ungrounded)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurningPointLabel {
    pub block_id: BlockId,
    pub types: BTreeSet<TurningPoint>,
}

fn parsed<T: serde::de::DeserializeOwned>(c: &Completion) -> Result<T, AnalysisError> {
    let value = c
        .parsed
        .as_ref()
        .ok_or_else(|| AnalysisError::Malformed("structured completion without parsed body".into()))?;
    schema::decode(value).map_err(AnalysisError::Malformed)
}

/// Asks the model to segment `story` and aligns the proposal onto its body.
pub fn segment_story(gateway: &Gateway, story: &Story) -> Result<ValidationReport, AnalysisError> {
    let c = gateway.run(
        TemplateId::Segment,
        &bindings([("title", story.title.as_str()), ("story", story.body.as_str())]),
    )?;
    let doc: PlotsDoc = parsed(&c)?;
    let candidates: Vec<SegmentCandidate> = doc
        .plots
        .into_iter()
        .map(|p| SegmentCandidate {
            title: p.title,
            plot: p.plot,
            summary: p.summary,
        })
        .collect();
    Ok(corpus::validate_segmentation(story, &candidates)?)
}

/// Unverified strategy annotations for one block.
pub fn infer_strategies(gateway: &Gateway, block: &Block) -> Result<Vec<StrategyAnnotation>, AnalysisError> {
    let c = gateway.run(TemplateId::InferStrategies, &bindings([("plot", block.text.as_str())]))?;
    let doc: StrategiesDoc = parsed(&c)?;
    Ok(doc
        .strategies
        .into_iter()
        .enumerate()
        .map(|(k, s)| {
            let name = s.strategy.trim().to_string();
            let words = text::word_count(&name);
            let mut flags = Vec::new();
            if !(2..=6).contains(&words) {
                flags.push(AnnotationFlag::NameLength { words });
            }
            StrategyAnnotation {
                id: format!("{}-s{k:02}", block.id),
                block_id: block.id.clone(),
                name,
                explanation: s.reasoning.trim().to_string(),
                cues: s.lexicon.into_iter().map(|t| Cue { text: t, span: None }).collect(),
                dropped_cues: Vec::new(),
                dimensions: Vec::new(),
                verified: false,
                flags,
            }
        })
        .collect())
}

/// Finds `cue` in `text` ignoring case and whitespace differences.
pub fn locate_cue(text: &str, cue: &str) -> Option<(usize, usize)> {
    let needle = Normalized::new(cue, true);
    if needle.is_empty() {
        return None;
    }
    let hay = Normalized::new(text, true);
    text::find_exact(&hay.chars, &needle.chars, 0).map(|start| hay.source_span(start, start + needle.len()))
}

/// Locates every cue in the block. Unlocatable cues move to
/// `dropped_cues`; an annotation left with no cue is flagged ungrounded.
pub fn verify_cues(block: &Block, mut ann: StrategyAnnotation) -> StrategyAnnotation {
    let mut kept = Vec::with_capacity(ann.cues.len());
    for cue in std::mem::take(&mut ann.cues) {
        match locate_cue(&block.text, &cue.text) {
            Some(span) => kept.push(Cue {
                text: cue.text,
                span: Some(span),
            }),
            None => {
                tracing::warn!(annotation = %ann.id, cue = %cue.text, "cue not found in block text");
                ann.dropped_cues.push(cue.text);
            }
        }
    }
    ann.cues = kept;
    ann.verified = !ann.cues.is_empty();
    ann.flags.retain(|f| *f != AnnotationFlag::Ungrounded);
    if !ann.verified {
        ann.flags.push(AnnotationFlag::Ungrounded);
    }
    ann
}

/// Parses category labels into one or two dimensions.
pub fn parse_categories(labels: &[String]) -> Result<(Vec<Dimension>, Option<AnnotationFlag>), AnalysisError> {
    let mut dims = Vec::new();
    for label in labels {
        let d: Dimension = label
            .parse()
            .map_err(|_| AnalysisError::UnknownCategory(label.clone()))?;
        if !dims.contains(&d) {
            dims.push(d);
        }
    }
    if dims.is_empty() {
        return Err(AnalysisError::Malformed("no categories returned".into()));
    }
    let flag = (dims.len() > 2).then(|| {
        tracing::warn!(returned = dims.len(), "more than two categories, keeping the first two");
        AnnotationFlag::CategoriesTruncated { returned: dims.len() }
    });
    dims.truncate(2);
    Ok((dims, flag))
}

/// Assigns one or two creative dimensions to an annotation.
pub fn categorize(
    gateway: &Gateway,
    ann: &StrategyAnnotation,
    block: &Block,
) -> Result<(Vec<Dimension>, Option<AnnotationFlag>), AnalysisError> {
    let c = gateway.run(
        TemplateId::Categorize,
        &bindings([
            ("taxonomy", Dimension::taxonomy()),
            ("strategy", ann.name.clone()),
            ("plot", block.text.clone()),
            ("explanation", ann.explanation.clone()),
        ]),
    )?;
    let doc: CategoryDoc = parsed(&c)?;
    parse_categories(&doc.category)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierKind {
    PromptDefault,
    External,
}

/// One binary decision function per turning-point type.
pub trait Classifier: Sync {
    fn kind(&self) -> ClassifierKind;
    fn decide(&self, block: &Block, turning_point: TurningPoint) -> Result<bool, AnalysisError>;
}

/// Zero-temperature yes/no prompt per turning-point type.
pub struct PromptClassifier<'a> {
    pub gateway: &'a Gateway,
}

impl Classifier for PromptClassifier<'_> {
    fn kind(&self) -> ClassifierKind {
        ClassifierKind::PromptDefault
    }

    fn decide(&self, block: &Block, turning_point: TurningPoint) -> Result<bool, AnalysisError> {
        let c = self.gateway.run(
            TemplateId::TurningPoint(turning_point),
            &bindings([("plot", block.text.as_str())]),
        )?;
        let doc: YesNoDoc = parsed(&c)?;
        Ok(doc.is_yes())
    }
}

/// Delegates each decision to an external classifier endpoint (for example
/// fine-tuned per-type models) through the gateway.
pub struct ExternalClassifier<'a> {
    pub gateway: &'a Gateway,
}

impl Classifier for ExternalClassifier<'_> {
    fn kind(&self) -> ClassifierKind {
        ClassifierKind::External
    }

    fn decide(&self, block: &Block, turning_point: TurningPoint) -> Result<bool, AnalysisError> {
        Ok(self.gateway.external_decision(turning_point, &block.text)?)
    }
}

/// Runs the five independent decisions. Any failure aborts the whole label.
pub fn classify_turning_points(block: &Block, classifier: &dyn Classifier) -> Result<TurningPointLabel, AnalysisError> {
    let mut types = BTreeSet::new();
    for t in TurningPoint::ALL {
        if classifier.decide(block, t)? {
            types.insert(t);
        }
    }
    Ok(TurningPointLabel {
        block_id: block.id.clone(),
        types,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{ChatRequest, Provider, ProviderError};
    use std::sync::Arc;

    fn block(text: &str) -> Block {
        Block {
            id: "st-0001-b00".into(),
            story_id: "st-0001".into(),
            index: 0,
            title: "t".into(),
            text: text.into(),
            summary: String::new(),
            char_span: (0, text.chars().count()),
        }
    }

    fn ann(cues: &[&str]) -> StrategyAnnotation {
        StrategyAnnotation {
            id: "a".into(),
            block_id: "st-0001-b00".into(),
            name: "Internal Monologue".into(),
            explanation: "e".into(),
            cues: cues
                .iter()
                .map(|c| Cue {
                    text: c.to_string(),
                    span: None,
                })
                .collect(),
            dropped_cues: vec![],
            dimensions: vec![],
            verified: false,
            flags: vec![],
        }
    }

    #[test]
    fn verifies_present_cue_with_offsets() {
        let b = block("Maya whispered to herself that the dawn would come.");
        let a = verify_cues(&b, ann(&["whispered to herself"]));
        assert!(a.verified);
        assert_eq!(a.cues[0].span, Some((5, 25)));
        assert!(a.dropped_cues.is_empty());
    }

    #[test]
    fn case_and_whitespace_are_ignored() {
        let b = block("They wrecked the hive and The precious\n   sunstone fell.");
        let a = verify_cues(&b, ann(&["the precious sunstone"]));
        assert!(a.verified);
        let (s, e) = a.cues[0].span.unwrap();
        assert_eq!(text::slice_chars(&b.text, s, e), "The precious\n   sunstone");
    }

    #[test]
    fn hallucinated_cues_flag_annotation() {
        let b = block("A quiet morning in the village.");
        let a = verify_cues(&b, ann(&["thunderous roar", "blood-red sky"]));
        assert!(!a.verified);
        assert!(a.is_ungrounded());
        assert!(a.cues.is_empty());
        assert_eq!(a.dropped_cues, vec!["thunderous roar", "blood-red sky"]);
    }

    #[test]
    fn zero_cues_is_ungrounded() {
        let a = verify_cues(&block("text"), ann(&[]));
        assert!(a.is_ungrounded());
    }

    #[test]
    fn category_parsing() {
        let (d, f) = parse_categories(&["PLOT".into(), "EMOTIONAL".into()]).unwrap();
        assert_eq!(d, vec![Dimension::Plot, Dimension::Emotional]);
        assert!(f.is_none());
        assert_eq!(
            parse_categories(&["VIBES".into()]),
            Err(AnalysisError::UnknownCategory("VIBES".into()))
        );
        let (d, f) = parse_categories(&["Plot".into(), "Pacing".into(), "Thematic".into()]).unwrap();
        assert_eq!(d, vec![Dimension::Plot, Dimension::Pacing]);
        assert_eq!(f, Some(AnnotationFlag::CategoriesTruncated { returned: 3 }));
    }

    struct Fixed(fn(TurningPoint) -> Result<bool, AnalysisError>);

    impl Classifier for Fixed {
        fn kind(&self) -> ClassifierKind {
            ClassifierKind::External
        }
        fn decide(&self, _b: &Block, t: TurningPoint) -> Result<bool, AnalysisError> {
            (self.0)(t)
        }
    }

    #[test]
    fn turning_points_collect_positive_decisions() {
        let b = block("x");
        let label = classify_turning_points(&b, &Fixed(|t| Ok(t == TurningPoint::Climax))).unwrap();
        assert_eq!(label.types.into_iter().collect::<Vec<_>>(), vec![TurningPoint::Climax]);
        let none = classify_turning_points(&b, &Fixed(|_| Ok(false))).unwrap();
        assert!(none.types.is_empty());
    }

    #[test]
    fn one_failed_decision_aborts_label() {
        let r = classify_turning_points(
            &block("x"),
            &Fixed(|t| {
                if t == TurningPoint::MajorSetback {
                    Err(AnalysisError::Malformed("boom".into()))
                } else {
                    Ok(true)
                }
            }),
        );
        assert!(r.is_err());
    }

    struct Echo(&'static str);
    impl Provider for Echo {
        fn chat(&self, _req: &ChatRequest<'_>) -> Result<String, ProviderError> {
            Ok(self.0.to_string())
        }
    }

    #[test]
    fn empty_strategy_list_is_not_an_error() {
        let gw = Gateway::live(Arc::new(Echo(r#"{"strategies": []}"#)));
        let before = block("Some text.");
        let b = before.clone();
        assert!(infer_strategies(&gw, &b).unwrap().is_empty());
        assert_eq!(b, before);
    }

    #[test]
    fn inferred_names_are_length_checked() {
        let gw = Gateway::live(Arc::new(Echo(
            r#"{"strategies": [{"strategy": "Imagery", "reasoning": "r", "lexicon": ["glimmering"]}]}"#,
        )));
        let out = infer_strategies(&gw, &block("the glimmering lake")).unwrap();
        assert_eq!(out[0].flags, vec![AnnotationFlag::NameLength { words: 1 }]);
        assert_eq!(out[0].id, "st-0001-b00-s00");
    }
}
