//! Whole-story analysis: segment, infer and ground strategies, categorize,
//! label turning points, then build the protagonist valence arc.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    self, AnalysisError, Classifier, ClassifierKind, ExternalClassifier, PromptClassifier, StrategyAnnotation,
    TurningPointLabel,
};
use crate::arc::{self, ValenceLexicon};
use crate::corpus::{Block, SegmentWarning, Story, StoryId};
use crate::gateway::Gateway;
use crate::store::{FailureRecord, Store, StoryResult};

/// A failed stage, carried into the store as the story's error record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: &'static str,
    pub code: String,
    pub message: String,
}

impl StageFailure {
    fn new(stage: &'static str, code: &str, message: impl ToString) -> Self {
        StageFailure {
            stage,
            code: code.to_string(),
            message: message.to_string(),
        }
    }
}

impl From<StageFailure> for FailureRecord {
    fn from(f: StageFailure) -> Self {
        FailureRecord {
            stage: f.stage.to_string(),
            code: f.code,
            message: f.message,
        }
    }
}

fn fail(stage: &'static str) -> impl Fn(AnalysisError) -> StageFailure {
    move |e| StageFailure::new(stage, e.code(), &e)
}

fn describe(w: &SegmentWarning) -> String {
    match w {
        SegmentWarning::WordCount { index, words } => format!("block {index}: {words} words"),
        SegmentWarning::TitleLength { index, words } => format!("block {index}: title has {words} words"),
        SegmentWarning::Repaired { index, distance } => {
            format!("block {index}: repaired onto source text (distance {distance:.4})")
        }
    }
}

struct BlockOutcome {
    annotations: Vec<StrategyAnnotation>,
    label: TurningPointLabel,
    warnings: Vec<String>,
}

fn analyze_block(gateway: &Gateway, block: &Block, classifier: &dyn Classifier) -> Result<BlockOutcome, StageFailure> {
    let mut warnings = Vec::new();
    let inferred = analysis::infer_strategies(gateway, block).map_err(fail("strategies"))?;
    let mut annotations = Vec::with_capacity(inferred.len());
    for ann in inferred {
        let mut ann = analysis::verify_cues(block, ann);
        for cue in &ann.dropped_cues {
            warnings.push(format!("{}: ungrounded cue {cue:?}", ann.id));
        }
        match analysis::categorize(gateway, &ann, block) {
            Ok((dims, flag)) => {
                ann.dimensions = dims;
                ann.flags.extend(flag);
                annotations.push(ann);
            }
            Err(AnalysisError::UnknownCategory(label)) => {
                tracing::warn!(annotation = %ann.id, %label, "dropping annotation with unknown category");
                warnings.push(format!("{}: dropped, unknown category {label:?}", ann.id));
            }
            Err(e) => return Err(fail("categorize")(e)),
        }
    }
    let label = analysis::classify_turning_points(block, classifier).map_err(fail("turning_points"))?;
    Ok(BlockOutcome {
        annotations,
        label,
        warnings,
    })
}

/// Runs every stage for one story. Blocks are analyzed in parallel; results
/// keep block order so output does not depend on scheduling.
pub fn analyze_story(
    gateway: &Gateway,
    story: &Story,
    classifier: ClassifierKind,
    lexicon: &ValenceLexicon,
) -> Result<StoryResult, StageFailure> {
    let report = analysis::segment_story(gateway, story).map_err(fail("segment"))?;
    let mut warnings: Vec<String> = report.warnings.iter().map(describe).collect();

    let prompt = PromptClassifier { gateway };
    let external = ExternalClassifier { gateway };
    let classifier: &dyn Classifier = match classifier {
        ClassifierKind::PromptDefault => &prompt,
        ClassifierKind::External => &external,
    };
    let outcomes: Vec<BlockOutcome> = report
        .aligned_blocks
        .par_iter()
        .map(|b| analyze_block(gateway, b, classifier))
        .collect::<Result<_, _>>()?;

    let sketched = arc::sketch_arc(gateway, story, &report.aligned_blocks, lexicon).map_err(|e| {
        let stage = match e {
            arc::ArcError::EmptyProtagonist => "protagonist",
            _ => "arc",
        };
        StageFailure::new(stage, e.code(), &e)
    })?;
    warnings.extend(sketched.warnings);

    let mut annotations = Vec::new();
    let mut turning_points = Vec::new();
    for o in outcomes {
        annotations.extend(o.annotations);
        turning_points.push(o.label);
        warnings.extend(o.warnings);
    }
    Ok(StoryResult {
        blocks: report.aligned_blocks,
        annotations,
        turning_points,
        protagonist: sketched.protagonist.name,
        arc: sketched.arc,
        warnings,
        gaps: report.gaps,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub processed: Vec<StoryId>,
    pub failed: Vec<StoryId>,
}

/// Analyzes stories independently of any store, in input order.
pub fn analyze_stories(
    gateway: &Gateway,
    stories: &[Story],
    classifier: ClassifierKind,
    lexicon: &ValenceLexicon,
) -> Vec<(StoryId, Result<StoryResult, StageFailure>)> {
    stories
        .par_iter()
        .map(|s| (s.id.clone(), analyze_story(gateway, s, classifier, lexicon)))
        .collect()
}

/// Writes analysis outcomes into the store. Stories deleted in the
/// meantime are skipped.
pub fn apply_results(store: &mut Store, results: Vec<(StoryId, Result<StoryResult, StageFailure>)>) -> RunSummary {
    let mut summary = RunSummary::default();
    for (id, result) in results {
        let applied = match result {
            Ok(r) => store.apply_result(&id, r).map(|_| summary.processed.push(id.clone())),
            Err(f) => {
                tracing::warn!(story = %id, stage = f.stage, code = %f.code, "story analysis failed");
                store
                    .record_failure(&id, f.into())
                    .map(|_| summary.failed.push(id.clone()))
            }
        };
        if let Err(e) = applied {
            tracing::warn!(story = %id, error = %e, "analysis result not applied");
        }
    }
    summary
}

/// Analyzes the given stories (all when `only` is empty) and writes each
/// outcome into the store. A failing story never stops the others.
pub fn analyze_store(
    store: &mut Store,
    gateway: &Gateway,
    classifier: ClassifierKind,
    lexicon: &ValenceLexicon,
    only: &[StoryId],
) -> RunSummary {
    let stories: Vec<Story> = store
        .stories
        .values()
        .filter(|s| only.is_empty() || only.contains(&s.id))
        .cloned()
        .collect();
    let results = analyze_stories(gateway, &stories, classifier, lexicon);
    apply_results(store, results)
}
