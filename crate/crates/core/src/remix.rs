//! Track-based remixing: dimension tracks, strategy tiles spanning draft
//! blocks, strategy-steered revise/continue, generation history and
//! reflective comparison.
//!
//! Generated text never enters the draft until a revision is accepted.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{locate_cue, AnnotationId, Cue, StrategyAnnotation};
use crate::corpus::{Block, BlockId, CorpusError, Draft};
use crate::gateway::schema::{self, ReflectionDoc};
use crate::gateway::{bindings, Gateway, GatewayError, TemplateId};
use crate::model::Dimension;
use crate::text;

pub type TrackId = String;
pub type TileId = String;
pub type RevisionId = String;

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum RemixError {
    #[error("unknown dimension {0:?}")]
    UnknownDimension(String),
    #[error("unknown track {0}")]
    UnknownTrack(TrackId),
    #[error("unknown tile {0}")]
    UnknownTile(TileId),
    #[error("unknown strategy {0}")]
    UnknownStrategy(AnnotationId),
    #[error("strategy {strategy} has no {dimension} dimension")]
    DimensionMismatch {
        strategy: AnnotationId,
        dimension: Dimension,
    },
    #[error("span [{start}, {end}] outside [0, {limit}]")]
    SpanOutOfRange { start: usize, end: usize, limit: usize },
    #[error("no strategies to apply")]
    NoStrategies,
    #[error("block {0} already has a pending revision")]
    Busy(BlockId),
    #[error("no block at index {0}")]
    NoSuchBlock(usize),
    #[error("unknown block {0}")]
    UnknownBlock(BlockId),
    #[error("unknown revision {0}")]
    UnknownRevision(RevisionId),
    #[error("revision {0} is not pending")]
    NotPending(RevisionId),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("malformed model output: {0}")]
    Malformed(String),
}

impl RemixError {
    pub fn code(&self) -> &'static str {
        match self {
            RemixError::UnknownDimension(_) => "UnknownDimension",
            RemixError::UnknownTrack(_) => "UnknownTrack",
            RemixError::UnknownTile(_) => "UnknownTile",
            RemixError::UnknownStrategy(_) => "UnknownStrategy",
            RemixError::DimensionMismatch { .. } => "DimensionMismatch",
            RemixError::SpanOutOfRange { .. } => "SpanOutOfRange",
            RemixError::NoStrategies => "NoStrategies",
            RemixError::Busy(_) => "Busy",
            RemixError::NoSuchBlock(_) => "NoSuchBlock",
            RemixError::UnknownBlock(_) => "UnknownBlock",
            RemixError::UnknownRevision(_) => "UnknownRevision",
            RemixError::NotPending(_) => "NotPending",
            RemixError::Gateway(g) => g.code(),
            RemixError::Malformed(_) => "Malformed",
        }
    }
}

impl From<CorpusError> for RemixError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::NoSuchBlock(i) => RemixError::NoSuchBlock(i),
            other => RemixError::Malformed(other.to_string()),
        }
    }
}

/// Read access to analyzed example material.
pub trait StrategyCatalog {
    fn annotation(&self, id: &str) -> Option<&StrategyAnnotation>;
    fn block(&self, id: &str) -> Option<&Block>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Track {
    pub id: TrackId,
    pub dimension: Dimension,
    pub order: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tile {
    pub id: TileId,
    pub track_id: TrackId,
    pub strategy_ref: AnnotationId,
    /// Inclusive block-index range; `end == blocks.len()` is the
    /// continuation slot after the last block.
    pub span: (usize, usize),
    /// Creation sequence number, for ordering.
    pub seq: u64,
}

impl Tile {
    pub fn covers(&self, index: usize) -> bool {
        self.span.0 <= index && index <= self.span.1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RevisionKind {
    Revise,
    Continue,
    Restore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RevisionStatus {
    Pending,
    Accepted,
    Discarded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Revision {
    pub id: RevisionId,
    pub block_id: BlockId,
    pub kind: RevisionKind,
    pub applied_strategies: Vec<AnnotationId>,
    pub previous_text: String,
    pub new_text: String,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
    pub accepted: bool,
    pub status: RevisionStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonSide {
    pub text: String,
    pub cues: Vec<Cue>,
    pub dropped_cues: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparison {
    pub strategy: String,
    pub example: ComparisonSide,
    pub revised: ComparisonSide,
    pub commentary: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemixWorkspace {
    pub id: String,
    pub draft: Draft,
    pub tracks: Vec<Track>,
    pub tiles: Vec<Tile>,
    pub revisions: Vec<Revision>,
    next_seq: u64,
}

impl RemixWorkspace {
    pub fn new(draft: Draft) -> Self {
        RemixWorkspace {
            id: draft.id().to_string(),
            draft,
            tracks: Vec::new(),
            tiles: Vec::new(),
            revisions: Vec::new(),
            next_seq: 0,
        }
    }

    fn seq(&mut self) -> u64 {
        let s = self.next_seq;
        self.next_seq += 1;
        s
    }

    /// Index of the continuation slot (one past the last block).
    pub fn continuation_slot(&self) -> usize {
        self.draft.blocks.len()
    }

    pub fn add_track(&mut self, dimension: &str) -> Result<Track, RemixError> {
        let dimension: Dimension = dimension
            .parse()
            .map_err(|_| RemixError::UnknownDimension(dimension.to_string()))?;
        let seq = self.seq();
        let track = Track {
            id: format!("{}-t{seq:04}", self.id),
            dimension,
            order: self.tracks.len(),
        };
        self.tracks.push(track.clone());
        Ok(track)
    }

    pub fn track(&self, id: &str) -> Result<&Track, RemixError> {
        self.tracks
            .iter()
            .find(|t| t.id == id)
            .ok_or_else(|| RemixError::UnknownTrack(id.to_string()))
    }

    fn check_span(&self, span: (usize, usize)) -> Result<(), RemixError> {
        let limit = self.continuation_slot();
        if span.0 > span.1 || span.1 > limit {
            return Err(RemixError::SpanOutOfRange {
                start: span.0,
                end: span.1,
                limit,
            });
        }
        Ok(())
    }

    /// Drops `strategy` onto a track. The track's dimension must be one of
    /// the strategy's dimensions.
    pub fn place_tile(
        &mut self,
        track_id: &str,
        strategy: &StrategyAnnotation,
        span: (usize, usize),
    ) -> Result<Tile, RemixError> {
        let dimension = self.track(track_id)?.dimension;
        if !strategy.dimensions.contains(&dimension) {
            return Err(RemixError::DimensionMismatch {
                strategy: strategy.id.clone(),
                dimension,
            });
        }
        self.check_span(span)?;
        let seq = self.seq();
        let tile = Tile {
            id: format!("{}-tile{seq:04}", self.id),
            track_id: track_id.to_string(),
            strategy_ref: strategy.id.clone(),
            span,
            seq,
        };
        self.tiles.push(tile.clone());
        Ok(tile)
    }

    pub fn resize_tile(&mut self, tile_id: &str, span: (usize, usize)) -> Result<Tile, RemixError> {
        self.check_span(span)?;
        let tile = self
            .tiles
            .iter_mut()
            .find(|t| t.id == tile_id)
            .ok_or_else(|| RemixError::UnknownTile(tile_id.to_string()))?;
        tile.span = span;
        Ok(tile.clone())
    }

    pub fn remove_tile(&mut self, tile_id: &str) -> Result<Tile, RemixError> {
        let pos = self
            .tiles
            .iter()
            .position(|t| t.id == tile_id)
            .ok_or_else(|| RemixError::UnknownTile(tile_id.to_string()))?;
        Ok(self.tiles.remove(pos))
    }

    /// Strategies of every tile covering `index`, by track order then tile
    /// creation, without duplicates.
    pub fn strategies_for_block(&self, index: usize) -> Vec<AnnotationId> {
        let mut hits: Vec<(usize, u64, &AnnotationId)> = self
            .tiles
            .iter()
            .filter(|t| t.covers(index))
            .map(|t| {
                let order = self
                    .tracks
                    .iter()
                    .find(|tr| tr.id == t.track_id)
                    .map_or(usize::MAX, |tr| tr.order);
                (order, t.seq, &t.strategy_ref)
            })
            .collect();
        hits.sort();
        let mut out: Vec<AnnotationId> = Vec::new();
        for (_, _, id) in hits {
            if !out.contains(id) {
                out.push(id.clone());
            }
        }
        out
    }

    /// Writer edit of a block's text.
    pub fn edit_block(&mut self, index: usize, text: &str) -> Result<(), RemixError> {
        Ok(self.draft.set_block_text(index, text)?)
    }

    /// Inserts a block (the editor's Enter) and keeps tile spans attached
    /// to the blocks they covered.
    pub fn insert_block(&mut self, at: usize, text: &str) -> Result<BlockId, RemixError> {
        let id = self.draft.insert_block(at, text)?;
        for tile in &mut self.tiles {
            if tile.span.0 >= at {
                tile.span.0 += 1;
            }
            if tile.span.1 >= at {
                tile.span.1 += 1;
            }
        }
        Ok(id)
    }

    /// Deletes a block; tiles covering only that block are removed.
    pub fn delete_block(&mut self, index: usize) -> Result<Block, RemixError> {
        let removed = self.draft.delete_block(index)?;
        self.tiles.retain(|t| t.span != (index, index));
        for tile in &mut self.tiles {
            if tile.span.0 > index {
                tile.span.0 -= 1;
            }
            if tile.span.1 >= index && tile.span.1 > tile.span.0 {
                tile.span.1 -= 1;
            }
        }
        Ok(removed)
    }

    fn has_pending(&self, block_id: &str) -> bool {
        self.revisions
            .iter()
            .any(|r| r.block_id == block_id && r.status == RevisionStatus::Pending)
    }

    fn resolve<'c>(
        catalog: &'c dyn StrategyCatalog,
        ids: &[AnnotationId],
    ) -> Result<Vec<&'c StrategyAnnotation>, RemixError> {
        ids.iter()
            .map(|id| {
                catalog
                    .annotation(id)
                    .ok_or_else(|| RemixError::UnknownStrategy(id.clone()))
            })
            .collect()
    }

    /// Generates a replacement for block `index` applying `strategies`. The
    /// result is a pending revision; the draft is untouched.
    pub fn revise_block(
        &mut self,
        gateway: &Gateway,
        catalog: &dyn StrategyCatalog,
        index: usize,
        strategies: &[AnnotationId],
        now: u64,
    ) -> Result<Revision, RemixError> {
        if strategies.is_empty() {
            return Err(RemixError::NoStrategies);
        }
        let block = self
            .draft
            .blocks
            .get(index)
            .ok_or(RemixError::NoSuchBlock(index))?
            .clone();
        if self.has_pending(&block.id) {
            return Err(RemixError::Busy(block.id));
        }
        let anns = Self::resolve(catalog, strategies)?;
        let c = gateway.run(
            TemplateId::Revise,
            &bindings([
                ("draft", numbered_draft(&self.draft)),
                ("block_number", (index + 1).to_string()),
                ("target", block.text.clone()),
                ("strategies", strategy_brief(&anns)),
            ]),
        )?;
        let revision = self.push_revision(
            block.id,
            RevisionKind::Revise,
            strategies.to_vec(),
            block.text,
            clean_generation(&c.raw),
            now,
            None,
        );
        Ok(revision)
    }

    /// Generates a new block after the last one. Accepting the revision
    /// appends it to the draft.
    pub fn continue_story(
        &mut self,
        gateway: &Gateway,
        catalog: &dyn StrategyCatalog,
        strategies: &[AnnotationId],
        hint: Option<&str>,
        now: u64,
    ) -> Result<Revision, RemixError> {
        if strategies.is_empty() {
            return Err(RemixError::NoStrategies);
        }
        if let Some(p) = self
            .revisions
            .iter()
            .find(|r| r.kind == RevisionKind::Continue && r.status == RevisionStatus::Pending)
        {
            return Err(RemixError::Busy(p.block_id.clone()));
        }
        let anns = Self::resolve(catalog, strategies)?;
        let hint = hint.map(str::trim).filter(|h| !h.is_empty());
        let hint_section = hint
            .map(|h| format!("\n\nThe writer describes the next block as: {h}"))
            .unwrap_or_default();
        let c = gateway.run(
            TemplateId::Continue,
            &bindings([
                ("draft", numbered_draft(&self.draft)),
                ("strategies", strategy_brief(&anns)),
                ("hint", hint_section),
            ]),
        )?;
        let block_id = self.draft.allocate_block_id();
        Ok(self.push_revision(
            block_id,
            RevisionKind::Continue,
            strategies.to_vec(),
            String::new(),
            clean_generation(&c.raw),
            now,
            hint.map(str::to_string),
        ))
    }

    #[allow(clippy::too_many_arguments)]
    fn push_revision(
        &mut self,
        block_id: BlockId,
        kind: RevisionKind,
        applied_strategies: Vec<AnnotationId>,
        previous_text: String,
        new_text: String,
        timestamp: u64,
        hint: Option<String>,
    ) -> Revision {
        let seq = self.seq();
        let accepted = kind == RevisionKind::Restore;
        let revision = Revision {
            id: format!("{}-r{seq:04}", self.id),
            block_id,
            kind,
            applied_strategies,
            previous_text,
            new_text,
            timestamp,
            accepted,
            status: if accepted {
                RevisionStatus::Accepted
            } else {
                RevisionStatus::Pending
            },
            hint,
        };
        self.revisions.push(revision.clone());
        revision
    }

    fn revision_mut(&mut self, id: &str) -> Result<&mut Revision, RemixError> {
        self.revisions
            .iter_mut()
            .find(|r| r.id == id)
            .ok_or_else(|| RemixError::UnknownRevision(id.to_string()))
    }

    /// Applies a pending revision to the draft.
    pub fn accept(&mut self, revision_id: &str) -> Result<Revision, RemixError> {
        let rev = self.revision_mut(revision_id)?.clone();
        if rev.status != RevisionStatus::Pending {
            return Err(RemixError::NotPending(rev.id));
        }
        match rev.kind {
            RevisionKind::Continue => {
                let at = self.draft.blocks.len();
                self.draft.insert_block_with_id(at, rev.block_id.clone(), &rev.new_text);
            }
            _ => {
                let index = self
                    .draft
                    .block_index(&rev.block_id)
                    .ok_or_else(|| RemixError::UnknownBlock(rev.block_id.clone()))?;
                self.draft.set_block_text(index, &rev.new_text)?;
            }
        }
        let r = self.revision_mut(revision_id)?;
        r.status = RevisionStatus::Accepted;
        r.accepted = true;
        Ok(r.clone())
    }

    pub fn discard(&mut self, revision_id: &str) -> Result<Revision, RemixError> {
        let r = self.revision_mut(revision_id)?;
        if r.status != RevisionStatus::Pending {
            return Err(RemixError::NotPending(r.id.clone()));
        }
        r.status = RevisionStatus::Discarded;
        Ok(r.clone())
    }

    /// Discards a pending revision and generates a fresh one with the same
    /// strategies.
    pub fn regenerate(
        &mut self,
        gateway: &Gateway,
        catalog: &dyn StrategyCatalog,
        revision_id: &str,
        now: u64,
    ) -> Result<Revision, RemixError> {
        let old = self.discard(revision_id)?;
        match old.kind {
            RevisionKind::Continue => {
                self.continue_story(gateway, catalog, &old.applied_strategies, old.hint.as_deref(), now)
            }
            _ => {
                let index = self
                    .draft
                    .block_index(&old.block_id)
                    .ok_or_else(|| RemixError::UnknownBlock(old.block_id.clone()))?;
                self.revise_block(gateway, catalog, index, &old.applied_strategies, now)
            }
        }
    }

    /// Every revision of a block, oldest first.
    pub fn history(&self, block_id: &str) -> Vec<&Revision> {
        self.revisions.iter().filter(|r| r.block_id == block_id).collect()
    }

    /// Sets a block back to a revision's text (`new_text`, or
    /// `previous_text` for the state before it) and records the restore as
    /// an accepted revision.
    pub fn restore(
        &mut self,
        block_id: &str,
        revision_id: &str,
        use_previous: bool,
        now: u64,
    ) -> Result<Revision, RemixError> {
        let rev = self
            .revisions
            .iter()
            .find(|r| r.id == revision_id && r.block_id == block_id)
            .ok_or_else(|| RemixError::UnknownRevision(revision_id.to_string()))?
            .clone();
        let index = self
            .draft
            .block_index(block_id)
            .ok_or_else(|| RemixError::UnknownBlock(block_id.to_string()))?;
        let target = if use_previous { rev.previous_text } else { rev.new_text };
        let current = self.draft.blocks[index].text.clone();
        self.draft.set_block_text(index, &target)?;
        Ok(self.push_revision(
            block_id.to_string(),
            RevisionKind::Restore,
            Vec::new(),
            current,
            target,
            now,
            None,
        ))
    }

    /// Accepted revision most recently applied to a block.
    pub fn chain_tip(&self, block_id: &str) -> Option<&Revision> {
        self.revisions
            .iter()
            .rev()
            .find(|r| r.block_id == block_id && r.status == RevisionStatus::Accepted)
    }
}

fn numbered_draft(draft: &Draft) -> String {
    draft
        .blocks
        .iter()
        .enumerate()
        .map(|(i, b)| format!("[Block {}]\n{}", i + 1, b.text))
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn strategy_brief(anns: &[&StrategyAnnotation]) -> String {
    anns.iter()
        .enumerate()
        .map(|(i, a)| {
            let cues = a
                .cues
                .iter()
                .map(|c| format!("\"{}\"", c.text))
                .collect::<Vec<_>>()
                .join(", ");
            let mut s = format!("{}. {}\n   Explanation: {}", i + 1, a.name, a.explanation);
            if !cues.is_empty() {
                s.push_str(&format!("\n   Example cues: {cues}"));
            }
            s
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn clean_generation(raw: &str) -> String {
    raw.trim().to_string()
}

fn ground(text: &str, cues: &[String]) -> ComparisonSide {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for c in cues {
        match locate_cue(text, c) {
            Some(span) => {
                if !kept.iter().any(|k: &Cue| k.span == Some(span)) {
                    kept.push(Cue {
                        text: c.clone(),
                        span: Some(span),
                    });
                }
            }
            None => dropped.push(c.clone()),
        }
    }
    ComparisonSide {
        text: text.to_string(),
        cues: kept,
        dropped_cues: dropped,
    }
}

/// Side-by-side commentary on how `strategy` is realized in the example
/// block and in `revised_text`. Cues that do not occur in their text are
/// dropped.
pub fn reflect(
    gateway: &Gateway,
    example_block: &Block,
    strategy: &StrategyAnnotation,
    revised_text: &str,
) -> Result<Comparison, RemixError> {
    let c = gateway.run(
        TemplateId::Reflect,
        &bindings([
            ("strategy", strategy.name.as_str()),
            ("explanation", strategy.explanation.as_str()),
            ("example", example_block.text.as_str()),
            ("revised", revised_text),
        ]),
    )?;
    let doc: ReflectionDoc = c
        .parsed
        .as_ref()
        .ok_or_else(|| RemixError::Malformed("reflection without parsed body".into()))
        .and_then(|v| schema::decode(v).map_err(RemixError::Malformed))?;
    let same_text = text::normalize_ws(&example_block.text) == text::normalize_ws(revised_text);
    let (example_cues, revised_cues) = if same_text {
        let mut all = doc.example_cues.clone();
        all.extend(doc.revised_cues.iter().cloned());
        (all.clone(), all)
    } else {
        (doc.example_cues, doc.revised_cues)
    };
    Ok(Comparison {
        strategy: strategy.name.clone(),
        example: ground(&example_block.text, &example_cues),
        revised: ground(revised_text, &revised_cues),
        commentary: doc.commentary.trim().to_string(),
    })
}
