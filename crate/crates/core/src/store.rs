//! File-backed workspace store.
//!
//! Everything lives in one JSON document keyed by sortable ids. Snapshots
//! are written with sorted keys so identical stores produce identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{AnnotationId, StrategyAnnotation, TurningPointLabel};
use crate::arc::ValenceArc;
use crate::corpus::{self, Block, BlockId, CorpusError, Draft, Story, StoryId, StorySource};
use crate::remix::{RemixWorkspace, StrategyCatalog};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("store file is not valid: {0}")]
    Format(#[from] serde_json::Error),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("unknown story {0}")]
    UnknownStory(StoryId),
    #[error("unknown workspace {0}")]
    UnknownWorkspace(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisState {
    Pending,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub stage: String,
    pub code: String,
    pub message: String,
}

/// Outcome of the most recent pipeline run for a story.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoryAnalysis {
    pub state: AnalysisState,
    pub warnings: Vec<String>,
    pub gaps: Vec<(usize, usize)>,
    pub error: Option<FailureRecord>,
}

/// Everything the pipeline derives for one story.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoryResult {
    pub blocks: Vec<Block>,
    pub annotations: Vec<StrategyAnnotation>,
    pub turning_points: Vec<TurningPointLabel>,
    pub protagonist: String,
    pub arc: ValenceArc,
    pub warnings: Vec<String>,
    pub gaps: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Store {
    pub stories: BTreeMap<StoryId, Story>,
    pub blocks: BTreeMap<BlockId, Block>,
    pub annotations: BTreeMap<AnnotationId, StrategyAnnotation>,
    pub turning_points: BTreeMap<BlockId, TurningPointLabel>,
    pub protagonists: BTreeMap<StoryId, String>,
    pub arcs: BTreeMap<StoryId, ValenceArc>,
    pub analysis: BTreeMap<StoryId, StoryAnalysis>,
    pub workspaces: BTreeMap<String, RemixWorkspace>,
    next_story_seq: u64,
    next_draft_seq: u64,
}

impl Store {
    pub fn new() -> Self {
        Store::default()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    /// Loads `path`, or an empty store when it does not exist.
    pub fn open_or_new(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        if path.as_ref().exists() {
            Self::load(path)
        } else {
            Ok(Store::new())
        }
    }

    /// Canonical pretty JSON with sorted object keys.
    pub fn snapshot(&self) -> String {
        let value = serde_json::to_value(self).expect("store serializes");
        let mut s = serde_json::to_string_pretty(&value).expect("value serializes");
        s.push('\n');
        s
    }

    /// Writes the snapshot through a temporary file and a rename.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        let path = path.as_ref();
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(self.snapshot().as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn ingest(&mut self, title: &str, body: &str) -> Result<StoryId, StoreError> {
        let id = format!("st-{:04}", self.next_story_seq + 1);
        let story = corpus::ingest_story(id.clone(), title, body, StorySource::ExampleCorpus)?;
        self.next_story_seq += 1;
        self.stories.insert(id.clone(), story);
        self.analysis.insert(
            id.clone(),
            StoryAnalysis {
                state: AnalysisState::Pending,
                warnings: Vec::new(),
                gaps: Vec::new(),
                error: None,
            },
        );
        Ok(id)
    }

    pub fn story(&self, id: &str) -> Result<&Story, StoreError> {
        self.stories
            .get(id)
            .ok_or_else(|| StoreError::UnknownStory(id.to_string()))
    }

    pub fn blocks_of(&self, story_id: &str) -> Vec<&Block> {
        let mut blocks: Vec<&Block> = self.blocks.values().filter(|b| b.story_id == story_id).collect();
        blocks.sort_by_key(|b| b.index);
        blocks
    }

    pub fn annotations_of(&self, block_id: &str) -> Vec<&StrategyAnnotation> {
        self.annotations.values().filter(|a| a.block_id == block_id).collect()
    }

    fn clear_story(&mut self, story_id: &str) {
        let block_ids: Vec<BlockId> = self
            .blocks
            .values()
            .filter(|b| b.story_id == story_id)
            .map(|b| b.id.clone())
            .collect();
        for id in &block_ids {
            self.blocks.remove(id);
            self.turning_points.remove(id);
        }
        self.annotations.retain(|_, a| !block_ids.contains(&a.block_id));
        self.arcs.remove(story_id);
        self.protagonists.remove(story_id);
    }

    /// Replaces every derived record of a story with a fresh pipeline result.
    pub fn apply_result(&mut self, story_id: &str, result: StoryResult) -> Result<(), StoreError> {
        self.story(story_id)?;
        self.clear_story(story_id);
        for b in result.blocks {
            self.blocks.insert(b.id.clone(), b);
        }
        for a in result.annotations {
            self.annotations.insert(a.id.clone(), a);
        }
        for l in result.turning_points {
            self.turning_points.insert(l.block_id.clone(), l);
        }
        self.protagonists.insert(story_id.to_string(), result.protagonist);
        self.arcs.insert(story_id.to_string(), result.arc);
        self.analysis.insert(
            story_id.to_string(),
            StoryAnalysis {
                state: AnalysisState::Done,
                warnings: result.warnings,
                gaps: result.gaps,
                error: None,
            },
        );
        Ok(())
    }

    /// Records a failed pipeline run; earlier derived records are dropped.
    pub fn record_failure(&mut self, story_id: &str, failure: FailureRecord) -> Result<(), StoreError> {
        self.story(story_id)?;
        self.clear_story(story_id);
        self.analysis.insert(
            story_id.to_string(),
            StoryAnalysis {
                state: AnalysisState::Failed,
                warnings: Vec::new(),
                gaps: Vec::new(),
                error: Some(failure),
            },
        );
        Ok(())
    }

    pub fn create_workspace(&mut self, title: &str, block_texts: &[String]) -> String {
        self.next_draft_seq += 1;
        let id = format!("dr-{:04}", self.next_draft_seq);
        let ws = RemixWorkspace::new(Draft::new(id.clone(), title, block_texts));
        self.workspaces.insert(id.clone(), ws);
        id
    }

    pub fn workspace(&self, id: &str) -> Result<&RemixWorkspace, StoreError> {
        self.workspaces
            .get(id)
            .ok_or_else(|| StoreError::UnknownWorkspace(id.to_string()))
    }

    pub fn workspace_mut(&mut self, id: &str) -> Result<&mut RemixWorkspace, StoreError> {
        self.workspaces
            .get_mut(id)
            .ok_or_else(|| StoreError::UnknownWorkspace(id.to_string()))
    }

    /// Runs `f` on a workspace with the store as its strategy catalog.
    pub fn with_workspace<T>(
        &mut self,
        id: &str,
        f: impl FnOnce(&mut RemixWorkspace, &dyn StrategyCatalog) -> T,
    ) -> Result<T, StoreError> {
        let mut ws = self
            .workspaces
            .remove(id)
            .ok_or_else(|| StoreError::UnknownWorkspace(id.to_string()))?;
        let out = f(&mut ws, &*self);
        self.workspaces.insert(id.to_string(), ws);
        Ok(out)
    }

    /// Lists every dangling reference; empty when the store is consistent.
    pub fn integrity_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for b in self.blocks.values() {
            if !self.stories.contains_key(&b.story_id) {
                out.push(format!("block {} references missing story {}", b.id, b.story_id));
            }
        }
        for a in self.annotations.values() {
            if !self.blocks.contains_key(&a.block_id) {
                out.push(format!("annotation {} references missing block {}", a.id, a.block_id));
            }
        }
        for l in self.turning_points.values() {
            if !self.blocks.contains_key(&l.block_id) {
                out.push(format!("turning points reference missing block {}", l.block_id));
            }
        }
        for (sid, arc) in &self.arcs {
            if !self.stories.contains_key(sid) {
                out.push(format!("arc references missing story {sid}"));
            }
            if arc.points.len() != self.blocks_of(sid).len() {
                out.push(format!("arc of {sid} does not have one point per block"));
            }
        }
        for ws in self.workspaces.values() {
            for tile in &ws.tiles {
                if !self.annotations.contains_key(&tile.strategy_ref) {
                    out.push(format!(
                        "tile {} references missing annotation {}",
                        tile.id, tile.strategy_ref
                    ));
                }
                if !ws.tracks.iter().any(|t| t.id == tile.track_id) {
                    out.push(format!("tile {} references missing track {}", tile.id, tile.track_id));
                }
            }
        }
        out
    }
}

impl StrategyCatalog for Store {
    fn annotation(&self, id: &str) -> Option<&StrategyAnnotation> {
        self.annotations.get(id)
    }

    fn block(&self, id: &str) -> Option<&Block> {
        self.blocks.get(id)
    }
}

/// One usage event. Timestamps are milliseconds since the Unix epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UsageEvent {
    #[serde(rename = "type")]
    pub kind: String,
    pub timestamp: u64,
    pub payload: serde_json::Value,
}

#[derive(Debug, Error)]
pub enum EventError {
    #[error("event type is empty")]
    EmptyType,
    #[error("timestamp {got} is earlier than the last logged {last}")]
    NonMonotone { last: u64, got: u64 },
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("event log is not valid: {0}")]
    Format(#[from] serde_json::Error),
}

/// Append-only JSON Lines log with non-decreasing timestamps.
#[derive(Debug)]
pub struct EventLog {
    path: std::path::PathBuf,
    last: Option<u64>,
    len: usize,
}

impl EventLog {
    /// `<store>.events.jsonl` next to a store file.
    pub fn path_for(store_path: &Path) -> std::path::PathBuf {
        let mut name = store_path.file_name().unwrap_or_default().to_os_string();
        name.push(".events.jsonl");
        store_path.with_file_name(name)
    }

    pub fn open(path: impl Into<std::path::PathBuf>) -> Result<Self, EventError> {
        let path = path.into();
        let mut last = None;
        let mut len = 0;
        if path.exists() {
            for line in fs::read_to_string(&path)?.lines().filter(|l| !l.trim().is_empty()) {
                let e: UsageEvent = serde_json::from_str(line)?;
                last = Some(e.timestamp);
                len += 1;
            }
        }
        Ok(EventLog { path, last, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn append(&mut self, event: &UsageEvent) -> Result<(), EventError> {
        if event.kind.trim().is_empty() {
            return Err(EventError::EmptyType);
        }
        if let Some(last) = self.last.filter(|l| event.timestamp < *l) {
            return Err(EventError::NonMonotone {
                last,
                got: event.timestamp,
            });
        }
        let mut f = fs::OpenOptions::new().create(true).append(true).open(&self.path)?;
        let mut line = serde_json::to_string(event)?;
        line.push('\n');
        f.write_all(line.as_bytes())?;
        self.last = Some(event.timestamp);
        self.len += 1;
        Ok(())
    }
}
