//! Stories, their verbatim blocks, and user drafts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{self, Normalized};

pub type StoryId = String;
pub type BlockId = String;

/// Maximum normalized edit distance a candidate block may have from the
/// source text and still be accepted (after repair).
pub const REPAIR_THRESHOLD: f64 = 0.05;
pub const MIN_BLOCK_WORDS: usize = 50;
pub const MAX_BLOCK_WORDS: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StorySource {
    ExampleCorpus,
    UserDraft,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Story {
    pub id: StoryId,
    pub title: String,
    pub body: String,
    pub source: StorySource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub id: BlockId,
    pub story_id: StoryId,
    pub index: usize,
    pub title: String,
    pub text: String,
    pub summary: String,
    /// `[start, end)` char offsets into the owning story's body.
    pub char_span: (usize, usize),
}

impl Block {
    pub fn word_count(&self) -> usize {
        text::word_count(&self.text)
    }
}

/// One segment as proposed by the segmentation model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentCandidate {
    pub title: String,
    pub plot: String,
    #[serde(default)]
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SegmentWarning {
    /// Block word count fell outside the recommended bounds.
    WordCount { index: usize, words: usize },
    /// Title is outside the 3-8 word range the segmentation prompt asks for.
    TitleLength { index: usize, words: usize },
    /// Candidate text did not occur verbatim and was snapped onto the closest
    /// source passage.
    Repaired { index: usize, distance: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub aligned_blocks: Vec<Block>,
    pub warnings: Vec<SegmentWarning>,
    /// Source spans with non-whitespace text that no block covers.
    pub gaps: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum CorpusError {
    #[error("story body is empty")]
    EmptyBody,
    #[error("segmentation has no candidate blocks")]
    NoCandidates,
    #[error("block {0} is not a verbatim excerpt of the story")]
    NotVerbatim(usize),
    #[error("block {0} is out of order or overlaps the previous block")]
    OutOfOrder(usize),
    #[error("no block at index {0}")]
    NoSuchBlock(usize),
}

/// Creates a story after checking its body carries text.
pub fn ingest_story(id: StoryId, title: &str, body: &str, source: StorySource) -> Result<Story, CorpusError> {
    if text::normalize_ws(body).is_empty() {
        return Err(CorpusError::EmptyBody);
    }
    Ok(Story {
        id,
        title: title.to_string(),
        body: body.to_string(),
        source,
    })
}

pub fn block_id(story_id: &str, index: usize) -> BlockId {
    format!("{story_id}-b{index:02}")
}

/// Aligns candidate segments onto the story body.
///
/// Each candidate is located by whitespace-normalized substring search,
/// falling back to approximate alignment within [`REPAIR_THRESHOLD`].
/// Accepted blocks carry the source text of their span, not the candidate's.
pub fn validate_segmentation(story: &Story, candidates: &[SegmentCandidate]) -> Result<ValidationReport, CorpusError> {
    if candidates.is_empty() {
        return Err(CorpusError::NoCandidates);
    }
    let body = Normalized::new(&story.body, false);
    let mut cursor = 0usize;
    let mut blocks = Vec::with_capacity(candidates.len());
    let mut warnings = Vec::new();

    for (index, cand) in candidates.iter().enumerate() {
        let needle = Normalized::new(&cand.plot, false).chars;
        if needle.is_empty() {
            return Err(CorpusError::NotVerbatim(index));
        }
        let (start, end) = match text::find_exact(&body.chars, &needle, cursor) {
            Some(s) => (s, s + needle.len()),
            None => {
                if text::find_exact(&body.chars, &needle, 0).is_some() {
                    return Err(CorpusError::OutOfOrder(index));
                }
                let within = |m: &text::ApproxMatch| m.normalized_distance(needle.len()) <= REPAIR_THRESHOLD;
                match text::approximate_find(&body.chars, &needle, cursor).filter(within) {
                    Some(m) => {
                        warnings.push(SegmentWarning::Repaired {
                            index,
                            distance: m.normalized_distance(needle.len()),
                        });
                        (m.start, m.end)
                    }
                    None => {
                        let earlier =
                            cursor > 0 && text::approximate_find(&body.chars, &needle, 0).is_some_and(|m| within(&m));
                        return Err(if earlier {
                            CorpusError::OutOfOrder(index)
                        } else {
                            CorpusError::NotVerbatim(index)
                        });
                    }
                }
            }
        };
        let (src_start, src_end) = body.source_span(start, end);
        let block_text = text::slice_chars(&story.body, src_start, src_end).to_string();
        let words = text::word_count(&block_text);
        if !(MIN_BLOCK_WORDS..=MAX_BLOCK_WORDS).contains(&words) {
            warnings.push(SegmentWarning::WordCount { index, words });
        }
        let title_words = text::word_count(&cand.title);
        if !(3..=8).contains(&title_words) {
            warnings.push(SegmentWarning::TitleLength {
                index,
                words: title_words,
            });
        }
        blocks.push(Block {
            id: block_id(&story.id, index),
            story_id: story.id.clone(),
            index,
            title: cand.title.trim().to_string(),
            text: block_text,
            summary: cand.summary.trim().to_string(),
            char_span: (src_start, src_end),
        });
        cursor = end;
    }

    let gaps = uncovered_gaps(&story.body, &blocks);
    Ok(ValidationReport {
        aligned_blocks: blocks,
        warnings,
        gaps,
    })
}

fn uncovered_gaps(body: &str, blocks: &[Block]) -> Vec<(usize, usize)> {
    let chars: Vec<char> = body.chars().collect();
    let mut gaps = Vec::new();
    let mut pos = 0usize;
    let bounds = blocks
        .iter()
        .map(|b| b.char_span)
        .chain(std::iter::once((chars.len(), chars.len())));
    for (start, end) in bounds {
        if start > pos {
            let seg = &chars[pos..start];
            if let (Some(a), Some(b)) = (
                seg.iter().position(|c| !c.is_whitespace()),
                seg.iter().rposition(|c| !c.is_whitespace()),
            ) {
                gaps.push((pos + a, pos + b + 1));
            }
        }
        pos = pos.max(end);
    }
    gaps
}

/// Separator placed between draft blocks when rebuilding the draft body.
pub const DRAFT_BLOCK_SEPARATOR: &str = "\n\n";

/// A writer's draft: a user story whose blocks are edited directly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Draft {
    pub story: Story,
    pub blocks: Vec<Block>,
    pub version: u64,
    next_block_seq: u64,
}

impl Draft {
    pub fn new(id: StoryId, title: &str, block_texts: &[String]) -> Self {
        let mut draft = Draft {
            story: Story {
                id,
                title: title.to_string(),
                body: String::new(),
                source: StorySource::UserDraft,
            },
            blocks: Vec::new(),
            version: 0,
            next_block_seq: 0,
        };
        for t in block_texts {
            let id = draft.allocate_block_id();
            draft.blocks.push(draft.make_block(id, t));
        }
        draft.reindex();
        draft
    }

    pub fn id(&self) -> &str {
        &self.story.id
    }

    /// Reserves a fresh block id without inserting a block.
    pub fn allocate_block_id(&mut self) -> BlockId {
        let id = format!("{}-b{:04}", self.story.id, self.next_block_seq);
        self.next_block_seq += 1;
        id
    }

    fn make_block(&self, id: BlockId, text: &str) -> Block {
        Block {
            id,
            story_id: self.story.id.clone(),
            index: 0,
            title: String::new(),
            text: text.to_string(),
            summary: String::new(),
            char_span: (0, 0),
        }
    }

    pub fn block_index(&self, block_id: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.id == block_id)
    }

    pub fn texts(&self) -> Vec<&str> {
        self.blocks.iter().map(|b| b.text.as_str()).collect()
    }

    /// Inserts a block at `at` (0..=len) and returns its id.
    pub fn insert_block(&mut self, at: usize, text: &str) -> Result<BlockId, CorpusError> {
        if at > self.blocks.len() {
            return Err(CorpusError::NoSuchBlock(at));
        }
        let id = self.allocate_block_id();
        self.insert_block_with_id(at, id.clone(), text);
        Ok(id)
    }

    pub(crate) fn insert_block_with_id(&mut self, at: usize, id: BlockId, text: &str) {
        let block = self.make_block(id, text);
        self.blocks.insert(at, block);
        self.commit();
    }

    pub fn set_block_text(&mut self, index: usize, text: &str) -> Result<(), CorpusError> {
        let block = self.blocks.get_mut(index).ok_or(CorpusError::NoSuchBlock(index))?;
        block.text = text.to_string();
        self.commit();
        Ok(())
    }

    pub fn delete_block(&mut self, index: usize) -> Result<Block, CorpusError> {
        if index >= self.blocks.len() {
            return Err(CorpusError::NoSuchBlock(index));
        }
        let removed = self.blocks.remove(index);
        self.commit();
        Ok(removed)
    }

    fn commit(&mut self) {
        self.version += 1;
        self.reindex();
    }

    fn reindex(&mut self) {
        let mut body = String::new();
        let mut offset = 0usize;
        for (i, block) in self.blocks.iter_mut().enumerate() {
            if i > 0 {
                body.push_str(DRAFT_BLOCK_SEPARATOR);
                offset += DRAFT_BLOCK_SEPARATOR.chars().count();
            }
            let len = text::char_len(&block.text);
            block.index = i;
            block.char_span = (offset, offset + len);
            body.push_str(&block.text);
            offset += len;
        }
        self.story.body = body;
    }
}

/// One entry of a JSON corpus manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    #[serde(default)]
    pub title: String,
    pub body: String,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed manifest: {0}")]
    Malformed(String),
    #[error("manifest has no stories")]
    Empty,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    body: Option<String>,
    #[serde(default)]
    path: Option<String>,
}

/// Parses a JSON array of `{title, body}` or `{title, path}` entries. Paths
/// resolve against `base`; without a base only inline bodies are accepted.
pub fn parse_manifest(json: &str, base: Option<&std::path::Path>) -> Result<Vec<ManifestEntry>, ManifestError> {
    let raw: Vec<RawEntry> = serde_json::from_str(json).map_err(|e| ManifestError::Malformed(e.to_string()))?;
    if raw.is_empty() {
        return Err(ManifestError::Empty);
    }
    raw.into_iter()
        .enumerate()
        .map(|(i, e)| {
            let (body, stem) = match (e.body, e.path, base) {
                (Some(body), None, _) => (body, None),
                (None, Some(rel), Some(base)) => {
                    let p = base.join(&rel);
                    let body = std::fs::read_to_string(&p).map_err(|source| ManifestError::Io {
                        path: p.display().to_string(),
                        source,
                    })?;
                    let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned());
                    (body, stem)
                }
                (None, Some(_), None) => {
                    return Err(ManifestError::Malformed(format!(
                        "entry {i}: paths are not accepted here"
                    )))
                }
                _ => {
                    return Err(ManifestError::Malformed(format!(
                        "entry {i}: needs exactly one of body or path"
                    )))
                }
            };
            Ok(ManifestEntry {
                title: e.title.or(stem).unwrap_or_default(),
                body,
            })
        })
        .collect()
}

/// Reads corpus input: a `.json` manifest, a directory of `.txt` files
/// (sorted by name, title taken from the file stem), or one text file.
pub fn read_corpus_input(path: &std::path::Path) -> Result<Vec<ManifestEntry>, ManifestError> {
    let io = |source| ManifestError::Io {
        path: path.display().to_string(),
        source,
    };
    let text_entry = |p: &std::path::Path| -> Result<ManifestEntry, ManifestError> {
        let body = std::fs::read_to_string(p).map_err(|source| ManifestError::Io {
            path: p.display().to_string(),
            source,
        })?;
        let title = p
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(ManifestEntry { title, body })
    };
    if path.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(path)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        files.sort();
        let entries = files.iter().map(|p| text_entry(p)).collect::<Result<Vec<_>, _>>()?;
        if entries.is_empty() {
            return Err(ManifestError::Empty);
        }
        Ok(entries)
    } else if path.extension().is_some_and(|x| x == "json") {
        parse_manifest(&std::fs::read_to_string(path).map_err(io)?, path.parent())
    } else {
        Ok(vec![text_entry(path)?])
    }
}
