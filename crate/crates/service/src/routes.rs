use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{FromRequest, FromRequestParts, Path, Query, State};
use axum::http::request::Parts;
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use storyremix_core::analysis::AnnotationId;
use storyremix_core::arc::{self, normalized_x, ValenceArc};
use storyremix_core::corpus::{self, BlockId};
use storyremix_core::pipeline;
use storyremix_core::remix::{self, RemixError, RemixWorkspace, StrategyCatalog};
use storyremix_core::search::{self, BlockQuery, Brush, Card};
use storyremix_core::store::{Store, UsageEvent};

use crate::error::ApiError;
use crate::{AppState, Job, JobState};

type ApiResult<T> = Result<T, ApiError>;

/// `Json` whose rejections become JSON 400 bodies.
pub struct Body<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: axum::extract::Request, state: &S) -> Result<Self, Self::Rejection> {
        Json::<T>::from_request(req, state)
            .await
            .map(|Json(v)| Body(v))
            .map_err(|e: JsonRejection| ApiError::bad_request("MalformedRequest", e.body_text()))
    }
}

/// `Query` whose rejections become JSON 400 bodies.
pub struct Params<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequestParts<S> for Params<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, Self::Rejection> {
        Query::<T>::from_request_parts(parts, state)
            .await
            .map(|Query(v)| Params(v))
            .map_err(|e: QueryRejection| ApiError::bad_request("MalformedQuery", e.body_text()))
    }
}

pub fn router(state: AppState) -> Router {
    let v1 = Router::new()
        .route("/corpus", post(post_corpus))
        .route("/jobs/{id}", get(get_job))
        .route("/stories", get(list_stories))
        .route("/stories/{id}", get(get_story))
        .route("/blocks", get(get_blocks))
        .route("/blocks/brush", get(get_brush))
        .route("/arcs", get(get_arcs))
        .route("/arcs/similar", get(get_similar))
        .route("/drafts", post(post_draft))
        .route("/drafts/{id}", get(get_draft))
        .route("/drafts/{id}/blocks", post(post_draft_block))
        .route("/remix/tracks", post(post_track))
        .route("/remix/tiles", post(post_tile))
        .route("/remix/tiles/resize", post(post_tile_resize))
        .route("/remix/tiles/remove", post(post_tile_remove))
        .route("/remix/strategies", get(get_block_strategies))
        .route("/remix/revise", post(post_revise))
        .route("/remix/continue", post(post_continue))
        .route("/remix/accept", post(post_accept))
        .route("/remix/discard", post(post_discard))
        .route("/remix/regenerate", post(post_regenerate))
        .route("/remix/reflect", post(post_reflect))
        .route("/remix/restore", post(post_restore))
        .route("/remix/history", get(get_history))
        .route("/events", post(post_event));
    Router::new().nest("/v1", v1).with_state(state)
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl AppState {
    fn read<T>(&self, f: impl FnOnce(&Store) -> ApiResult<T>) -> ApiResult<T> {
        let store = self
            .0
            .store
            .read()
            .map_err(|_| ApiError::internal("store lock poisoned"))?;
        f(&store)
    }

    /// Runs a mutation and writes the store through on success.
    fn write<T>(&self, f: impl FnOnce(&mut Store) -> ApiResult<T>) -> ApiResult<T> {
        let mut store = self
            .0
            .store
            .write()
            .map_err(|_| ApiError::internal("store lock poisoned"))?;
        let out = f(&mut store)?;
        store.save(&self.0.config.store_path)?;
        Ok(out)
    }

    /// Mutates one workspace with the store as strategy catalog.
    fn with_workspace<T>(
        &self,
        draft_id: &str,
        f: impl FnOnce(&mut RemixWorkspace, &dyn StrategyCatalog) -> Result<T, RemixError>,
    ) -> ApiResult<T> {
        self.write(|store| Ok(store.with_workspace(draft_id, f)??))
    }
}

/// Runs blocking work (store locks, model calls) off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

#[derive(Serialize)]
struct CorpusAccepted {
    story_ids: Vec<String>,
    job_id: String,
}

async fn post_corpus(State(state): State<AppState>, body: String) -> ApiResult<(StatusCode, Json<CorpusAccepted>)> {
    let entries = corpus::parse_manifest(&body, None)?;
    let story_ids = state.write(|store| {
        // Validate every entry before ingesting any.
        for (i, e) in entries.iter().enumerate() {
            if storyremix_core::text::normalize_ws(&e.body).is_empty() {
                return Err(ApiError::bad_request(
                    "EmptyBody",
                    format!("entry {i} has an empty body"),
                ));
            }
        }
        entries
            .iter()
            .map(|e| store.ingest(&e.title, &e.body).map_err(ApiError::from))
            .collect::<ApiResult<Vec<_>>>()
    })?;
    let job_id = state.new_job_id();
    state.0.jobs.lock().expect("job table poisoned").insert(
        job_id.clone(),
        Job {
            id: job_id.clone(),
            state: JobState::Running,
            story_ids: story_ids.clone(),
            processed: Vec::new(),
            failed: Vec::new(),
        },
    );

    let worker = state.clone();
    let jid = job_id.clone();
    let ids = story_ids.clone();
    tokio::task::spawn_blocking(move || run_job(&worker, &jid, &ids));
    Ok((StatusCode::ACCEPTED, Json(CorpusAccepted { story_ids, job_id })))
}

fn run_job(state: &AppState, job_id: &str, ids: &[String]) {
    let stories = state
        .read(|store| {
            Ok(ids
                .iter()
                .filter_map(|id| store.stories.get(id).cloned())
                .collect::<Vec<_>>())
        })
        .unwrap_or_default();
    let cfg = &state.0.config;
    let results = pipeline::analyze_stories(&cfg.gateway, &stories, cfg.classifier, &cfg.lexicon);
    let summary = state.write(|store| Ok(pipeline::apply_results(store, results)));
    let mut jobs = state.0.jobs.lock().expect("job table poisoned");
    if let Some(job) = jobs.get_mut(job_id) {
        match summary {
            Ok(s) => {
                job.processed = s.processed;
                job.failed = s.failed;
            }
            Err(e) => {
                tracing::error!(job = job_id, error = %e.message, "could not persist job results");
                job.failed = ids.to_vec();
            }
        }
        job.state = JobState::Done;
    }
}

async fn get_job(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Job>> {
    state
        .job(&id)
        .map(Json)
        .ok_or_else(|| ApiError::not_found("UnknownJob", format!("unknown job {id}")))
}

async fn list_stories(State(state): State<AppState>) -> ApiResult<Json<Value>> {
    state.read(|store| {
        let list: Vec<Value> = store
            .stories
            .values()
            .map(|s| {
                json!({
                    "id": s.id,
                    "title": s.title,
                    "analysis": store.analysis.get(&s.id),
                    "protagonist": store.protagonists.get(&s.id),
                })
            })
            .collect();
        Ok(Json(Value::Array(list)))
    })
}

async fn get_story(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    state.read(|store| {
        let s = store.story(&id)?;
        Ok(Json(json!({
            "story": s,
            "analysis": store.analysis.get(&id),
            "protagonist": store.protagonists.get(&id),
            "blocks": store.blocks_of(&id),
        })))
    })
}

async fn get_blocks(State(state): State<AppState>, Params(q): Params<BlockQuery>) -> ApiResult<Json<Vec<Card>>> {
    blocking(move || state.read(|store| Ok(Json(search::filter_blocks(store, &q, Some(&state.0.config.gateway))?))))
        .await
}

async fn get_brush(State(state): State<AppState>, Params(rect): Params<Brush>) -> ApiResult<Json<Vec<Card>>> {
    state.read(|store| Ok(Json(search::brush(store, rect)?)))
}

#[derive(Serialize)]
struct ArcPointView {
    block_id: BlockId,
    index: usize,
    x: f64,
    y: f64,
    raw_valence: f64,
    adjectives: [String; 3],
    coverage: u8,
}

#[derive(Serialize)]
struct ArcView {
    story_id: String,
    title: String,
    protagonist: Option<String>,
    points: Vec<ArcPointView>,
}

fn points_view(arc: &ValenceArc) -> Vec<ArcPointView> {
    let n = arc.points.len();
    arc.points
        .iter()
        .map(|p| ArcPointView {
            block_id: p.block_id.clone(),
            index: p.index,
            x: normalized_x(p.index, n),
            y: p.signed_valence,
            raw_valence: p.raw_valence,
            adjectives: p.adjectives.clone(),
            coverage: p.coverage,
        })
        .collect()
}

fn arc_view(store: &Store, arc: &ValenceArc) -> ArcView {
    ArcView {
        story_id: arc.story_id.clone(),
        title: store
            .stories
            .get(&arc.story_id)
            .map(|s| s.title.clone())
            .unwrap_or_default(),
        protagonist: store.protagonists.get(&arc.story_id).cloned(),
        points: points_view(arc),
    }
}

#[derive(Deserialize)]
struct ArcQuery {
    story_id: Option<String>,
}

async fn get_arcs(State(state): State<AppState>, Params(q): Params<ArcQuery>) -> ApiResult<Json<Value>> {
    state.read(|store| match q.story_id {
        Some(id) => {
            store.story(&id)?;
            let arc = store.arcs.get(&id).ok_or_else(|| {
                ApiError::new(
                    StatusCode::CONFLICT,
                    "NotAnalyzed",
                    format!("story {id} has no arc yet"),
                )
            })?;
            Ok(Json(
                serde_json::to_value(arc_view(store, arc)).expect("arc view serializes"),
            ))
        }
        None => {
            let all: Vec<ArcView> = store.arcs.values().map(|a| arc_view(store, a)).collect();
            Ok(Json(serde_json::to_value(all).expect("arc views serialize")))
        }
    })
}

#[derive(Deserialize)]
struct SimilarQuery {
    draft_id: String,
}

async fn get_similar(State(state): State<AppState>, Params(q): Params<SimilarQuery>) -> ApiResult<Json<Value>> {
    blocking(move || {
        let (draft, arcs) = state.read(|store| {
            let ws = store.workspace(&q.draft_id)?;
            Ok((ws.draft.clone(), store.arcs.values().cloned().collect::<Vec<_>>()))
        })?;
        if arcs.is_empty() {
            return Err(arc::ArcError::EmptyCorpus.into());
        }
        let cfg = &state.0.config;
        let sketched = arc::sketch_arc(&cfg.gateway, &draft.story, &draft.blocks, &cfg.lexicon)?;
        let best = arc::most_similar(&sketched.arc.signed(), &arcs)?;
        Ok(Json(json!({
            "story_id": best.story_id,
            "S": best.score,
            "draft_arc": points_view(&sketched.arc),
        })))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewDraft {
    #[serde(default)]
    title: String,
    #[serde(default)]
    blocks: Option<Vec<String>>,
    /// Alternative to `blocks`: plain text split on blank lines.
    #[serde(default)]
    text: Option<String>,
}

pub(crate) fn split_blocks(text: &str) -> Vec<String> {
    text.split("\n\n")
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(str::to_string)
        .collect()
}

async fn post_draft(
    State(state): State<AppState>,
    Body(req): Body<NewDraft>,
) -> ApiResult<(StatusCode, Json<RemixWorkspace>)> {
    let blocks = match (req.blocks, req.text) {
        (Some(b), None) => b,
        (None, Some(t)) => split_blocks(&t),
        (None, None) => Vec::new(),
        (Some(_), Some(_)) => {
            return Err(ApiError::bad_request(
                "MalformedRequest",
                "give blocks or text, not both",
            ))
        }
    };
    state.write(|store| {
        let id = store.create_workspace(&req.title, &blocks);
        Ok((StatusCode::CREATED, Json(store.workspace(&id)?.clone())))
    })
}

async fn get_draft(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<RemixWorkspace>> {
    state.read(|store| Ok(Json(store.workspace(&id)?.clone())))
}

#[derive(Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
enum BlockEdit {
    Edit { index: usize, text: String },
    Insert { at: usize, text: String },
    Delete { index: usize },
}

async fn post_draft_block(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Body(edit): Body<BlockEdit>,
) -> ApiResult<Json<RemixWorkspace>> {
    state
        .with_workspace(&id, |ws, _| {
            match edit {
                BlockEdit::Edit { index, text } => ws.edit_block(index, &text)?,
                BlockEdit::Insert { at, text } => {
                    ws.insert_block(at, &text)?;
                }
                BlockEdit::Delete { index } => {
                    ws.delete_block(index)?;
                }
            }
            Ok(ws.clone())
        })
        .map(Json)
}

#[derive(Deserialize)]
struct TrackReq {
    draft_id: String,
    dimension: String,
}

async fn post_track(State(state): State<AppState>, Body(r): Body<TrackReq>) -> ApiResult<(StatusCode, Json<Value>)> {
    let track = state.with_workspace(&r.draft_id, |ws, _| ws.add_track(&r.dimension))?;
    Ok((StatusCode::CREATED, Json(json!(track))))
}

#[derive(Deserialize)]
struct TileReq {
    draft_id: String,
    track_id: String,
    strategy_id: AnnotationId,
    span: (usize, usize),
}

async fn post_tile(State(state): State<AppState>, Body(r): Body<TileReq>) -> ApiResult<(StatusCode, Json<Value>)> {
    let tile = state.with_workspace(&r.draft_id, |ws, catalog| {
        let ann = catalog
            .annotation(&r.strategy_id)
            .ok_or_else(|| RemixError::UnknownStrategy(r.strategy_id.clone()))?;
        ws.place_tile(&r.track_id, ann, r.span)
    })?;
    Ok((StatusCode::CREATED, Json(json!(tile))))
}

#[derive(Deserialize)]
struct TileResizeReq {
    draft_id: String,
    tile_id: String,
    span: (usize, usize),
}

async fn post_tile_resize(State(state): State<AppState>, Body(r): Body<TileResizeReq>) -> ApiResult<Json<Value>> {
    let tile = state.with_workspace(&r.draft_id, |ws, _| ws.resize_tile(&r.tile_id, r.span))?;
    Ok(Json(json!(tile)))
}

#[derive(Deserialize)]
struct TileRef {
    draft_id: String,
    tile_id: String,
}

async fn post_tile_remove(State(state): State<AppState>, Body(r): Body<TileRef>) -> ApiResult<Json<Value>> {
    let tile = state.with_workspace(&r.draft_id, |ws, _| ws.remove_tile(&r.tile_id))?;
    Ok(Json(json!(tile)))
}

#[derive(Deserialize)]
struct BlockStrategiesQuery {
    draft_id: String,
    block_index: usize,
}

async fn get_block_strategies(
    State(state): State<AppState>,
    Params(q): Params<BlockStrategiesQuery>,
) -> ApiResult<Json<Vec<AnnotationId>>> {
    state.read(|store| Ok(Json(store.workspace(&q.draft_id)?.strategies_for_block(q.block_index))))
}

#[derive(Deserialize)]
struct ReviseReq {
    draft_id: String,
    block_index: usize,
    /// Defaults to the strategies of every tile covering the block.
    #[serde(default)]
    strategy_ids: Option<Vec<AnnotationId>>,
}

async fn post_revise(State(state): State<AppState>, Body(r): Body<ReviseReq>) -> ApiResult<(StatusCode, Json<Value>)> {
    blocking(move || {
        let gateway = state.0.config.gateway.clone();
        let rev = state.with_workspace(&r.draft_id, |ws, catalog| {
            let ids = r.strategy_ids.unwrap_or_else(|| ws.strategies_for_block(r.block_index));
            ws.revise_block(&gateway, catalog, r.block_index, &ids, now_ms())
        })?;
        Ok((StatusCode::CREATED, Json(json!(rev))))
    })
    .await
}

#[derive(Deserialize)]
struct ContinueReq {
    draft_id: String,
    #[serde(default)]
    strategy_ids: Option<Vec<AnnotationId>>,
    #[serde(default)]
    hint: Option<String>,
}

async fn post_continue(
    State(state): State<AppState>,
    Body(r): Body<ContinueReq>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    blocking(move || {
        let gateway = state.0.config.gateway.clone();
        let rev = state.with_workspace(&r.draft_id, |ws, catalog| {
            let ids = r
                .strategy_ids
                .unwrap_or_else(|| ws.strategies_for_block(ws.continuation_slot()));
            ws.continue_story(&gateway, catalog, &ids, r.hint.as_deref(), now_ms())
        })?;
        Ok((StatusCode::CREATED, Json(json!(rev))))
    })
    .await
}

#[derive(Deserialize)]
struct RevisionRef {
    draft_id: String,
    revision_id: String,
}

async fn post_accept(State(state): State<AppState>, Body(r): Body<RevisionRef>) -> ApiResult<Json<Value>> {
    let rev = state.with_workspace(&r.draft_id, |ws, _| ws.accept(&r.revision_id))?;
    Ok(Json(json!(rev)))
}

async fn post_discard(State(state): State<AppState>, Body(r): Body<RevisionRef>) -> ApiResult<Json<Value>> {
    let rev = state.with_workspace(&r.draft_id, |ws, _| ws.discard(&r.revision_id))?;
    Ok(Json(json!(rev)))
}

async fn post_regenerate(
    State(state): State<AppState>,
    Body(r): Body<RevisionRef>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    blocking(move || {
        let gateway = state.0.config.gateway.clone();
        let rev = state.with_workspace(&r.draft_id, |ws, catalog| {
            ws.regenerate(&gateway, catalog, &r.revision_id, now_ms())
        })?;
        Ok((StatusCode::CREATED, Json(json!(rev))))
    })
    .await
}

#[derive(Deserialize)]
struct ReflectReq {
    strategy_id: AnnotationId,
    /// Either the revised text itself, or a draft block to read it from.
    #[serde(default)]
    revised_text: Option<String>,
    #[serde(default)]
    draft_id: Option<String>,
    #[serde(default)]
    block_index: Option<usize>,
}

async fn post_reflect(State(state): State<AppState>, Body(r): Body<ReflectReq>) -> ApiResult<Json<Value>> {
    blocking(move || {
        let (ann, example, revised) = state.read(|store| {
            let ann = store
                .annotations
                .get(&r.strategy_id)
                .ok_or_else(|| ApiError::from(RemixError::UnknownStrategy(r.strategy_id.clone())))?
                .clone();
            let example = store
                .blocks
                .get(&ann.block_id)
                .ok_or_else(|| ApiError::from(RemixError::UnknownBlock(ann.block_id.clone())))?
                .clone();
            let revised = match (&r.revised_text, &r.draft_id, r.block_index) {
                (Some(t), None, None) => t.clone(),
                (None, Some(d), Some(i)) => store
                    .workspace(d)?
                    .draft
                    .blocks
                    .get(i)
                    .ok_or(RemixError::NoSuchBlock(i))?
                    .text
                    .clone(),
                _ => {
                    return Err(ApiError::bad_request(
                        "MalformedRequest",
                        "give revised_text, or draft_id with block_index",
                    ))
                }
            };
            Ok((ann, example, revised))
        })?;
        Ok(Json(json!(remix::reflect(
            &state.0.config.gateway,
            &example,
            &ann,
            &revised
        )?)))
    })
    .await
}

#[derive(Deserialize)]
struct RestoreReq {
    draft_id: String,
    block_id: BlockId,
    revision_id: String,
    /// Restore the text from before the revision instead of its output.
    #[serde(default)]
    use_previous: bool,
}

async fn post_restore(State(state): State<AppState>, Body(r): Body<RestoreReq>) -> ApiResult<Json<Value>> {
    let rev = state.with_workspace(&r.draft_id, |ws, _| {
        ws.restore(&r.block_id, &r.revision_id, r.use_previous, now_ms())
    })?;
    Ok(Json(json!(rev)))
}

#[derive(Deserialize)]
struct HistoryQuery {
    draft_id: String,
    block_id: BlockId,
}

async fn get_history(State(state): State<AppState>, Params(q): Params<HistoryQuery>) -> ApiResult<Json<Value>> {
    state.read(|store| Ok(Json(json!(store.workspace(&q.draft_id)?.history(&q.block_id)))))
}

async fn post_event(
    State(state): State<AppState>,
    Body(event): Body<UsageEvent>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let mut log = state
        .0
        .events
        .lock()
        .map_err(|_| ApiError::internal("event log poisoned"))?;
    log.append(&event)?;
    Ok((StatusCode::CREATED, Json(json!({"count": log.len()}))))
}
