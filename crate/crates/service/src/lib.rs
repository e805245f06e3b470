//! REST facade over the analysis pipeline, arcs, search and remix
//! workspaces. All state lives in one store file plus a JSONL event log next
//! to it; every successful mutation is written through before responding.

mod error;
mod routes;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde::Serialize;
use storyremix_core::analysis::ClassifierKind;
use storyremix_core::arc::ValenceLexicon;
use storyremix_core::corpus::StoryId;
use storyremix_core::gateway::Gateway;
use storyremix_core::store::{EventError, EventLog, Store, StoreError};

pub use error::ApiError;
pub use routes::router;

pub struct ServiceConfig {
    pub store_path: PathBuf,
    pub gateway: Arc<Gateway>,
    pub lexicon: Arc<ValenceLexicon>,
    pub classifier: ClassifierKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Running,
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Job {
    pub id: String,
    pub state: JobState,
    pub story_ids: Vec<StoryId>,
    pub processed: Vec<StoryId>,
    pub failed: Vec<StoryId>,
}

pub(crate) struct Inner {
    pub(crate) config: ServiceConfig,
    pub(crate) store: RwLock<Store>,
    pub(crate) events: Mutex<EventLog>,
    pub(crate) jobs: Mutex<BTreeMap<String, Job>>,
    next_job: AtomicU64,
}

/// Shared handle passed to every handler.
#[derive(Clone)]
pub struct AppState(pub(crate) Arc<Inner>);

#[derive(Debug, thiserror::Error)]
pub enum OpenError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Events(#[from] EventError),
}

impl AppState {
    /// Loads the store file (or starts empty) and its event log.
    pub fn open(config: ServiceConfig) -> Result<Self, OpenError> {
        let store = Store::open_or_new(&config.store_path)?;
        let events = EventLog::open(EventLog::path_for(&config.store_path))?;
        Ok(AppState(Arc::new(Inner {
            config,
            store: RwLock::new(store),
            events: Mutex::new(events),
            jobs: Mutex::new(BTreeMap::new()),
            next_job: AtomicU64::new(1),
        })))
    }

    /// Canonical snapshot of the in-memory store.
    pub fn snapshot(&self) -> String {
        self.0.store.read().expect("store lock poisoned").snapshot()
    }

    pub fn job(&self, id: &str) -> Option<Job> {
        self.0.jobs.lock().expect("job table poisoned").get(id).cloned()
    }

    pub(crate) fn new_job_id(&self) -> String {
        format!("job-{:04}", self.0.next_job.fetch_add(1, Ordering::SeqCst))
    }
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(state: AppState, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state)).await
}
