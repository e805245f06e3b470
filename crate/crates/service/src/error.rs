use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;
use storyremix_core::arc::ArcError;
use storyremix_core::corpus::{CorpusError, ManifestError};
use storyremix_core::gateway::GatewayError;
use storyremix_core::remix::RemixError;
use storyremix_core::search::SearchError;
use storyremix_core::store::{EventError, StoreError};

/// JSON error body `{"error": code, "message": text}` with a status.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: String,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl ToString) -> Self {
        ApiError {
            status,
            code: code.to_string(),
            message: message.to_string(),
        }
    }

    pub fn bad_request(code: &str, message: impl ToString) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn not_found(code: &str, message: impl ToString) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, message)
    }

    pub fn internal(message: impl ToString) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": self.code, "message": self.message}))).into_response()
    }
}

impl From<GatewayError> for ApiError {
    fn from(e: GatewayError) -> Self {
        let status = match e {
            GatewayError::UnboundPlaceholder(_) => StatusCode::INTERNAL_SERVER_ERROR,
            GatewayError::NoProvider | GatewayError::FixtureMiss { .. } => StatusCode::SERVICE_UNAVAILABLE,
            _ => StatusCode::BAD_GATEWAY,
        };
        ApiError::new(status, e.code(), &e)
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownStory(_) => ApiError::not_found("UnknownStory", &e),
            StoreError::UnknownWorkspace(_) => ApiError::not_found("UnknownDraft", &e),
            StoreError::Corpus(c) => c.into(),
            StoreError::Io(_) | StoreError::Format(_) => ApiError::internal(&e),
        }
    }
}

impl From<CorpusError> for ApiError {
    fn from(e: CorpusError) -> Self {
        let code = match e {
            CorpusError::EmptyBody => "EmptyBody",
            CorpusError::NoCandidates => "NoCandidates",
            CorpusError::NotVerbatim(_) => "NotVerbatim",
            CorpusError::OutOfOrder(_) => "OutOfOrder",
            CorpusError::NoSuchBlock(_) => "NoSuchBlock",
        };
        ApiError::bad_request(code, &e)
    }
}

impl From<ManifestError> for ApiError {
    fn from(e: ManifestError) -> Self {
        let code = match e {
            ManifestError::Empty => "EmptyManifest",
            _ => "MalformedManifest",
        };
        ApiError::bad_request(code, &e)
    }
}

impl From<RemixError> for ApiError {
    fn from(e: RemixError) -> Self {
        match e {
            RemixError::Gateway(g) => g.into(),
            RemixError::UnknownTrack(_)
            | RemixError::UnknownTile(_)
            | RemixError::UnknownStrategy(_)
            | RemixError::UnknownBlock(_)
            | RemixError::UnknownRevision(_) => ApiError::not_found(e.code(), &e),
            RemixError::Busy(_) | RemixError::NotPending(_) => ApiError::new(StatusCode::CONFLICT, e.code(), &e),
            RemixError::Malformed(_) => ApiError::new(StatusCode::BAD_GATEWAY, e.code(), &e),
            _ => ApiError::bad_request(e.code(), &e),
        }
    }
}

impl From<SearchError> for ApiError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::Gateway(GatewayError::NoProvider) => {
                ApiError::bad_request("NoEmbeddingProvider", "semantic search needs an embedding provider")
            }
            SearchError::Gateway(g) => g.into(),
            _ => ApiError::bad_request(e.code(), &e),
        }
    }
}

impl From<ArcError> for ApiError {
    fn from(e: ArcError) -> Self {
        match e {
            ArcError::Gateway(g) => g.into(),
            ArcError::EmptyCorpus => ApiError::new(StatusCode::CONFLICT, e.code(), &e),
            ArcError::UnparseableList(_) | ArcError::EmptyProtagonist => {
                ApiError::new(StatusCode::BAD_GATEWAY, e.code(), &e)
            }
            _ => ApiError::bad_request(e.code(), &e),
        }
    }
}

impl From<EventError> for ApiError {
    fn from(e: EventError) -> Self {
        match e {
            EventError::EmptyType => ApiError::bad_request("MalformedEvent", &e),
            EventError::NonMonotone { .. } => ApiError::bad_request("NonMonotoneTimestamp", &e),
            _ => ApiError::internal(&e),
        }
    }
}
