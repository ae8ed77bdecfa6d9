use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use photoscout::annotations::AlbumError;
use photoscout::engine::API_VERSION;
use photoscout::synthesis::SynthesisError;
use serde_json::json;

/// An error response: `{"v": 1, "error": message}` with `status`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, message)
    }

    pub fn unprocessable(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "v": API_VERSION, "error": self.message });
        (self.status, Json(body)).into_response()
    }
}

impl From<AlbumError> for ApiError {
    fn from(e: AlbumError) -> Self {
        let status = match &e {
            AlbumError::UnknownCluster(_) => StatusCode::NOT_FOUND,
            AlbumError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => StatusCode::NOT_FOUND,
            AlbumError::ReservedName(_) | AlbumError::DuplicateImageId(_) => StatusCode::CONFLICT,
            AlbumError::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            AlbumError::Schema { .. } | AlbumError::InvalidName(_) | AlbumError::BadThreshold(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
        };
        Self::new(status, e.to_string())
    }
}

impl From<SynthesisError> for ApiError {
    fn from(e: SynthesisError) -> Self {
        let status = match &e {
            SynthesisError::SketchSourceUnavailable(_) => StatusCode::BAD_GATEWAY,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Self::new(status, e.to_string())
    }
}
