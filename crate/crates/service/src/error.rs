use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;
use thiserror::Error;

use faircompass_core::Error as CoreError;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),
    #[error("upload of {size} bytes exceeds the cap of {cap}")]
    DatasetTooLarge { size: usize, cap: usize },
    #[error("request body exceeds the size limit")]
    PayloadTooLarge,
    #[error("session `{0}` already exists")]
    SessionExists(String),
    #[error("invalid request: {0}")]
    BadRequest(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("storage: {0}")]
    Storage(String),
}

impl From<std::io::Error> for ServiceError {
    fn from(e: std::io::Error) -> Self {
        ServiceError::Storage(e.to_string())
    }
}

impl ServiceError {
    pub fn kind(&self) -> &'static str {
        match self {
            ServiceError::Core(e) => e.kind(),
            ServiceError::UnknownDataset(_) => "UnknownDataset",
            ServiceError::DatasetTooLarge { .. } => "DatasetTooLarge",
            ServiceError::PayloadTooLarge => "PayloadTooLarge",
            ServiceError::SessionExists(_) => "SessionExists",
            ServiceError::BadRequest(_) => "BadRequest",
            ServiceError::Config(_) => "Config",
            ServiceError::Storage(_) => "Storage",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::Core(e) => match e {
                CoreError::UnknownSession(_)
                | CoreError::UnknownSubgroup(_)
                | CoreError::UnknownGroupSet(_)
                | CoreError::UnknownNode(_)
                | CoreError::UnknownFeature(_) => StatusCode::NOT_FOUND,
                CoreError::OffPath { .. } => StatusCode::CONFLICT,
                CoreError::CorruptRecord(_) => StatusCode::INTERNAL_SERVER_ERROR,
                _ => StatusCode::UNPROCESSABLE_ENTITY,
            },
            ServiceError::UnknownDataset(_) => StatusCode::NOT_FOUND,
            ServiceError::DatasetTooLarge { .. } | ServiceError::PayloadTooLarge => {
                StatusCode::PAYLOAD_TOO_LARGE
            }
            ServiceError::SessionExists(_) => StatusCode::CONFLICT,
            ServiceError::BadRequest(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Config(_) | ServiceError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = json!({ "error": self.kind(), "message": self.to_string() });
        (self.status(), Json(body)).into_response()
    }
}
