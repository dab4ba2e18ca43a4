use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use mergeloop::CommandError;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("no session `{0}`")]
    UnknownSession(String),
    #[error("{message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    BadConfig(String),
    #[error("{0}")]
    BadCommandSyntax(String),
    #[error(transparent)]
    Command(#[from] CommandError),
    #[error("the session has no previous step")]
    NoPreviousStep,
    #[error("{0}")]
    Internal(String),
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    line: Option<usize>,
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::UnknownSession(_) => StatusCode::NOT_FOUND,
            ApiError::Parse { .. } | ApiError::BadRequest(_) | ApiError::BadCommandSyntax(_) => {
                StatusCode::BAD_REQUEST
            }
            ApiError::BadConfig(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Command(_) | ApiError::NoPreviousStep => StatusCode::CONFLICT,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    /// Machine-readable error name; for command failures, the command error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            ApiError::UnknownSession(_) => "UnknownSession",
            ApiError::Parse { .. } => "ParseError",
            ApiError::BadRequest(_) => "BadRequest",
            ApiError::BadConfig(_) => "BadConfig",
            ApiError::BadCommandSyntax(_) => "BadCommandSyntax",
            ApiError::Command(e) => e.kind(),
            ApiError::NoPreviousStep => "NoPreviousStep",
            ApiError::Internal(_) => "Internal",
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let line = match self {
            ApiError::Parse { line, .. } => Some(line),
            _ => None,
        };
        let body = ErrorBody {
            error: self.kind(),
            message: self.to_string(),
            line,
        };
        (self.status(), Json(body)).into_response()
    }
}
