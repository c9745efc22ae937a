use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

/// Uniform error body: `{code, message, detail}`.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    pub detail: serde_json::Value,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                code: code.to_string(),
                message: message.into(),
                detail: serde_json::Value::Null,
            },
        }
    }

    pub fn with_detail(mut self, detail: serde_json::Value) -> Self {
        self.body.detail = detail;
        self
    }

    pub fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, &format!("unknown_{what}"), format!("no {what} named {id:?}"))
    }

    pub fn conflict(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, code, message)
    }
}

impl From<sda2e_core::Error> for ApiError {
    fn from(e: sda2e_core::Error) -> Self {
        use sda2e_core::Error as E;
        let (status, code) = match &e {
            E::Config(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_config"),
            E::InvalidArgument(_) => (StatusCode::BAD_REQUEST, "invalid_argument"),
            E::Parse { .. } | E::Data(_) | E::Json(_) => (StatusCode::BAD_REQUEST, "invalid_data"),
            E::UndefinedMetric(_) => (StatusCode::UNPROCESSABLE_ENTITY, "undefined_metric"),
            E::Session(_) => (StatusCode::CONFLICT, "session_error"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        let detail = match &e {
            E::Parse { line, column, .. } => serde_json::json!({ "line": line, "column": column }),
            _ => serde_json::Value::Null,
        };
        Self::new(status, code, e.to_string()).with_detail(detail)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
