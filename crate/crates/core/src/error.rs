//! Error type shared by every module of the toolkit.

use thiserror::Error;

/// Unified error for parsing, evaluation, linear algebra, root finding and
/// file I/O. Variants carry enough context to point the user at the offending
/// input (source position, sample point, index) without a backtrace.
#[derive(Debug, Error)]
pub enum Error {
    /// Syntax error while tokenizing or parsing an expression.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// Identifier not declared in the active chart (or `p` outside a Lax context).
    #[error("unknown identifier `{name}` at line {line}, column {column}")]
    UnknownIdentifier {
        name: String,
        line: usize,
        column: usize,
    },

    /// Evaluation left the domain of an elementary function or divided by zero.
    #[error("domain error in `{op}`: {message}")]
    Domain { op: String, message: String },

    /// A matrix that must be invertible was singular at the working precision.
    #[error("singular matrix in {context} (pivot {pivot:e})")]
    Singular { context: String, pivot: f64 },

    /// Malformed manifold-specification document.
    #[error("invalid spec{}: {message}", path.as_ref().map(|p| format!(" `{p}`")).unwrap_or_default())]
    Spec {
        path: Option<String>,
        message: String,
    },

    /// A root search failed to converge or found an unexpected root count.
    #[error("root finding failed: {0}")]
    RootFind(String),

    /// Degree-by-degree integration met inconsistent cross-derivative data.
    #[error("series integration inconsistent at degree {degree} (mismatch {mismatch:e}); the input does not satisfy the compatibility premise")]
    SeriesInconsistent { degree: usize, mismatch: f64 },

    /// Requested operation needs data the spec does not provide.
    #[error("suite `{suite}` is not applicable to `{spec}`: {reason}")]
    Inapplicable {
        suite: String,
        spec: String,
        reason: String,
    },

    /// Generic invalid-argument error for library calls.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Shorthand for a `Domain` error.
    pub fn domain(op: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Domain {
            op: op.into(),
            message: message.into(),
        }
    }

    /// Shorthand for a `Spec` error without a path.
    pub fn spec(message: impl Into<String>) -> Self {
        Error::Spec {
            path: None,
            message: message.into(),
        }
    }
}
