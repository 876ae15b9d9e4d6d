use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the identification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A kernel exponent `|xᵀy| / μ` exceeded [`crate::kernels::EXPONENT_LIMIT`].
    #[error("kernel exponent {exponent:.6e} exceeds the overflow guard of {limit}")]
    KernelOverflow { exponent: f64, limit: f64 },

    /// A kernel failure raised while assembling Gram entry (i, j).
    #[error("Gram entry ({i}, {j}): {source}")]
    GramEntry {
        i: usize,
        j: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid configuration: {field}: {message}")]
    Config { field: String, message: String },

    #[error("{}", format_location(.path.as_ref(), *.line, .message))]
    Format {
        path: Option<PathBuf>,
        line: Option<usize>,
        message: String,
    },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("integration diverged at t = {time}")]
    Divergence { time: f64 },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn format_location(path: Option<&PathBuf>, line: Option<usize>, message: &str) -> String {
    match (path, line) {
        (Some(p), Some(l)) => format!("{}:{}: {}", p.display(), l, message),
        (Some(p), None) => format!("{}: {}", p.display(), message),
        (None, Some(l)) => format!("line {l}: {message}"),
        (None, None) => message.to_string(),
    }
}

/// Coarse classification used for process exit codes and FFI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

impl Error {
    pub(crate) fn format(message: impl Into<String>) -> Self {
        Error::Format {
            path: None,
            line: None,
            message: message.into(),
        }
    }

    pub(crate) fn format_at(line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            path: None,
            line: Some(line),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Attach a file path to a format error that does not yet carry one.
    pub(crate) fn with_path(self, p: impl Into<PathBuf>) -> Self {
        match self {
            Error::Format {
                path: None,
                line,
                message,
            } => Error::Format {
                path: Some(p.into()),
                line,
                message,
            },
            other => other,
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Argument(_) | Error::Config { .. } => ErrorKind::Usage,
            Error::Format { .. } | Error::Io { .. } => ErrorKind::Data,
            Error::KernelOverflow { .. } | Error::Degenerate(_) | Error::Divergence { .. } => {
                ErrorKind::Numerical
            }
            Error::GramEntry { source, .. } | Error::Stage { source, .. } => source.kind(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_errors_keep_their_kind() {
        let e = Error::KernelOverflow {
            exponent: 800.0,
            limit: 700.0,
        };
        let wrapped = Error::GramEntry {
            i: 1,
            j: 2,
            source: Box::new(e),
        }
        .in_stage("gram");
        assert_eq!(wrapped.kind(), ErrorKind::Numerical);
        let msg = wrapped.to_string();
        assert!(msg.contains("(1, 2)"), "{msg}");
        assert!(msg.contains("8.0"), "{msg}");
    }

    #[test]
    fn format_error_mentions_line() {
        let e = Error::format_at(17, "bad grid").with_path("data.csv");
        assert_eq!(e.to_string(), "data.csv:17: bad grid");
        assert_eq!(e.kind(), ErrorKind::Data);
    }
}
