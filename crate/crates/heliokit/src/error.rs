//! Command errors and their exit codes.

use heliokit_core::linalg::LinalgError;
use heliokit_core::{FitsError, LatentError, MetricsError, PrepError, StatsError};
use serde_json::json;

use crate::config::ConfigError;
use crate::feat1::FeatError;
use crate::imageio::ImageIoError;
use crate::tables::TableError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerics,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Usage => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numerics => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorKind::Usage => "usage",
            ErrorKind::Data => "data",
            ErrorKind::Numerics => "numerics",
        }
    }
}

/// A failed command: a kind, a short machine-readable code and a message.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{code}: {message}")]
pub struct HelioError {
    pub kind: ErrorKind,
    pub code: String,
    pub message: String,
}

impl HelioError {
    pub fn new(kind: ErrorKind, code: &str, message: impl Into<String>) -> Self {
        HelioError { kind, code: code.to_string(), message: message.into() }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Usage, "Usage", message)
    }

    pub fn data(code: &str, message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Data, code, message)
    }

    /// Adds context (usually a path) in front of the message.
    pub fn context(mut self, what: impl std::fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }

    /// The single-line JSON error record written to stderr.
    pub fn to_record(&self) -> String {
        json!({
            "record": "error",
            "kind": self.kind.name(),
            "code": self.code,
            "message": self.message,
            "exit_code": self.exit_code(),
        })
        .to_string()
    }
}

impl From<std::io::Error> for HelioError {
    fn from(e: std::io::Error) -> Self {
        HelioError::data("IoFailure", e.to_string())
    }
}

impl From<FeatError> for HelioError {
    fn from(e: FeatError) -> Self {
        let code = match &e {
            FeatError::BadMagic => "BadMagic",
            FeatError::UnsupportedVersion(_) => "UnsupportedVersion",
            FeatError::CorruptLength(_) => "CorruptLength",
            FeatError::NonFiniteValue { .. } => "NonFiniteValue",
            FeatError::InvariantViolation(_) => "InvariantViolation",
            FeatError::IoFailure(_) => "IoFailure",
        };
        HelioError::data(code, e.to_string())
    }
}

impl From<ImageIoError> for HelioError {
    fn from(e: ImageIoError) -> Self {
        let code = match &e {
            ImageIoError::BadMagic => "BadMagic",
            ImageIoError::CorruptLength(_) => "CorruptLength",
            ImageIoError::Invalid(_) => "InvariantViolation",
            ImageIoError::UnsupportedExtension(_) => "UnsupportedFormat",
            ImageIoError::Png(_) => "PngError",
            ImageIoError::Io(_) => "IoFailure",
        };
        HelioError::data(code, e.to_string())
    }
}

impl From<FitsError> for HelioError {
    fn from(e: FitsError) -> Self {
        HelioError::data("FitsError", e.to_string())
    }
}

impl From<PrepError> for HelioError {
    fn from(e: PrepError) -> Self {
        let code = match e {
            PrepError::EmptyInput => "EmptyInput",
            PrepError::NonDivisibleFactor { .. } => "NonDivisibleFactor",
            PrepError::PatchTooLarge { .. } => "PatchTooLarge",
            _ => "InvariantViolation",
        };
        HelioError::data(code, e.to_string())
    }
}

fn linalg(e: &LinalgError) -> HelioError {
    HelioError::new(ErrorKind::Numerics, "Numerics", e.to_string())
}

impl From<LatentError> for HelioError {
    fn from(e: LatentError) -> Self {
        match &e {
            LatentError::KTooLarge { .. } => HelioError::new(ErrorKind::Usage, "KTooLarge", e.to_string()),
            LatentError::BadComponent { .. } => HelioError::new(ErrorKind::Usage, "BadComponent", e.to_string()),
            LatentError::Linalg(l) => linalg(l),
            LatentError::DegenerateData => HelioError::data("DegenerateData", e.to_string()),
            _ => HelioError::data("InvariantViolation", e.to_string()),
        }
    }
}

impl From<MetricsError> for HelioError {
    fn from(e: MetricsError) -> Self {
        let numerics = |code: &str| HelioError::new(ErrorKind::Numerics, code, e.to_string());
        match &e {
            MetricsError::NotSymmetric(_) | MetricsError::Numerics(_) => numerics("Numerics"),
            MetricsError::NotPsd(_) => numerics("NotPsd"),
            MetricsError::Linalg(l) => linalg(l),
            MetricsError::KTooLarge { .. } => HelioError::new(ErrorKind::Usage, "KTooLarge", e.to_string()),
            MetricsError::SubsetTooLarge { .. } => HelioError::new(ErrorKind::Usage, "SubsetTooLarge", e.to_string()),
            MetricsError::BadCutoff(_) => HelioError::new(ErrorKind::Usage, "BadCutoff", e.to_string()),
            MetricsError::Prep(p) => p.clone().into(),
            MetricsError::Latent(l) => l.clone().into(),
            MetricsError::EmptyInput => HelioError::data("EmptyInput", e.to_string()),
            MetricsError::TooFewSamples { .. } => HelioError::data("TooFewSamples", e.to_string()),
            MetricsError::DimMismatch(..) => HelioError::data("DimMismatch", e.to_string()),
            _ => HelioError::data("InvariantViolation", e.to_string()),
        }
    }
}

impl From<StatsError> for HelioError {
    fn from(e: StatsError) -> Self {
        let code = match e {
            StatsError::EmptyInput => "EmptyInput",
            StatsError::MissingMetric { .. } => "MissingMetric",
            _ => "StatsError",
        };
        HelioError::data(code, e.to_string())
    }
}

impl From<TableError> for HelioError {
    fn from(e: TableError) -> Self {
        HelioError::data("BadTable", e.to_string())
    }
}

impl From<ConfigError> for HelioError {
    fn from(e: ConfigError) -> Self {
        HelioError::usage(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_kind() {
        assert_eq!(HelioError::usage("x").exit_code(), 2);
        assert_eq!(HelioError::from(MetricsError::EmptyInput).exit_code(), 3);
        assert_eq!(HelioError::from(MetricsError::NotPsd(-1.0)).exit_code(), 4);
        assert_eq!(HelioError::from(LatentError::KTooLarge { k: 9, limit: 2 }).exit_code(), 2);
    }

    #[test]
    fn error_record_is_json() {
        let rec: serde_json::Value = serde_json::from_str(&HelioError::data("EmptyInput", "no files").to_record()).unwrap();
        assert_eq!(rec["code"], "EmptyInput");
        assert_eq!(rec["exit_code"], 3);
    }
}
