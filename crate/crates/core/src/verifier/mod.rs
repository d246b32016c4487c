//! Verdict interface over an auto-active verifier.
//!
//! Two backends: [`SubprocessVerifier`] drives an external prover through a
//! command template and a regex pattern table; [`MockVerifier`] answers from
//! a rule list and is used for hermetic runs.

mod mock;
mod subprocess;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::source_model::AnnotationCandidate;

pub use mock::{mock_verify, MockRule, MockVerifier, Predicate, RuleMatch, UNMATCHED_LABEL};
pub use subprocess::{classify_output, PatternTable, SubprocessVerifier, DEFAULT_TIMEOUT};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VerdictKind {
    Success,
    SyntaxError {
        parser_message: String,
    },
    SemanticError {
        branch_labels: Vec<String>,
        /// Method whose proof obligation stayed open, when the backend says.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        method: Option<String>,
    },
    ToolFailure {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    #[serde(flatten)]
    pub kind: VerdictKind,
    #[serde(default)]
    pub raw_output: String,
    #[serde(default)]
    pub wall_time_ms: u64,
}

impl Verdict {
    fn with(kind: VerdictKind, raw_output: impl Into<String>) -> Self {
        Verdict {
            kind,
            raw_output: raw_output.into(),
            wall_time_ms: 0,
        }
    }

    pub fn success(raw_output: impl Into<String>) -> Self {
        Self::with(VerdictKind::Success, raw_output)
    }

    pub fn syntax(parser_message: impl Into<String>, raw_output: impl Into<String>) -> Self {
        Self::with(
            VerdictKind::SyntaxError {
                parser_message: parser_message.into(),
            },
            raw_output,
        )
    }

    /// `None` when `branch_labels` is empty: a semantic error always names
    /// at least one open branch.
    pub fn semantic(branch_labels: Vec<String>, method: Option<String>, raw_output: impl Into<String>) -> Option<Self> {
        if branch_labels.is_empty() {
            return None;
        }
        Some(Self::with(
            VerdictKind::SemanticError { branch_labels, method },
            raw_output,
        ))
    }

    pub fn tool_failure(reason: impl Into<String>, raw_output: impl Into<String>) -> Self {
        Self::with(VerdictKind::ToolFailure { reason: reason.into() }, raw_output)
    }

    pub fn is_success(&self) -> bool {
        matches!(self.kind, VerdictKind::Success)
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            VerdictKind::Success => "success",
            VerdictKind::SyntaxError { .. } => "syntax_error",
            VerdictKind::SemanticError { .. } => "semantic_error",
            VerdictKind::ToolFailure { .. } => "tool_failure",
        }
    }
}

/// A spliced draft handed to a backend.
#[derive(Debug, Clone, Copy)]
pub struct VerifyRequest<'a> {
    pub draft: &'a str,
    /// Method whose contract must be proved.
    pub target: &'a str,
    pub candidate: &'a AnnotationCandidate,
}

/// Every failure mode of a backend is a verdict, never an error.
pub trait Verifier: Send + Sync {
    fn verify(&self, request: &VerifyRequest<'_>) -> Verdict;
}

impl<V: Verifier + ?Sized> Verifier for Box<V> {
    fn verify(&self, request: &VerifyRequest<'_>) -> Verdict {
        (**self).verify(request)
    }
}

impl<V: Verifier + ?Sized> Verifier for std::sync::Arc<V> {
    fn verify(&self, request: &VerifyRequest<'_>) -> Verdict {
        (**self).verify(request)
    }
}

#[derive(Debug, Error)]
pub enum VerifierError {
    #[error("reading {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("invalid command template '{0}'")]
    InvalidTemplate(String),
    #[error("invalid pattern table: {0}")]
    PatternTable(String),
    #[error("invalid mock rules: {0}")]
    Rules(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_json_shape() {
        let v = Verdict::semantic(vec!["Use Case".into()], None, "OPEN: Use Case").unwrap();
        let json = serde_json::to_value(&v).unwrap();
        assert_eq!(json["kind"], "semantic_error");
        assert_eq!(json["branch_labels"][0], "Use Case");
        assert!(json.get("method").is_none());
        assert!(json.get("parser_message").is_none());
        let back: Verdict = serde_json::from_value(json).unwrap();
        assert_eq!(back, v);

        let s: Verdict = serde_json::from_str(r#"{"kind":"success"}"#).unwrap();
        assert!(s.is_success());
        assert!(Verdict::semantic(vec![], None, "").is_none());
    }
}
