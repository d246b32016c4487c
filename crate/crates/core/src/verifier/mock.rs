use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Verdict, Verifier, VerifierError, VerifyRequest};
use crate::source_model::{validate_shape, AnnotationCandidate, ShapeWarning};

/// Label reported when no rule matches a candidate.
pub const UNMATCHED_LABEL: &str = "Post (unmatched)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    Always,
    UnbalancedParens,
    MissingNormalBehavior,
    MissingLoopInvariant,
}

impl Predicate {
    fn holds(self, candidate: &AnnotationCandidate) -> bool {
        match self {
            Predicate::Always => true,
            Predicate::UnbalancedParens => !parens_balanced(candidate.jml_text()),
            Predicate::MissingNormalBehavior => {
                validate_shape(candidate).contains(&ShapeWarning::MissingNormalBehavior)
            }
            Predicate::MissingLoopInvariant => validate_shape(candidate).contains(&ShapeWarning::MissingLoopInvariant),
        }
    }
}

fn parens_balanced(text: &str) -> bool {
    let mut depth = 0i64;
    for c in text.chars() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth < 0 {
                    return false;
                }
            }
            _ => {}
        }
    }
    depth == 0
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleMatch {
    /// Candidate text equals this, ignoring surrounding whitespace.
    Exact(String),
    Contains(String),
    Predicate(Predicate),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockRule {
    #[serde(rename = "match")]
    pub matcher: RuleMatch,
    pub verdict: Verdict,
}

impl MockRule {
    pub fn new(matcher: RuleMatch, verdict: Verdict) -> Self {
        MockRule { matcher, verdict }
    }

    fn matches(&self, candidate: &AnnotationCandidate) -> bool {
        let text = candidate.jml_text();
        match &self.matcher {
            RuleMatch::Exact(expected) => text.trim() == expected.trim(),
            RuleMatch::Contains(needle) => text.contains(needle.as_str()),
            RuleMatch::Predicate(p) => p.holds(candidate),
        }
    }
}

/// Verdict of the first matching rule, else an open `Post (unmatched)` goal.
pub fn mock_verify(rules: &[MockRule], _draft: &str, candidate: &AnnotationCandidate) -> Verdict {
    rules
        .iter()
        .find(|r| r.matches(candidate))
        .map(|r| r.verdict.clone())
        .unwrap_or_else(|| {
            Verdict::semantic(
                vec![UNMATCHED_LABEL.to_owned()],
                None,
                format!("OPEN: {UNMATCHED_LABEL}"),
            )
            .expect("one label")
        })
}

#[derive(Debug, Clone)]
pub struct MockVerifier {
    rules: Vec<MockRule>,
}

impl MockVerifier {
    pub fn new(rules: Vec<MockRule>) -> Result<Self, VerifierError> {
        if rules.is_empty() {
            return Err(VerifierError::Rules("rule list is empty".into()));
        }
        Ok(MockVerifier { rules })
    }

    /// Rules file: a JSON array of `{"match": {...}, "verdict": {...}}`.
    pub fn from_json_file(path: &Path) -> Result<Self, VerifierError> {
        let text = std::fs::read_to_string(path).map_err(|source| VerifierError::Io {
            path: path.to_owned(),
            source,
        })?;
        let rules: Vec<MockRule> =
            serde_json::from_str(&text).map_err(|e| VerifierError::Rules(format!("{}: {e}", path.display())))?;
        Self::new(rules)
    }

    pub fn rules(&self) -> &[MockRule] {
        &self.rules
    }
}

impl Verifier for MockVerifier {
    fn verify(&self, request: &VerifyRequest<'_>) -> Verdict {
        mock_verify(&self.rules, request.draft, request.candidate)
    }
}
