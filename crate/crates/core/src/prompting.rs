//! Prompt templates and conversation transcripts with token accounting.
//!
//! The bundled templates under `prompts/<kind>/` are normative. Each file is
//! pinned by a SHA-256 digest so that any drift in the prompt text shows up
//! in tests and in the run-log header.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::source_model::{AnnotatedDocument, GapKind, GapSite};
use crate::verifier::{Verdict, VerdictKind};

pub const PLACEHOLDER_FILE: &str = "<partially annotated file>";
pub const PLACEHOLDER_METHOD: &str = "<method name>";
pub const PLACEHOLDER_CALLED: &str = "<called method>";
pub const PLACEHOLDER_CALLING: &str = "<calling method>";
pub const PLACEHOLDER_PARSER_ERROR: &str = "<parser error>";
pub const PLACEHOLDER_LABELS: &str = "<proof branch labels>";
pub const PLACEHOLDER_VIOLATED: &str = "<violated contract method>";

pub const TEMPLATE_NAMES: [&str; 4] = ["system", "initial", "feedback_syntax", "feedback_semantic"];

/// SHA-256 of every bundled template file, keyed `<kind>/<name>`.
pub const BUNDLED_HASHES: [(&str, &str); 8] = [
    (
        "contract/feedback_semantic",
        "f7c53c79991807f86f60d326c1e2855e40522e55d9a22f4bd7cf0fac7ac1269a",
    ),
    (
        "contract/feedback_syntax",
        "5e8f04c21672e3d40ead38a3e25d00a73f3eec94634514605d395d28240474ed",
    ),
    (
        "contract/initial",
        "a1f9cd784a314dd1b05efe2c049083f7923c9ecc763b83e93eeeb01995ebf60d",
    ),
    (
        "contract/system",
        "d2ea49efeaed1b98c878f2b838c7a37d0d4341adaad2919427b6bbdc95c2156a",
    ),
    (
        "invariant/feedback_semantic",
        "2a04fe15f1021cb9d967a9407843573d37e937967da2828829817fbebde13f7a",
    ),
    (
        "invariant/feedback_syntax",
        "c3e7f1fab062769033351ea883a63e38872c9756c27b2dfc390d8bbd5327a7ba",
    ),
    (
        "invariant/initial",
        "6c75fd1fe26d6220cc033cef0cd3233c24b01c08f088a9da81b5332d729b5662",
    ),
    (
        "invariant/system",
        "d2ea49efeaed1b98c878f2b838c7a37d0d4341adaad2919427b6bbdc95c2156a",
    ),
];

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("reading template {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("template {0} is missing placeholder {1}")]
    MalformedTemplate(String, &'static str),
    #[error("prompt for a {requested} gap requested but the document has a {actual} gap")]
    KindMismatch { requested: GapKind, actual: GapKind },
    #[error("no value available for placeholder {0}")]
    MissingPlaceholderData(&'static str),
    #[error("no feedback exists for a {0} verdict")]
    UnsupportedVerdict(&'static str),
}

/// Templates for one gap kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBundle {
    pub system: String,
    pub initial: String,
    pub feedback_syntax: String,
    pub feedback_semantic: String,
}

impl PromptBundle {
    fn get(&self, name: &str) -> &str {
        match name {
            "system" => &self.system,
            "initial" => &self.initial,
            "feedback_syntax" => &self.feedback_syntax,
            "feedback_semantic" => &self.feedback_semantic,
            _ => unreachable!("unknown template {name}"),
        }
    }

    fn check(&self, kind: GapKind) -> Result<(), PromptError> {
        let mut required = vec![
            ("initial", PLACEHOLDER_FILE),
            ("feedback_syntax", PLACEHOLDER_PARSER_ERROR),
            ("feedback_semantic", PLACEHOLDER_LABELS),
        ];
        match kind {
            GapKind::Invariant => required.push(("initial", PLACEHOLDER_METHOD)),
            GapKind::Contract => {
                required.push(("initial", PLACEHOLDER_CALLED));
                required.push(("initial", PLACEHOLDER_CALLING));
                required.push(("feedback_semantic", PLACEHOLDER_VIOLATED));
            }
        }
        for (name, placeholder) in required {
            if !self.get(name).contains(placeholder) {
                return Err(PromptError::MalformedTemplate(format!("{kind}/{name}"), placeholder));
            }
        }
        Ok(())
    }
}

/// Templates for both gap kinds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    invariant: PromptBundle,
    contract: PromptBundle,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self::bundled()
    }
}

impl PromptSet {
    pub fn bundled() -> Self {
        PromptSet {
            invariant: PromptBundle {
                system: include_str!("../prompts/invariant/system.txt").to_owned(),
                initial: include_str!("../prompts/invariant/initial.txt").to_owned(),
                feedback_syntax: include_str!("../prompts/invariant/feedback_syntax.txt").to_owned(),
                feedback_semantic: include_str!("../prompts/invariant/feedback_semantic.txt").to_owned(),
            },
            contract: PromptBundle {
                system: include_str!("../prompts/contract/system.txt").to_owned(),
                initial: include_str!("../prompts/contract/initial.txt").to_owned(),
                feedback_syntax: include_str!("../prompts/contract/feedback_syntax.txt").to_owned(),
                feedback_semantic: include_str!("../prompts/contract/feedback_semantic.txt").to_owned(),
            },
        }
    }

    /// Load `<dir>/<kind>/<name>.txt` for both kinds. Files are taken
    /// byte-for-byte; drift against the bundled set is reported by
    /// [`PromptSet::drift`], not rejected.
    pub fn load_dir(dir: &Path) -> Result<Self, PromptError> {
        let load = |kind: GapKind| -> Result<PromptBundle, PromptError> {
            let read = |name: &str| {
                let path = dir.join(kind.as_str()).join(format!("{name}.txt"));
                std::fs::read_to_string(&path).map_err(|source| PromptError::Io { path, source })
            };
            let bundle = PromptBundle {
                system: read("system")?,
                initial: read("initial")?,
                feedback_syntax: read("feedback_syntax")?,
                feedback_semantic: read("feedback_semantic")?,
            };
            bundle.check(kind)?;
            Ok(bundle)
        };
        Ok(PromptSet {
            invariant: load(GapKind::Invariant)?,
            contract: load(GapKind::Contract)?,
        })
    }

    pub fn bundle(&self, kind: GapKind) -> &PromptBundle {
        match kind {
            GapKind::Invariant => &self.invariant,
            GapKind::Contract => &self.contract,
        }
    }

    /// SHA-256 hex digest of every template, keyed `<kind>/<name>`.
    pub fn hashes(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        for kind in GapKind::ALL {
            for name in TEMPLATE_NAMES {
                out.insert(
                    format!("{kind}/{name}"),
                    sha256_hex(self.bundle(kind).get(name).as_bytes()),
                );
            }
        }
        out
    }

    /// Templates whose digest differs from the bundled one.
    pub fn drift(&self) -> Vec<String> {
        let hashes = self.hashes();
        BUNDLED_HASHES
            .iter()
            .filter(|(key, digest)| hashes.get(*key).map(String::as_str) != Some(*digest))
            .map(|(key, _)| key.to_string())
            .collect()
    }

    pub fn render_system(&self, kind: GapKind) -> &str {
        &self.bundle(kind).system
    }

    pub fn render_initial(&self, kind: GapKind, doc: &AnnotatedDocument) -> Result<String, PromptError> {
        if doc.kind() != kind {
            return Err(PromptError::KindMismatch {
                requested: kind,
                actual: doc.kind(),
            });
        }
        let template = &self.bundle(kind).initial;
        match doc.gap() {
            GapSite::Invariant { enclosing_method, .. } => {
                let method = enclosing_method
                    .as_deref()
                    .ok_or(PromptError::MissingPlaceholderData(PLACEHOLDER_METHOD))?;
                Ok(fill(
                    template,
                    &[(PLACEHOLDER_FILE, doc.text()), (PLACEHOLDER_METHOD, method)],
                ))
            }
            GapSite::Contract {
                callee, calling_method, ..
            } => {
                let calling = calling_method
                    .as_deref()
                    .ok_or(PromptError::MissingPlaceholderData(PLACEHOLDER_CALLING))?;
                Ok(fill(
                    template,
                    &[
                        (PLACEHOLDER_FILE, doc.text()),
                        (PLACEHOLDER_CALLED, callee),
                        (PLACEHOLDER_CALLING, calling),
                    ],
                ))
            }
        }
    }

    /// Feedback for a failed candidate.
    ///
    /// `violated_method` fills `<violated contract method>` when the verdict
    /// itself does not name the method with open goals.
    pub fn render_feedback(
        &self,
        kind: GapKind,
        verdict: &Verdict,
        violated_method: Option<&str>,
    ) -> Result<String, PromptError> {
        let bundle = self.bundle(kind);
        match &verdict.kind {
            VerdictKind::SyntaxError { parser_message } => Ok(fill(
                &bundle.feedback_syntax,
                &[(PLACEHOLDER_PARSER_ERROR, parser_message)],
            )),
            VerdictKind::SemanticError { branch_labels, method } => {
                let labels = dedup_labels(branch_labels).join("\n");
                match kind {
                    GapKind::Invariant => Ok(fill(&bundle.feedback_semantic, &[(PLACEHOLDER_LABELS, &labels)])),
                    GapKind::Contract => {
                        let method = method
                            .as_deref()
                            .or(violated_method)
                            .ok_or(PromptError::MissingPlaceholderData(PLACEHOLDER_VIOLATED))?;
                        Ok(fill(
                            &bundle.feedback_semantic,
                            &[(PLACEHOLDER_LABELS, &labels), (PLACEHOLDER_VIOLATED, method)],
                        ))
                    }
                }
            }
            VerdictKind::Success => Err(PromptError::UnsupportedVerdict("success")),
            VerdictKind::ToolFailure { .. } => Err(PromptError::UnsupportedVerdict("tool failure")),
        }
    }
}

/// Labels in first-occurrence order with repeats removed.
pub fn dedup_labels(labels: &[String]) -> Vec<&str> {
    let mut seen = std::collections::HashSet::new();
    labels.iter().map(String::as_str).filter(|l| seen.insert(*l)).collect()
}

/// Single left-to-right substitution pass; substituted values are never
/// rescanned, so source text containing `<...>` passes through untouched.
fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    loop {
        let next = values
            .iter()
            .filter_map(|(p, v)| rest.find(p).map(|at| (at, *p, *v)))
            .min_by_key(|(at, _, _)| *at);
        match next {
            Some((at, placeholder, value)) => {
                out.push_str(&rest[..at]);
                out.push_str(value);
                rest = &rest[at + placeholder.len()..];
            }
            None => {
                out.push_str(rest);
                return out;
            }
        }
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Fallback token estimate: one token per four bytes, rounded up.
pub fn count_tokens(text: &str) -> u64 {
    (text.len() as u64).div_ceil(4)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
    pub tokens: u64,
}

impl Message {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        let content = content.into();
        let tokens = count_tokens(&content);
        Message { role, content, tokens }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("cannot append a {got} message: expected {expected}")]
pub struct ConversationError {
    pub expected: Role,
    pub got: Role,
}

/// System message, initial user prompt, then strictly alternating
/// assistant/user turns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conversation {
    messages: Vec<Message>,
    task_kind: GapKind,
}

impl Conversation {
    pub fn new(kind: GapKind, system: impl Into<String>, initial: impl Into<String>) -> Self {
        Conversation {
            messages: vec![Message::new(Role::System, system), Message::new(Role::User, initial)],
            task_kind: kind,
        }
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn kind(&self) -> GapKind {
        self.task_kind
    }

    fn expect_next(&self, got: Role) -> Result<(), ConversationError> {
        let expected = match self.messages.last().map(|m| m.role) {
            Some(Role::User) => Role::Assistant,
            _ => Role::User,
        };
        if expected == got {
            Ok(())
        } else {
            Err(ConversationError { expected, got })
        }
    }

    /// Append an answer. `tokens` overrides the estimate when the provider
    /// reported the completion size.
    pub fn push_assistant(&mut self, content: impl Into<String>, tokens: Option<u64>) -> Result<(), ConversationError> {
        self.expect_next(Role::Assistant)?;
        let mut message = Message::new(Role::Assistant, content);
        if let Some(tokens) = tokens {
            message.tokens = tokens;
        }
        self.messages.push(message);
        Ok(())
    }

    pub fn push_user(&mut self, content: impl Into<String>) -> Result<(), ConversationError> {
        self.expect_next(Role::User)?;
        self.messages.push(Message::new(Role::User, content));
        Ok(())
    }

    pub fn ends_with_user(&self) -> bool {
        self.messages.last().is_some_and(|m| m.role == Role::User)
    }

    pub fn last_user(&self) -> Option<&Message> {
        self.messages.iter().rev().find(|m| m.role == Role::User)
    }

    pub fn last_assistant(&self) -> Option<&Message> {
        self.messages.iter().rev().find(|m| m.role == Role::Assistant)
    }

    pub fn assistant_turns(&self) -> usize {
        self.messages.iter().filter(|m| m.role == Role::Assistant).count()
    }

    /// Tokens of the whole transcript, i.e. what the next call reads.
    pub fn total_tokens(&self) -> u64 {
        self.messages.iter().map(|m| m.tokens).sum()
    }

    /// Content hash over roles and texts; token counts are not part of it.
    pub fn content_hash(&self) -> String {
        hash_messages(self.messages.iter().map(|m| (m.role, m.content.as_str())))
    }
}

pub fn hash_messages<'a>(messages: impl IntoIterator<Item = (Role, &'a str)>) -> String {
    let mut hasher = Sha256::new();
    for (role, content) in messages {
        hasher.update(role.as_str().as_bytes());
        hasher.update([0u8]);
        hasher.update((content.len() as u64).to_le_bytes());
        hasher.update(content.as_bytes());
    }
    hex::encode(hasher.finalize())
}
