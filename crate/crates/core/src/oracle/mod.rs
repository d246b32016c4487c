//! The LLM behind a single completion interface.
//!
//! Implementations: [`HttpOracle`] for a live chat-completion endpoint,
//! [`ReplayOracle`] / [`RecordingOracle`] for JSON Lines fixtures, and
//! [`StochasticOracle`] for seeded strategy simulation. All of them are
//! callable from many workers at once.

mod http;
mod replay;
mod stochastic;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompting::{count_tokens, Conversation};

pub use http::{HttpConfig, HttpOracle, ENV_API_BASE, ENV_API_KEY};
pub use replay::{FixtureEntry, FixtureMessage, FixtureStore, RecordingOracle, ReplayOracle};
pub use stochastic::{format_answer, marginal_edit, StochasticOracle, StochasticOracleConfig, StochasticProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UsageSource {
    ProviderUsage,
    Estimated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleReply {
    pub answer: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub source: UsageSource,
}

impl OracleReply {
    /// Reply whose usage is estimated from the transcript and the answer.
    pub fn estimated(conv: &Conversation, answer: impl Into<String>) -> Self {
        let answer = answer.into();
        OracleReply {
            prompt_tokens: conv.total_tokens(),
            completion_tokens: count_tokens(&answer),
            answer,
            source: UsageSource::Estimated,
        }
    }

    pub fn total_tokens(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

/// Identifies one oracle call inside a benchmark matrix. Stochastic oracles
/// derive their random substream from it, so results do not depend on
/// scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DrawKey<'a> {
    pub seed: u64,
    pub task_id: &'a str,
    pub run_index: u32,
    /// Conversation within the run (sampling attempt or mixed round).
    pub round: u32,
    /// Answer index within the conversation.
    pub step: u32,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("transport failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("conversation has {tokens} tokens, over the {window}-token window")]
    ContextOverflow { tokens: u64, window: u64 },
    #[error("no fixture recorded for conversation {hash}")]
    FixtureMiss { hash: String },
    #[error("fixture storage: {0}")]
    Storage(String),
    #[error("malformed provider response: {0}")]
    Protocol(String),
    #[error("conversation does not end with a user message")]
    NotAwaitingAnswer,
    #[error("oracle configuration: {0}")]
    Config(String),
}

/// Produces one assistant answer for a conversation ending in a user turn.
/// The caller appends the answer; oracles never mutate the transcript.
pub trait Oracle: Send + Sync {
    fn complete(&self, conv: &Conversation, key: &DrawKey<'_>) -> Result<OracleReply, OracleError>;
}

impl<O: Oracle + ?Sized> Oracle for Box<O> {
    fn complete(&self, conv: &Conversation, key: &DrawKey<'_>) -> Result<OracleReply, OracleError> {
        (**self).complete(conv, key)
    }
}

impl<O: Oracle + ?Sized> Oracle for std::sync::Arc<O> {
    fn complete(&self, conv: &Conversation, key: &DrawKey<'_>) -> Result<OracleReply, OracleError> {
        (**self).complete(conv, key)
    }
}

/// Oracle backed by a closure; usage is estimated. Handy for scripted runs.
pub struct FnOracle<F>(pub F);

impl<F> Oracle for FnOracle<F>
where
    F: Fn(&Conversation, &DrawKey<'_>) -> Result<String, OracleError> + Send + Sync,
{
    fn complete(&self, conv: &Conversation, key: &DrawKey<'_>) -> Result<OracleReply, OracleError> {
        if !conv.ends_with_user() {
            return Err(OracleError::NotAwaitingAnswer);
        }
        (self.0)(conv, key).map(|answer| OracleReply::estimated(conv, answer))
    }
}
