use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DrawKey, Oracle, OracleError, OracleReply};
use crate::prompting::Conversation;
use crate::source_model::extract_annotation;

/// Simulated answer behaviour for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticProfile {
    /// Chance that a fresh draw is the correct annotation.
    pub success_probability: f64,
    pub correct_answer: String,
    pub wrong_answer_pool: Vec<String>,
    /// Chance that, after a wrong answer, the next answer in the same
    /// conversation is a marginal edit of it.
    #[serde(default)]
    pub stuck_bias: f64,
}

impl StochasticProfile {
    fn validate(&self, name: &str) -> Result<(), OracleError> {
        let bad = |what: &str| Err(OracleError::Config(format!("profile {name}: {what}")));
        if !(0.0..=1.0).contains(&self.success_probability) {
            return bad("success_probability outside [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.stuck_bias) {
            return bad("stuck_bias outside [0, 1]");
        }
        if self.correct_answer.trim().is_empty() {
            return bad("empty correct_answer");
        }
        if self.wrong_answer_pool.is_empty() {
            return bad("empty wrong_answer_pool");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticOracleConfig {
    #[serde(default)]
    pub seed: u64,
    /// Used for tasks without their own entry.
    #[serde(default)]
    pub default: Option<StochasticProfile>,
    #[serde(default)]
    pub tasks: BTreeMap<String, StochasticProfile>,
}

/// Seeded simulation of an LLM that is right with a per-task probability and
/// tends to get stuck on its own wrong answers.
///
/// Every call draws from a substream derived from the oracle seed and the
/// call's [`DrawKey`], so results are independent of execution order.
#[derive(Debug, Clone)]
pub struct StochasticOracle {
    config: StochasticOracleConfig,
}

impl StochasticOracle {
    pub fn new(config: StochasticOracleConfig) -> Result<Self, OracleError> {
        if let Some(p) = &config.default {
            p.validate("default")?;
        }
        for (id, p) in &config.tasks {
            p.validate(id)?;
        }
        Ok(StochasticOracle { config })
    }

    /// One profile for every task.
    pub fn uniform(profile: StochasticProfile, seed: u64) -> Result<Self, OracleError> {
        Self::new(StochasticOracleConfig {
            seed,
            default: Some(profile),
            tasks: BTreeMap::new(),
        })
    }

    pub fn profile(&self, task_id: &str) -> Option<&StochasticProfile> {
        self.config.tasks.get(task_id).or(self.config.default.as_ref())
    }

    fn rng(&self, key: &DrawKey<'_>) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(b"specloop/stochastic");
        h.update(self.config.seed.to_le_bytes());
        h.update(key.seed.to_le_bytes());
        h.update((key.task_id.len() as u64).to_le_bytes());
        h.update(key.task_id.as_bytes());
        h.update(key.run_index.to_le_bytes());
        h.update(key.round.to_le_bytes());
        h.update(key.step.to_le_bytes());
        ChaCha8Rng::from_seed(h.finalize().into())
    }

    /// The annotation chosen for this call.
    pub fn draw(&self, conv: &Conversation, key: &DrawKey<'_>) -> Result<String, OracleError> {
        let profile = self
            .profile(key.task_id)
            .ok_or_else(|| OracleError::Config(format!("no profile for task {}", key.task_id)))?;
        let mut rng = self.rng(key);
        let previous = conv
            .last_assistant()
            .and_then(|m| extract_annotation(&m.content, conv.kind()).ok())
            .map(|c| c.jml_text().to_owned())
            .filter(|jml| jml.trim() != profile.correct_answer.trim());
        if let Some(previous) = previous {
            if rng.random::<f64>() < profile.stuck_bias {
                return Ok(marginal_edit(&previous, key.step));
            }
        }
        if rng.random::<f64>() < profile.success_probability {
            Ok(profile.correct_answer.clone())
        } else {
            let pool = &profile.wrong_answer_pool;
            Ok(pool[rng.random_range(0..pool.len())].clone())
        }
    }
}

impl Oracle for StochasticOracle {
    fn complete(&self, conv: &Conversation, key: &DrawKey<'_>) -> Result<OracleReply, OracleError> {
        if !conv.ends_with_user() {
            return Err(OracleError::NotAwaitingAnswer);
        }
        let jml = self.draw(conv, key)?;
        Ok(OracleReply::estimated(conv, format_answer(&jml)))
    }
}

/// Wrap an annotation in the answer format the system prompt asks for.
pub fn format_answer(jml: &str) -> String {
    format!("The annotation below describes the behaviour of the code.\n```\n{jml}\n```")
}

/// A cosmetic revision of `jml` that keeps its meaning: one comment line
/// naming the step is added before the closing delimiter.
pub fn marginal_edit(jml: &str, step: u32) -> String {
    let note = format!("@ // revision {step}");
    match jml.rfind("*/") {
        Some(at) => {
            let (head, tail) = jml.split_at(at);
            let head = head.trim_end().trim_end_matches('@').trim_end();
            format!("{head}\n  {note}\n  @{tail}")
        }
        None => format!("{jml}\n//{note}"),
    }
}
