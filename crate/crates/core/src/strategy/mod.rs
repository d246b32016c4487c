//! Error-recovery strategies over an oracle/verifier pair.
//!
//! All three strategies are sequences of feedback rounds: sampling is `N`
//! rounds of one step, feedback is one round of `K` steps, mixed is `S`
//! rounds of `F` steps executed round-major. Each round is a fresh
//! conversation; inside a round every failed candidate's verifier message is
//! appended as the next user turn.

mod cost;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::{DrawKey, Oracle};
use crate::prompting::{Conversation, PromptError, PromptSet};
use crate::source_model::{
    extract_annotation, splice, validate_shape, AnnotatedDocument, AnnotationCandidate, Draft, NO_BLOCK_MESSAGE,
};
use crate::verifier::{Verdict, VerdictKind, Verifier, VerifyRequest};

pub use cost::{predicted_cost_feedback, predicted_cost_sampling, TokenCostModel};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StrategyError {
    #[error("invalid strategy '{0}': expected feedback:K, sampling:N or mixed:SxF with K, N, S, F >= 1")]
    InvalidSpec(String),
    #[error("prompt rendering: {0}")]
    Prompt(String),
    #[error("outcome has no initial input tokens")]
    ZeroInitialTokens,
}

impl From<PromptError> for StrategyError {
    fn from(e: PromptError) -> Self {
        StrategyError::Prompt(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum StrategySpec {
    Feedback { max_steps: u32 },
    Sampling { max_samples: u32 },
    Mixed { rounds: u32, steps_per_round: u32 },
}

impl StrategySpec {
    /// (rounds, steps per round)
    pub fn shape(self) -> (u32, u32) {
        match self {
            StrategySpec::Feedback { max_steps } => (1, max_steps),
            StrategySpec::Sampling { max_samples } => (max_samples, 1),
            StrategySpec::Mixed {
                rounds,
                steps_per_round,
            } => (rounds, steps_per_round),
        }
    }

    pub fn candidate_budget(self) -> u32 {
        let (rounds, steps) = self.shape();
        rounds * steps
    }

    pub fn family(self) -> &'static str {
        match self {
            StrategySpec::Feedback { .. } => "feedback",
            StrategySpec::Sampling { .. } => "sampling",
            StrategySpec::Mixed { .. } => "mixed",
        }
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategySpec::Feedback { max_steps } => write!(f, "feedback:{max_steps}"),
            StrategySpec::Sampling { max_samples } => write!(f, "sampling:{max_samples}"),
            StrategySpec::Mixed {
                rounds,
                steps_per_round,
            } => write!(f, "mixed:{rounds}x{steps_per_round}"),
        }
    }
}

impl FromStr for StrategySpec {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let invalid = || StrategyError::InvalidSpec(s.to_owned());
        let positive = |v: &str| v.trim().parse::<u32>().ok().filter(|n| *n >= 1).ok_or_else(invalid);
        let (family, arg) = s.trim().split_once(':').ok_or_else(invalid)?;
        match family {
            "feedback" => Ok(StrategySpec::Feedback {
                max_steps: positive(arg)?,
            }),
            "sampling" => Ok(StrategySpec::Sampling {
                max_samples: positive(arg)?,
            }),
            "mixed" => {
                let (rounds, steps) = arg.split_once(['x', 'X']).ok_or_else(invalid)?;
                Ok(StrategySpec::Mixed {
                    rounds: positive(rounds)?,
                    steps_per_round: positive(steps)?,
                })
            }
            _ => Err(invalid()),
        }
    }
}

impl TryFrom<String> for StrategySpec {
    type Error = StrategyError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<StrategySpec> for String {
    fn from(s: StrategySpec) -> String {
        s.to_string()
    }
}

/// One candidate: oracle call, extraction, splice, verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptTrace {
    /// 1-based, global across rounds.
    pub candidate_index: u32,
    pub round_index: u32,
    pub step_in_round: u32,
    pub annotation: Option<AnnotationCandidate>,
    /// Why no annotation could be taken from the answer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extraction_error: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shape_warnings: Vec<String>,
    pub verdict: Verdict,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub cumulative_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub solved: bool,
    pub solving_candidate_index: Option<u32>,
    pub traces: Vec<AttemptTrace>,
    /// Prompt tokens of the run's first oracle call.
    pub initial_input_tokens: u64,
    pub total_tokens: u64,
    /// `total_tokens / initial_input_tokens`; at the solution for solved
    /// runs, at budget exhaustion otherwise.
    pub token_ratio: Option<f64>,
    /// Reason a run stopped before using its budget.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause: Option<String>,
}

impl Outcome {
    pub fn unsolved_with_cause(cause: impl Into<String>) -> Self {
        Outcome {
            solved: false,
            solving_candidate_index: None,
            traces: Vec::new(),
            initial_input_tokens: 0,
            total_tokens: 0,
            token_ratio: None,
            cause: Some(cause.into()),
        }
    }
}

/// Tokens spent up to the solution (or budget exhaustion) over the tokens of
/// the initial query.
pub fn measured_token_ratio(outcome: &Outcome) -> Result<f64, StrategyError> {
    if outcome.initial_input_tokens == 0 {
        return Err(StrategyError::ZeroInitialTokens);
    }
    Ok(outcome.total_tokens as f64 / outcome.initial_input_tokens as f64)
}

/// Outcome plus the transcripts and verified file of one run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub outcome: Outcome,
    pub conversations: Vec<Conversation>,
    pub solution: Option<Draft>,
}

/// The task as the engine sees it.
#[derive(Debug, Clone, Copy)]
pub struct Task<'a> {
    pub id: &'a str,
    pub doc: &'a AnnotatedDocument,
    /// Method whose contract the verifier must prove.
    pub target: &'a str,
}

/// Where a run sits in a benchmark matrix; feeds the oracle's substreams.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunContext {
    pub seed: u64,
    pub run_index: u32,
}

pub struct Engine<'a> {
    oracle: &'a dyn Oracle,
    verifier: &'a dyn Verifier,
    prompts: &'a PromptSet,
}

struct Progress {
    traces: Vec<AttemptTrace>,
    conversations: Vec<Conversation>,
    cumulative: u64,
    initial_input_tokens: Option<u64>,
    solution: Option<Draft>,
    cause: Option<String>,
}

impl<'a> Engine<'a> {
    pub fn new(oracle: &'a dyn Oracle, verifier: &'a dyn Verifier, prompts: &'a PromptSet) -> Self {
        Engine {
            oracle,
            verifier,
            prompts,
        }
    }

    pub fn run_feedback(&self, task: &Task<'_>, max_steps: u32, ctx: RunContext) -> Result<RunResult, StrategyError> {
        self.run(task, StrategySpec::Feedback { max_steps }, ctx)
    }

    pub fn run_sampling(&self, task: &Task<'_>, max_samples: u32, ctx: RunContext) -> Result<RunResult, StrategyError> {
        self.run(task, StrategySpec::Sampling { max_samples }, ctx)
    }

    pub fn run_mixed(
        &self,
        task: &Task<'_>,
        rounds: u32,
        steps_per_round: u32,
        ctx: RunContext,
    ) -> Result<RunResult, StrategyError> {
        self.run(
            task,
            StrategySpec::Mixed {
                rounds,
                steps_per_round,
            },
            ctx,
        )
    }

    /// Run `spec` on `task` until the first success or the budget is spent.
    ///
    /// Oracle failures end the run early; the outcome is then unsolved and
    /// carries the cause.
    pub fn run(&self, task: &Task<'_>, spec: StrategySpec, ctx: RunContext) -> Result<RunResult, StrategyError> {
        let (rounds, steps) = spec.shape();
        if rounds == 0 || steps == 0 {
            return Err(StrategyError::InvalidSpec(spec.to_string()));
        }
        let kind = task.doc.kind();
        let system = self.prompts.render_system(kind);
        let initial = self.prompts.render_initial(kind, task.doc)?;

        let mut progress = Progress {
            traces: Vec::new(),
            conversations: Vec::new(),
            cumulative: 0,
            initial_input_tokens: None,
            solution: None,
            cause: None,
        };
        for round in 0..rounds {
            let conv = Conversation::new(kind, system, initial.clone());
            let done = self.run_round(task, ctx, round, steps, conv, &mut progress);
            if done {
                break;
            }
        }

        let solving = progress
            .traces
            .iter()
            .find(|t| t.verdict.is_success())
            .map(|t| t.candidate_index);
        let initial_input_tokens = progress.initial_input_tokens.unwrap_or(0);
        let token_ratio = (initial_input_tokens > 0).then(|| progress.cumulative as f64 / initial_input_tokens as f64);
        Ok(RunResult {
            outcome: Outcome {
                solved: solving.is_some(),
                solving_candidate_index: solving,
                traces: progress.traces,
                initial_input_tokens,
                total_tokens: progress.cumulative,
                token_ratio,
                cause: progress.cause,
            },
            conversations: progress.conversations,
            solution: progress.solution,
        })
    }

    /// Returns true when the run must stop (success or abort).
    fn run_round(
        &self,
        task: &Task<'_>,
        ctx: RunContext,
        round: u32,
        steps: u32,
        mut conv: Conversation,
        progress: &mut Progress,
    ) -> bool {
        let kind = task.doc.kind();
        let mut stop = false;
        for step in 0..steps {
            let key = DrawKey {
                seed: ctx.seed,
                task_id: task.id,
                run_index: ctx.run_index,
                round,
                step,
            };
            let reply = match self.oracle.complete(&conv, &key) {
                Ok(reply) => reply,
                Err(e) => {
                    progress.cause = Some(e.to_string());
                    stop = true;
                    break;
                }
            };
            conv.push_assistant(reply.answer.clone(), Some(reply.completion_tokens))
                .expect("conversation awaits an answer");
            progress.initial_input_tokens.get_or_insert(reply.prompt_tokens);
            progress.cumulative += reply.total_tokens();

            let (annotation, extraction_error, verdict) = self.check(task, &reply.answer, progress);
            let shape_warnings = annotation
                .as_ref()
                .map(|c| validate_shape(c).iter().map(ToString::to_string).collect())
                .unwrap_or_default();
            let success = verdict.is_success();
            progress.traces.push(AttemptTrace {
                candidate_index: progress.traces.len() as u32 + 1,
                round_index: round,
                step_in_round: step,
                annotation,
                extraction_error,
                shape_warnings,
                verdict: verdict.clone(),
                prompt_tokens: reply.prompt_tokens,
                completion_tokens: reply.completion_tokens,
                cumulative_tokens: progress.cumulative,
            });
            if success {
                stop = true;
                break;
            }
            if step + 1 == steps {
                break;
            }
            let next = match &verdict.kind {
                // no message to learn from: ask the same question again
                VerdictKind::ToolFailure { .. } => Ok(conv.last_user().expect("initial prompt").content.clone()),
                _ => self.prompts.render_feedback(kind, &verdict, Some(task.target)),
            };
            match next {
                Ok(text) => conv.push_user(text).expect("conversation awaits feedback"),
                Err(e) => {
                    progress.cause = Some(format!("feedback rendering: {e}"));
                    stop = true;
                    break;
                }
            }
        }
        progress.conversations.push(conv);
        stop
    }

    fn check(
        &self,
        task: &Task<'_>,
        answer: &str,
        progress: &mut Progress,
    ) -> (Option<AnnotationCandidate>, Option<String>, Verdict) {
        let no_block = |e: String| (None, Some(e), Verdict::syntax(NO_BLOCK_MESSAGE, ""));
        let candidate = match extract_annotation(answer, task.doc.kind()) {
            Ok(c) => c,
            Err(e) => return no_block(e.to_string()),
        };
        let draft = match splice(task.doc, &candidate) {
            Ok(d) => d,
            Err(e) => return no_block(e.to_string()),
        };
        let verdict = self.verifier.verify(&VerifyRequest {
            draft: &draft.text,
            target: task.target,
            candidate: &candidate,
        });
        if verdict.is_success() {
            progress.solution = Some(draft);
        }
        (Some(candidate), None, verdict)
    }
}
