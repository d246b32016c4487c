use serde::{Deserialize, Serialize};

/// Per-turn token sizes: `input` for the initial query, `output` per answer,
/// `feedback` per verifier-feedback message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenCostModel {
    pub input: u64,
    pub output: u64,
    pub feedback: u64,
}

impl TokenCostModel {
    pub fn new(input: u64, output: u64, feedback: u64) -> Self {
        TokenCostModel {
            input,
            output,
            feedback,
        }
    }

    /// Cost of the `i`-th feedback iteration (1-based): the whole previous
    /// conversation is read again before one more answer is written.
    pub fn feedback_iteration_cost(&self, i: u64) -> u64 {
        self.input + (i - 1) * (self.output + self.feedback) + self.output
    }

    /// Total over `n` feedback iterations, closed form.
    pub fn feedback_cost(&self, n: u64) -> u64 {
        n * (self.input + self.output) + n * (n.saturating_sub(1)) / 2 * (self.output + self.feedback)
    }

    /// Total over `n` independent samples.
    pub fn sampling_cost(&self, n: u64) -> u64 {
        n * (self.input + self.output)
    }
}

pub fn predicted_cost_feedback(model: &TokenCostModel, n: u64) -> u64 {
    model.feedback_cost(n)
}

pub fn predicted_cost_sampling(model: &TokenCostModel, n: u64) -> u64 {
    model.sampling_cost(n)
}
