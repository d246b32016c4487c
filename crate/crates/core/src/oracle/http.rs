use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{DrawKey, Oracle, OracleError, OracleReply, UsageSource};
use crate::prompting::{count_tokens, Conversation};

pub const ENV_API_BASE: &str = "SPECLOOP_API_BASE";
pub const ENV_API_KEY: &str = "SPECLOOP_API_KEY";

const DEFAULT_BASE: &str = "https://api.openai.com/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    pub base_url: String,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    pub model: String,
    pub max_retries: u32,
    pub request_timeout: Duration,
    pub retry_backoff: Duration,
    /// Reject conversations above this many (estimated) tokens before sending.
    pub context_window: Option<u64>,
    /// Decoding parameters copied verbatim into the request body.
    pub params: BTreeMap<String, Value>,
}

impl HttpConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        HttpConfig {
            base_url: base_url.into(),
            api_key: None,
            model: model.into(),
            max_retries: 3,
            request_timeout: Duration::from_secs(120),
            retry_backoff: Duration::from_millis(500),
            context_window: None,
            params: BTreeMap::new(),
        }
    }

    /// Base URL and key from `SPECLOOP_API_BASE` / `SPECLOOP_API_KEY`.
    pub fn from_env(model: impl Into<String>) -> Self {
        let base = std::env::var(ENV_API_BASE).unwrap_or_else(|_| DEFAULT_BASE.to_owned());
        let mut config = Self::new(base, model);
        config.api_key = std::env::var(ENV_API_KEY).ok().filter(|k| !k.is_empty());
        config
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    prompt_tokens: Option<u64>,
    completion_tokens: Option<u64>,
}

/// Blocking client for an OpenAI-style `/chat/completions` endpoint.
pub struct HttpOracle {
    client: reqwest::blocking::Client,
    config: HttpConfig,
}

enum Attempt {
    Retry(String),
    Fatal(OracleError),
}

impl HttpOracle {
    pub fn new(config: HttpConfig) -> Result<Self, OracleError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.request_timeout)
            .build()
            .map_err(|e| OracleError::Config(e.to_string()))?;
        Ok(HttpOracle { client, config })
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn request_body(&self, conv: &Conversation) -> Value {
        let messages: Vec<Value> = conv
            .messages()
            .iter()
            .map(|m| json!({ "role": m.role.as_str(), "content": m.content }))
            .collect();
        let mut body = json!({ "model": self.config.model, "messages": messages });
        let obj = body.as_object_mut().expect("object");
        for (k, v) in &self.config.params {
            obj.insert(k.clone(), v.clone());
        }
        body
    }

    fn attempt(&self, body: &Value, conv: &Conversation) -> Result<OracleReply, Attempt> {
        let mut request = self.client.post(self.endpoint()).json(body);
        if let Some(key) = &self.config.api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = response.status();
        let text = response.text().map_err(|e| Attempt::Retry(e.to_string()))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(Attempt::Retry(format!("HTTP {status}: {text}")));
        }
        if !status.is_success() {
            return Err(Attempt::Fatal(OracleError::Transport {
                attempts: 1,
                message: format!("HTTP {status}: {text}"),
            }));
        }
        let parsed: ChatResponse =
            serde_json::from_str(&text).map_err(|e| Attempt::Fatal(OracleError::Protocol(e.to_string())))?;
        let answer = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .filter(|a| !a.is_empty())
            .ok_or_else(|| Attempt::Fatal(OracleError::Protocol("no answer text".into())))?;
        let usage = parsed
            .usage
            .and_then(|u| Some((u.prompt_tokens?, u.completion_tokens?)));
        Ok(match usage {
            Some((prompt_tokens, completion_tokens)) => OracleReply {
                answer,
                prompt_tokens,
                completion_tokens,
                source: UsageSource::ProviderUsage,
            },
            None => OracleReply {
                prompt_tokens: conv.total_tokens(),
                completion_tokens: count_tokens(&answer),
                answer,
                source: UsageSource::Estimated,
            },
        })
    }
}

impl Oracle for HttpOracle {
    fn complete(&self, conv: &Conversation, _key: &DrawKey<'_>) -> Result<OracleReply, OracleError> {
        if !conv.ends_with_user() {
            return Err(OracleError::NotAwaitingAnswer);
        }
        if let Some(window) = self.config.context_window {
            let tokens = conv.total_tokens();
            if tokens > window {
                return Err(OracleError::ContextOverflow { tokens, window });
            }
        }
        let body = self.request_body(conv);
        let mut last = String::new();
        let attempts = self.config.max_retries + 1;
        for n in 1..=attempts {
            match self.attempt(&body, conv) {
                Ok(reply) => return Ok(reply),
                Err(Attempt::Fatal(OracleError::Transport { message, .. })) => {
                    return Err(OracleError::Transport { attempts: n, message })
                }
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(message)) => {
                    log::debug!("completion attempt {n}/{attempts} failed: {message}");
                    last = message;
                    if n < attempts {
                        std::thread::sleep(self.config.retry_backoff * n);
                    }
                }
            }
        }
        Err(OracleError::Transport {
            attempts,
            message: last,
        })
    }
}
