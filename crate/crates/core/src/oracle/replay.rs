use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{DrawKey, Oracle, OracleError, OracleReply, UsageSource};
use crate::prompting::{Conversation, Role};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureMessage {
    pub role: Role,
    pub content: String,
}

/// One recorded completion, stored as a single JSON line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub hash: String,
    pub messages: Vec<FixtureMessage>,
    pub answer: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub source: UsageSource,
}

impl FixtureEntry {
    pub fn new(conv: &Conversation, reply: &OracleReply) -> Self {
        FixtureEntry {
            hash: conv.content_hash(),
            messages: conv
                .messages()
                .iter()
                .map(|m| FixtureMessage {
                    role: m.role,
                    content: m.content.clone(),
                })
                .collect(),
            answer: reply.answer.clone(),
            prompt_tokens: reply.prompt_tokens,
            completion_tokens: reply.completion_tokens,
            source: reply.source,
        }
    }

    pub fn reply(&self) -> OracleReply {
        OracleReply {
            answer: self.answer.clone(),
            prompt_tokens: self.prompt_tokens,
            completion_tokens: self.completion_tokens,
            source: self.source,
        }
    }
}

/// Fixture file keyed by conversation content hash. Later lines override
/// earlier ones with the same hash. Access is serialized internally.
#[derive(Debug)]
pub struct FixtureStore {
    path: Option<PathBuf>,
    entries: Mutex<HashMap<String, FixtureEntry>>,
}

impl FixtureStore {
    pub fn in_memory() -> Self {
        FixtureStore {
            path: None,
            entries: Mutex::new(HashMap::new()),
        }
    }

    /// Load `path` if it exists; records are appended to it.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, OracleError> {
        let path = path.into();
        let mut entries = HashMap::new();
        if path.exists() {
            let file =
                std::fs::File::open(&path).map_err(|e| OracleError::Storage(format!("{}: {e}", path.display())))?;
            for (n, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| OracleError::Storage(e.to_string()))?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: FixtureEntry = serde_json::from_str(&line)
                    .map_err(|e| OracleError::Storage(format!("{}:{}: {e}", path.display(), n + 1)))?;
                entries.insert(entry.hash.clone(), entry);
            }
        }
        Ok(FixtureStore {
            path: Some(path),
            entries: Mutex::new(entries),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("fixture lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lookup(&self, hash: &str) -> Option<FixtureEntry> {
        self.entries.lock().expect("fixture lock").get(hash).cloned()
    }

    /// Store `reply` as the answer to `conv`, appending to the file.
    pub fn record(&self, conv: &Conversation, reply: &OracleReply) -> Result<FixtureEntry, OracleError> {
        let entry = FixtureEntry::new(conv, reply);
        let mut entries = self.entries.lock().expect("fixture lock");
        if let Some(path) = &self.path {
            let mut line = serde_json::to_string(&entry).map_err(|e| OracleError::Storage(e.to_string()))?;
            line.push('\n');
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .and_then(|mut f| f.write_all(line.as_bytes()))
                .map_err(|e| OracleError::Storage(format!("{}: {e}", path.display())))?;
        }
        if entries.insert(entry.hash.clone(), entry.clone()).is_some() {
            log::warn!("fixture {} recorded twice; keeping the newer answer", entry.hash);
        }
        Ok(entry)
    }
}

/// Answers only from recorded fixtures.
#[derive(Debug)]
pub struct ReplayOracle {
    store: FixtureStore,
}

impl ReplayOracle {
    pub fn new(store: FixtureStore) -> Self {
        ReplayOracle { store }
    }

    pub fn store(&self) -> &FixtureStore {
        &self.store
    }
}

impl Oracle for ReplayOracle {
    fn complete(&self, conv: &Conversation, _key: &DrawKey<'_>) -> Result<OracleReply, OracleError> {
        if !conv.ends_with_user() {
            return Err(OracleError::NotAwaitingAnswer);
        }
        let hash = conv.content_hash();
        self.store
            .lookup(&hash)
            .map(|e| e.reply())
            .ok_or(OracleError::FixtureMiss { hash })
    }
}

/// Passes calls to a live oracle and records every reply.
pub struct RecordingOracle<O> {
    inner: O,
    store: FixtureStore,
}

impl<O: Oracle> RecordingOracle<O> {
    pub fn new(inner: O, store: FixtureStore) -> Self {
        RecordingOracle { inner, store }
    }
}

impl<O: Oracle> Oracle for RecordingOracle<O> {
    fn complete(&self, conv: &Conversation, key: &DrawKey<'_>) -> Result<OracleReply, OracleError> {
        let reply = self.inner.complete(conv, key)?;
        self.store.record(conv, &reply)?;
        Ok(reply)
    }
}
