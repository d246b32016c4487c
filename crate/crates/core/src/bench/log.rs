//! Append-only JSON Lines run log: one header line, then one record per
//! finished matrix cell.

use std::collections::{BTreeMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::source_model::GapKind;
use crate::strategy::{Outcome, StrategySpec};

pub const LOG_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogHeader {
    pub format: u32,
    pub seed: u64,
    pub config_hash: String,
    pub prompt_hashes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub task_id: String,
    pub kind: GapKind,
    pub strategy: StrategySpec,
    pub run_index: u32,
    pub seed: u64,
    pub outcome: Outcome,
    pub started_at_ms: u64,
    pub finished_at_ms: u64,
}

/// (task id, strategy, run index) — unique per log.
pub type CellKey = (String, StrategySpec, u32);

impl RunRecord {
    pub fn key(&self) -> CellKey {
        (self.task_id.clone(), self.strategy, self.run_index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogLine {
    Header(LogHeader),
    Record(RunRecord),
}

/// Header (if any) and records of an existing log.
pub fn read_log(path: &Path) -> Result<(Option<LogHeader>, Vec<RunRecord>), BenchError> {
    let file = File::open(path).map_err(|source| BenchError::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut header = None;
    let mut records = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| BenchError::Io {
            path: path.to_owned(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(LogLine::Header(h)) if n == 0 => header = Some(h),
            Ok(LogLine::Header(_)) => {
                return Err(BenchError::LogFormat {
                    line: n + 1,
                    message: "header after the first line".into(),
                })
            }
            Ok(LogLine::Record(r)) => records.push(r),
            Err(e) => {
                return Err(BenchError::LogFormat {
                    line: n + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok((header, records))
}

/// Single writer for a run log; every record is flushed as it is appended.
pub struct LogWriter {
    path: PathBuf,
    file: File,
    done: HashSet<CellKey>,
}

impl LogWriter {
    /// Start a fresh log with `header`, truncating any existing file.
    pub fn create(path: &Path, header: &LogHeader) -> Result<Self, BenchError> {
        let io = |source| BenchError::Io {
            path: path.to_owned(),
            source,
        };
        let mut file = File::create(path).map_err(io)?;
        let line = serde_json::to_string(&LogLine::Header(header.clone())).expect("header json");
        writeln!(file, "{line}").map_err(io)?;
        file.flush().map_err(io)?;
        Ok(LogWriter {
            path: path.to_owned(),
            file,
            done: HashSet::new(),
        })
    }

    /// Continue an existing log, or create it when absent. The recorded seed
    /// must match; a differing config hash is only warned about.
    pub fn resume(path: &Path, header: &LogHeader) -> Result<Self, BenchError> {
        if !path.exists() {
            return Self::create(path, header);
        }
        let (existing, records) = read_log(path)?;
        if let Some(existing) = &existing {
            if existing.seed != header.seed {
                return Err(BenchError::Resume(format!(
                    "log seed {} differs from requested seed {}",
                    existing.seed, header.seed
                )));
            }
            if existing.config_hash != header.config_hash {
                log::warn!("resuming {} under a different configuration", path.display());
            }
        }
        let file = OpenOptions::new()
            .append(true)
            .open(path)
            .map_err(|source| BenchError::Io {
                path: path.to_owned(),
                source,
            })?;
        Ok(LogWriter {
            path: path.to_owned(),
            file,
            done: records.iter().map(RunRecord::key).collect(),
        })
    }

    /// Cells already present in the log.
    pub fn completed(&self) -> &HashSet<CellKey> {
        &self.done
    }

    pub fn append(&mut self, record: &RunRecord) -> Result<(), BenchError> {
        let line = serde_json::to_string(&LogLine::Record(record.clone())).expect("record json");
        writeln!(self.file, "{line}")
            .and_then(|_| self.file.flush())
            .map_err(|source| BenchError::Io {
                path: self.path.clone(),
                source,
            })?;
        self.done.insert(record.key());
        Ok(())
    }
}
