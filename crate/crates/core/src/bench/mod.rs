//! Benchmark harness: task manifests, the strategy × task × run matrix, its
//! run log, and the aggregate curves and tables computed from it.

mod curves;
mod log;
mod manifest;
mod matrix;
mod report;

use std::path::PathBuf;

use thiserror::Error;

pub use curves::{
    curve_at, curve_success_vs_steps, curve_success_vs_token_ratio, curves_to_csv, median, Curve, CurvePoint, XAxis,
    CURVE_CSV_HEADER, DEFAULT_MAX_RATIO, RATIO_GRID_DIVISIONS,
};
pub use log::{read_log, CellKey, LogHeader, LogLine, LogWriter, RunRecord, LOG_FORMAT_VERSION};
pub use manifest::{load_manifest, load_task, LoadedTask, SpecTask};
pub use matrix::{matrix_cells, run_cell, run_matrix, MatrixConfig};
pub use report::{
    compare_arms, report_mixed_vs_sampling, summary_to_csv, ArmComparison, ArmSummary, PREFERRED_MIXED,
    PREFERRED_SAMPLING, SUMMARY_CSV_HEADER,
};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("manifest{}: {message}", entry.as_ref().map(|e| format!(" entry {e}")).unwrap_or_default())]
    Manifest { entry: Option<String>, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("run log line {line}: {message}")]
    LogFormat { line: usize, message: String },
    #[error("cannot resume: {0}")]
    Resume(String),
    #[error("no data for {0}")]
    NoData(String),
    #[error("{0}")]
    ArmMissing(String),
}
