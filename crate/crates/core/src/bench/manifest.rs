use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::source_model::{parse_document, AnnotatedDocument, GapKind};
use crate::strategy::Task;

/// One benchmark instance as written in a manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecTask {
    pub id: String,
    /// Relative paths are resolved against the manifest's directory.
    pub source_path: PathBuf,
    pub kind: GapKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_hint: Option<String>,
    /// Defaults to the detected enclosing (invariant) or calling (contract)
    /// method.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_method: Option<String>,
    #[serde(default)]
    pub tags: Vec<String>,
}

/// A manifest entry with its source parsed and gap located.
#[derive(Debug, Clone)]
pub struct LoadedTask {
    pub spec: SpecTask,
    pub doc: AnnotatedDocument,
    pub target: String,
}

impl LoadedTask {
    pub fn task(&self) -> Task<'_> {
        Task {
            id: &self.spec.id,
            doc: &self.doc,
            target: &self.target,
        }
    }

    pub fn kind(&self) -> GapKind {
        self.spec.kind
    }
}

/// Read and check one task; `base_dir` anchors a relative source path.
pub fn load_task(spec: SpecTask, base_dir: &Path) -> Result<LoadedTask, String> {
    let path = if spec.source_path.is_absolute() {
        spec.source_path.clone()
    } else {
        base_dir.join(&spec.source_path)
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let doc = parse_document(&text, spec.gap_hint.as_deref()).map_err(|e| e.to_string())?;
    if doc.kind() != spec.kind {
        return Err(format!(
            "manifest says {} gap but {} has a {} gap",
            spec.kind,
            path.display(),
            doc.kind()
        ));
    }
    let doc = match &spec.target_method {
        Some(t) => doc.with_target_method(t.clone()),
        None => doc,
    };
    let target = doc
        .gap()
        .target_method()
        .map(str::to_owned)
        .ok_or_else(|| "no target method given and none could be located".to_owned())?;
    Ok(LoadedTask { spec, doc, target })
}

/// Parse a JSON array of [`SpecTask`] and validate every entry.
pub fn load_manifest(path: &Path) -> Result<Vec<LoadedTask>, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io {
        path: path.to_owned(),
        source,
    })?;
    let specs: Vec<SpecTask> = serde_json::from_str(&text).map_err(|e| BenchError::Manifest {
        entry: None,
        message: format!("{}: {e}", path.display()),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut seen = HashSet::new();
    let mut tasks = Vec::with_capacity(specs.len());
    for spec in specs {
        if !seen.insert(spec.id.clone()) {
            return Err(BenchError::Manifest {
                entry: Some(spec.id.clone()),
                message: "duplicate task id".into(),
            });
        }
        let id = spec.id.clone();
        let task = load_task(spec, base).map_err(|message| BenchError::Manifest {
            entry: Some(id),
            message,
        })?;
        tasks.push(task);
    }
    Ok(tasks)
}
