use std::collections::{BTreeMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::{SystemTime, UNIX_EPOCH};

use super::log::{CellKey, RunRecord};
use super::manifest::LoadedTask;
use super::BenchError;
use crate::strategy::{Engine, Outcome, RunContext, StrategySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatrixConfig {
    pub runs: u32,
    pub seed: u64,
    /// Worker threads; 0 is treated as 1.
    pub parallelism: usize,
}

/// Cells in canonical order: task-major, then strategy, then run.
pub fn matrix_cells<'t>(
    tasks: &'t [LoadedTask],
    strategies: &[StrategySpec],
    runs: u32,
) -> Vec<(&'t LoadedTask, StrategySpec, u32)> {
    let mut cells = Vec::with_capacity(tasks.len() * strategies.len() * runs as usize);
    for task in tasks {
        for &strategy in strategies {
            for run in 0..runs {
                cells.push((task, strategy, run));
            }
        }
    }
    cells
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".into())
}

/// Execute one cell. Errors and panics become an unsolved outcome.
pub fn run_cell(
    engine: &Engine<'_>,
    task: &LoadedTask,
    strategy: StrategySpec,
    run_index: u32,
    seed: u64,
) -> RunRecord {
    let started_at_ms = now_ms();
    let ctx = RunContext { seed, run_index };
    let outcome = match catch_unwind(AssertUnwindSafe(|| engine.run(&task.task(), strategy, ctx))) {
        Ok(Ok(result)) => result.outcome,
        Ok(Err(e)) => Outcome::unsolved_with_cause(e.to_string()),
        Err(payload) => Outcome::unsolved_with_cause(format!("panic: {}", panic_message(payload.as_ref()))),
    };
    RunRecord {
        task_id: task.spec.id.clone(),
        kind: task.kind(),
        strategy,
        run_index,
        seed,
        outcome,
        started_at_ms,
        finished_at_ms: now_ms(),
    }
}

/// Run every cell of tasks × strategies × runs not listed in `skip`.
///
/// Cells execute on up to `parallelism` threads; `sink` is called on the
/// calling thread in canonical cell order regardless of completion order.
/// An error from `sink` stops the matrix after in-flight cells finish.
pub fn run_matrix(
    engine: &Engine<'_>,
    tasks: &[LoadedTask],
    strategies: &[StrategySpec],
    config: &MatrixConfig,
    skip: &HashSet<CellKey>,
    mut sink: impl FnMut(&RunRecord) -> Result<(), BenchError>,
) -> Result<usize, BenchError> {
    let cells: Vec<_> = matrix_cells(tasks, strategies, config.runs)
        .into_iter()
        .filter(|(t, s, r)| !skip.contains(&(t.spec.id.clone(), *s, *r)))
        .collect();
    if cells.is_empty() {
        return Ok(0);
    }
    let workers = config.parallelism.max(1).min(cells.len());
    let next = AtomicUsize::new(0);
    let stop = std::sync::atomic::AtomicBool::new(false);
    let (tx, rx) = mpsc::channel::<(usize, RunRecord)>();

    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (cells, next, stop) = (&cells, &next, &stop);
            scope.spawn(move || loop {
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(task, strategy, run)) = cells.get(i) else {
                    break;
                };
                let record = run_cell(engine, task, strategy, run, config.seed);
                if tx.send((i, record)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        let mut pending = BTreeMap::new();
        let mut emitted = 0;
        let mut failure = None;
        for (i, record) in rx {
            if failure.is_some() {
                continue;
            }
            pending.insert(i, record);
            while let Some(record) = pending.remove(&emitted) {
                if let Err(e) = sink(&record) {
                    stop.store(true, Ordering::Relaxed);
                    failure = Some(e);
                    break;
                }
                emitted += 1;
            }
        }
        match failure {
            Some(e) => Err(e),
            None => Ok(emitted),
        }
    })
}
