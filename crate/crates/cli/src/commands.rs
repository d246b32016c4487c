use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};

use specloop_core::bench::{
    curve_success_vs_steps, curve_success_vs_token_ratio, curves_to_csv, load_manifest, matrix_cells, read_log,
    report_mixed_vs_sampling, run_matrix, summary_to_csv, BenchError, Curve, LogHeader, LogWriter, MatrixConfig,
    RunRecord, LOG_FORMAT_VERSION,
};
use specloop_core::source_model::{parse_document, GapKind};
use specloop_core::strategy::{AttemptTrace, Engine, Outcome, RunContext, StrategySpec, Task};
use specloop_core::verifier::VerdictKind;

use crate::config::{LoadedConfig, Overrides};
use crate::{AnnotateArgs, BenchReportArgs, BenchRunArgs, CurveKind, TableKind};

pub const CURVE_STEPS_FILE: &str = "curve_steps.csv";
pub const CURVE_RATIO_FILE: &str = "curve_token_ratio.csv";
pub const TABLE_MIXED_FILE: &str = "table_mixed_vs_sampling.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    /// Unsolved task, or nothing to report.
    NoResult,
    ConfigError,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Success => 0,
            Status::NoResult => 1,
            Status::ConfigError => 2,
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub status: Status,
    pub error: anyhow::Error,
}

fn config_error(e: impl Into<anyhow::Error>) -> Failure {
    Failure {
        status: Status::ConfigError,
        error: e.into(),
    }
}

fn no_result(e: impl Into<anyhow::Error>) -> Failure {
    Failure {
        status: Status::NoResult,
        error: e.into(),
    }
}

fn parse_strategy(s: &str) -> Result<StrategySpec, Failure> {
    s.trim()
        .parse::<StrategySpec>()
        .map_err(|e| config_error(anyhow!("strategy {s:?}: {e}")))
}

/// `Foo.java` becomes `Foo.annotated.java` in the same directory.
pub fn annotated_path(input: &Path) -> PathBuf {
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    input.with_file_name(format!("{stem}.annotated.java"))
}

fn verdict_summary(trace: &AttemptTrace) -> String {
    if let Some(e) = &trace.extraction_error {
        return format!("no candidate ({e})");
    }
    match &trace.verdict.kind {
        VerdictKind::Success => "success".into(),
        VerdictKind::SyntaxError { parser_message } => {
            format!("syntax error: {}", parser_message.lines().next().unwrap_or(""))
        }
        VerdictKind::SemanticError { branch_labels, .. } => {
            format!("open goals: {}", branch_labels.join(", "))
        }
        VerdictKind::ToolFailure { reason } => format!("tool failure: {reason}"),
    }
}

fn print_trace_summary(outcome: &Outcome) {
    for t in &outcome.traces {
        println!(
            "  candidate {} (round {}, step {}): {} [{} tokens]",
            t.candidate_index,
            t.round_index + 1,
            t.step_in_round + 1,
            verdict_summary(t),
            t.cumulative_tokens
        );
    }
    if let Some(cause) = &outcome.cause {
        println!("  aborted: {cause}");
    }
}

pub fn annotate(args: &AnnotateArgs) -> Result<Status, Failure> {
    let strategy = parse_strategy(&args.strategy)?;
    let overrides = Overrides {
        seed: args.seed,
        parallelism: None,
    };
    let cfg = LoadedConfig::load(&args.config, &overrides).map_err(config_error)?;
    let text = std::fs::read_to_string(&args.file)
        .with_context(|| format!("reading {}", args.file.display()))
        .map_err(config_error)?;
    let mut doc = parse_document(&text, args.gap_hint.as_deref()).map_err(config_error)?;
    if let Some(t) = &args.target {
        doc = doc.with_target_method(t.clone());
    }
    let target = doc
        .gap()
        .target_method()
        .map(str::to_owned)
        .ok_or_else(|| config_error(anyhow!("no target method found; pass --target")))?;
    let id = args
        .file
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("task")
        .to_owned();

    let prompts = cfg.prompts().map_err(config_error)?;
    let oracle = cfg.oracle().map_err(config_error)?;
    let verifier = cfg.verifier().map_err(config_error)?;
    let engine = Engine::new(oracle.as_ref(), verifier.as_ref(), &prompts);
    let task = Task {
        id: &id,
        doc: &doc,
        target: &target,
    };
    let ctx = RunContext {
        seed: cfg.config.seed,
        run_index: 0,
    };
    let result = engine.run(&task, strategy, ctx).map_err(config_error)?;
    let outcome = &result.outcome;

    match (&result.solution, outcome.solving_candidate_index) {
        (Some(draft), Some(index)) => {
            let out = args.out.clone().unwrap_or_else(|| annotated_path(&args.file));
            std::fs::write(&out, &draft.text)
                .with_context(|| format!("writing {}", out.display()))
                .map_err(config_error)?;
            let trace = &outcome.traces[index as usize - 1];
            println!(
                "solved {} gap in {} with candidate {} of {} ({} tokens)",
                doc.kind(),
                target,
                index,
                strategy.candidate_budget(),
                outcome.total_tokens
            );
            if let Some(c) = &trace.annotation {
                println!("{}", c.jml_text());
            }
            println!("wrote {}", out.display());
            Ok(Status::Success)
        }
        _ => {
            println!("unsolved after {} candidates ({strategy})", outcome.traces.len());
            if let Some(last) = outcome.traces.last() {
                println!("final verdict: {}", verdict_summary(last));
            }
            print_trace_summary(outcome);
            Ok(Status::NoResult)
        }
    }
}

fn cell_line(r: &RunRecord) -> String {
    let result = match (r.outcome.solving_candidate_index, &r.outcome.cause) {
        (Some(i), _) => format!("solved at candidate {i}"),
        (None, Some(cause)) => format!("unsolved ({cause})"),
        (None, None) => "unsolved".into(),
    };
    format!("{} {} run {}: {}", r.task_id, r.strategy, r.run_index, result)
}

pub fn bench_run(args: &BenchRunArgs) -> Result<Status, Failure> {
    let strategies = args
        .strategies
        .iter()
        .map(|s| parse_strategy(s))
        .collect::<Result<Vec<_>, _>>()?;
    if args.runs == 0 {
        return Err(config_error(anyhow!("--runs must be at least 1")));
    }
    let overrides = Overrides {
        seed: args.seed,
        parallelism: args.parallelism,
    };
    let cfg = LoadedConfig::load(&args.config, &overrides).map_err(config_error)?;
    let tasks = load_manifest(&args.manifest).map_err(config_error)?;
    let prompts = cfg.prompts().map_err(config_error)?;
    let oracle = cfg.oracle().map_err(config_error)?;
    let verifier = cfg.verifier().map_err(config_error)?;
    let engine = Engine::new(oracle.as_ref(), verifier.as_ref(), &prompts);

    let header = LogHeader {
        format: LOG_FORMAT_VERSION,
        seed: cfg.config.seed,
        config_hash: cfg.hash(),
        prompt_hashes: prompts.hashes(),
    };
    let mut writer = if args.resume {
        LogWriter::resume(&args.out, &header)
    } else {
        LogWriter::create(&args.out, &header)
    }
    .map_err(config_error)?;

    let skip = writer.completed().clone();
    let total = matrix_cells(&tasks, &strategies, args.runs).len();
    let todo = matrix_cells(&tasks, &strategies, args.runs)
        .iter()
        .filter(|(t, s, r)| !skip.contains(&(t.spec.id.clone(), *s, *r)))
        .count();
    if todo < total {
        eprintln!("resuming: {} of {total} cells already logged", total - todo);
    }
    let matrix = MatrixConfig {
        runs: args.runs,
        seed: cfg.config.seed,
        parallelism: cfg.config.parallelism,
    };
    let mut done = 0;
    let mut solved = 0;
    run_matrix(&engine, &tasks, &strategies, &matrix, &skip, |record| {
        writer.append(record)?;
        done += 1;
        solved += record.outcome.solved as usize;
        eprintln!("[{done}/{todo}] {}", cell_line(record));
        Ok(())
    })
    .map_err(config_error)?;
    println!("{done} cells run, {solved} solved; log {}", args.out.display());
    Ok(Status::Success)
}

fn report_error(e: BenchError) -> Failure {
    match e {
        BenchError::NoData(_) | BenchError::ArmMissing(_) => no_result(e),
        other => config_error(other),
    }
}

fn write_output(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(config_error)?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn bench_report(args: &BenchReportArgs) -> Result<Status, Failure> {
    if !(args.max_ratio >= 0.0 && args.max_ratio.is_finite()) {
        return Err(config_error(anyhow!("--max-ratio must be a non-negative number")));
    }
    let (_, records) = read_log(&args.log).map_err(config_error)?;
    if records.is_empty() {
        return Err(no_result(BenchError::NoData(format!("{}", args.log.display()))));
    }
    let mut curves: Vec<CurveKind> = args.curves.clone();
    if curves.is_empty() && args.tables.is_empty() {
        curves = vec![CurveKind::Steps, CurveKind::TokenRatio];
    }
    curves.dedup();
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))
        .map_err(config_error)?;

    let slices: BTreeSet<(StrategySpec, GapKind)> = records.iter().map(|r| (r.strategy, r.kind)).collect();
    for kind in [CurveKind::Steps, CurveKind::TokenRatio] {
        if !curves.contains(&kind) {
            continue;
        }
        let mut out: Vec<Curve> = Vec::new();
        for &(strategy, gap) in &slices {
            let curve = match kind {
                CurveKind::Steps => curve_success_vs_steps(&records, strategy, gap, strategy.candidate_budget()),
                CurveKind::TokenRatio => curve_success_vs_token_ratio(&records, strategy, gap, args.max_ratio),
            };
            out.push(curve.map_err(report_error)?);
        }
        let file = match kind {
            CurveKind::Steps => CURVE_STEPS_FILE,
            CurveKind::TokenRatio => CURVE_RATIO_FILE,
        };
        write_output(&args.out_dir.join(file), &curves_to_csv(&out))?;
    }
    if args.tables.contains(&TableKind::Mixed) {
        let cmp = report_mixed_vs_sampling(&records).map_err(report_error)?;
        write_output(&args.out_dir.join(TABLE_MIXED_FILE), &summary_to_csv(&cmp))?;
    }
    Ok(Status::Success)
}
