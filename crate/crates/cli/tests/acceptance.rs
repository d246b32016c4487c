//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints one PASS/FAIL line; the process fails if any criterion fails.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use sha2::{Digest, Sha256};

use specloop_core::bench::{
    curve_success_vs_steps, curve_success_vs_token_ratio, run_matrix, LoadedTask, MatrixConfig, RunRecord, SpecTask,
};
use specloop_core::oracle::{
    format_answer, DrawKey, FnOracle, OracleError, StochasticOracle, StochasticOracleConfig, StochasticProfile,
};
use specloop_core::prompting::{count_tokens, Conversation, PromptSet};
use specloop_core::source_model::{parse_document, AnnotatedDocument, GapKind};
use specloop_core::strategy::{
    predicted_cost_feedback, predicted_cost_sampling, Engine, Outcome, RunContext, StrategySpec, Task, TokenCostModel,
};
use specloop_core::verifier::{MockRule, MockVerifier, Predicate, RuleMatch, Verdict};

type Check = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Check);

const LISTING1: &str = "//@ ensures \\result == -2*x;\nint f(int x) { return g(-x); }\nint g(int x) { return x+x; }\n";
const CORRECT_G: &str = "/*@ normal_behavior ensures \\result == 2*x; assignable \\nothing; @*/";

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/listing1")
}

fn prompts_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/prompts")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn semantic_verifier(label: &str) -> MockVerifier {
    MockVerifier::new(vec![MockRule::new(
        RuleMatch::Predicate(Predicate::Always),
        Verdict::semantic(vec![label.to_owned()], None, "OPEN").unwrap(),
    )])
    .unwrap()
}

fn accepting_verifier(jml: &str) -> MockVerifier {
    MockVerifier::new(vec![MockRule::new(
        RuleMatch::Exact(jml.into()),
        Verdict::success("CLOSED"),
    )])
    .unwrap()
}

fn listing_doc() -> AnnotatedDocument {
    parse_document(LISTING1, Some("g")).unwrap()
}

// 1 ---------------------------------------------------------------------------

fn cost_model_exactness() -> Check {
    let mut cases = 0;
    for i in [0u64, 1, 100, 1000] {
        for o in [50u64, 200] {
            for r in [0u64, 100] {
                let m = TokenCostModel::new(i, o, r);
                let mut sum = 0;
                for n in 1..=50u64 {
                    sum += i + (n - 1) * (o + r) + o;
                    ensure(predicted_cost_feedback(&m, n) == sum, || {
                        format!(
                            "feedback I={i} O={o} R={r} n={n}: {} != {sum}",
                            predicted_cost_feedback(&m, n)
                        )
                    })?;
                    ensure(predicted_cost_sampling(&m, n) == n * (i + o), || {
                        format!("sampling I={i} O={o} R={r} n={n}")
                    })?;
                    cases += 1;
                }
            }
        }
    }
    Ok(format!("{cases} (I,O,R,n) cases exact"))
}

// 2 ---------------------------------------------------------------------------

/// Smallest padding whose token count reaches `target`, if it hits exactly.
/// Token counts grow by at most one per padding byte.
fn pad_to(target: u64, what: &str, tokens: impl Fn(usize) -> Result<u64, String>) -> Result<usize, String> {
    let (mut lo, mut hi) = (0usize, 1usize << 16);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if tokens(mid)? < target {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    if tokens(lo)? == target {
        Ok(lo)
    } else {
        Err(format!("cannot pad the {what} to {target} tokens"))
    }
}

/// The listing fixture with a trailing comment long enough that system plus initial
/// prompt cost exactly `target` tokens.
fn padded_listing(prompts: &PromptSet, target: u64) -> Result<AnnotatedDocument, String> {
    let doc = |pad: usize| {
        parse_document(&format!("{LISTING1}// {}\n", "p".repeat(pad)), Some("g")).map_err(|e| e.to_string())
    };
    let pad = pad_to(target, "query", |pad| {
        let initial = prompts
            .render_initial(GapKind::Contract, &doc(pad)?)
            .map_err(|e| e.to_string())?;
        Ok(count_tokens(prompts.render_system(GapKind::Contract)) + count_tokens(&initial))
    })?;
    doc(pad)
}

/// A branch label making the rendered semantic feedback exactly `target` tokens.
fn padded_label(prompts: &PromptSet, target: u64) -> Result<String, String> {
    let label = |pad: usize| format!("Post {}", "q".repeat(pad));
    let pad = pad_to(target, "feedback", |pad| {
        let v = Verdict::semantic(vec![label(pad)], None, "").unwrap();
        let text = prompts
            .render_feedback(GapKind::Contract, &v, Some("f"))
            .map_err(|e| e.to_string())?;
        Ok(count_tokens(&text))
    })?;
    Ok(label(pad))
}

/// An answer of exactly `target` tokens carrying a fixed wrong contract.
fn padded_answer(target: u64) -> Result<String, String> {
    let base = format_answer("/*@ ensures \\result == x; @*/");
    let answer = |pad: usize| format!("{}{base}", "a".repeat(pad));
    let pad = pad_to(target, "answer", |pad| Ok(count_tokens(&answer(pad))))?;
    Ok(answer(pad))
}

fn measured_vs_predicted() -> Check {
    let prompts = PromptSet::bundled();
    let n = 10;
    let mut prefixes = 0;
    for i in [1000u64, 2500] {
        let doc = padded_listing(&prompts, i)?;
        for o in [50u64, 200] {
            let answer = padded_answer(o)?;
            let oracle = FnOracle(move |_: &Conversation, _: &DrawKey<'_>| Ok::<_, OracleError>(answer.clone()));
            for r in [200u64, 400] {
                let verifier = semantic_verifier(&padded_label(&prompts, r)?);
                let engine = Engine::new(&oracle, &verifier, &prompts);
                let task = Task {
                    id: "listing1",
                    doc: &doc,
                    target: "f",
                };
                let model = TokenCostModel::new(i, o, r);
                for (spec, predict) in [
                    (
                        StrategySpec::Feedback { max_steps: n },
                        predicted_cost_feedback as fn(&_, _) -> _,
                    ),
                    (StrategySpec::Sampling { max_samples: n }, predicted_cost_sampling),
                ] {
                    let run = engine
                        .run(&task, spec, RunContext::default())
                        .map_err(|e| e.to_string())?;
                    let out = &run.outcome;
                    ensure(out.initial_input_tokens == i, || {
                        format!("{spec}: measured I {} != {i}", out.initial_input_tokens)
                    })?;
                    ensure(out.traces.len() == n as usize, || {
                        format!("{spec}: {} traces", out.traces.len())
                    })?;
                    for (k, t) in out.traces.iter().enumerate() {
                        let want = predict(&model, k as u64 + 1);
                        ensure(t.cumulative_tokens == want, || {
                            format!(
                                "{spec} I={i} O={o} R={r} prefix {}: measured {} predicted {want}",
                                k + 1,
                                t.cumulative_tokens
                            )
                        })?;
                        prefixes += 1;
                    }
                }
            }
        }
    }
    Ok(format!("{prefixes} cumulative prefixes equal to the closed forms"))
}

// 3 ---------------------------------------------------------------------------

fn stochastic_profile(p: f64, stuck: f64) -> StochasticProfile {
    StochasticProfile {
        success_probability: p,
        correct_answer: CORRECT_G.into(),
        wrong_answer_pool: vec![
            "/*@ normal_behavior ensures \\result == x; @*/".into(),
            "/*@ normal_behavior ensures \\result == -2*x; assignable \\nothing; @*/".into(),
            "/*@ normal_behavior requires x > 0; ensures \\result > x; @*/".into(),
        ],
        stuck_bias: stuck,
    }
}

fn geometric_sampling_law() -> Check {
    let oracle = StochasticOracle::uniform(stochastic_profile(0.3, 0.0), 2024).map_err(|e| e.to_string())?;
    let verifier = accepting_verifier(CORRECT_G);
    let prompts = PromptSet::bundled();
    let engine = Engine::new(&oracle, &verifier, &prompts);
    let doc = listing_doc();
    let tasks = 10_000;
    let ids: Vec<String> = (0..tasks).map(|i| format!("sim{i}")).collect();
    let loaded: Vec<LoadedTask> = ids
        .iter()
        .map(|id| LoadedTask {
            spec: SpecTask {
                id: id.clone(),
                source_path: "Listing1.java".into(),
                kind: GapKind::Contract,
                gap_hint: Some("g".into()),
                target_method: None,
                tags: vec![],
            },
            doc: doc.clone(),
            target: "f".into(),
        })
        .collect();
    let config = MatrixConfig {
        runs: 1,
        seed: 1,
        parallelism: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let mut solved = 0usize;
    run_matrix(
        &engine,
        &loaded,
        &[StrategySpec::Sampling { max_samples: 10 }],
        &config,
        &HashSet::new(),
        |r| {
            solved += r.outcome.solved as usize;
            Ok(())
        },
    )
    .map_err(|e| e.to_string())?;
    let expected = 1.0 - 0.7f64.powi(10);
    let fraction = solved as f64 / tasks as f64;
    ensure((fraction - expected).abs() <= 0.02, || {
        format!("solve fraction {fraction:.4} vs {expected:.4}")
    })?;
    Ok(format!("solve fraction {fraction:.4}, expected {expected:.4} ± 0.02"))
}

// 4 ---------------------------------------------------------------------------

fn degenerate_equivalences() -> Check {
    let oracle = StochasticOracle::uniform(stochastic_profile(0.3, 0.6), 99).map_err(|e| e.to_string())?;
    let verifier = accepting_verifier(CORRECT_G);
    let prompts = PromptSet::bundled();
    let engine = Engine::new(&oracle, &verifier, &prompts);
    let doc = listing_doc();
    let mut compared = 0;
    for t in 0..20 {
        let id = format!("eq{t}");
        let task = Task {
            id: &id,
            doc: &doc,
            target: "f",
        };
        for seed in [0u64, 17] {
            let ctx = RunContext { seed, run_index: t };
            let pairs = [
                (
                    StrategySpec::Mixed {
                        rounds: 1,
                        steps_per_round: 10,
                    },
                    StrategySpec::Feedback { max_steps: 10 },
                ),
                (
                    StrategySpec::Mixed {
                        rounds: 10,
                        steps_per_round: 1,
                    },
                    StrategySpec::Sampling { max_samples: 10 },
                ),
            ];
            for (mixed, plain) in pairs {
                let a = engine.run(&task, mixed, ctx).map_err(|e| e.to_string())?;
                let b = engine.run(&task, plain, ctx).map_err(|e| e.to_string())?;
                ensure(a.outcome == b.outcome, || {
                    format!("{mixed} vs {plain} differ on {id} seed {seed}")
                })?;
                ensure(a.conversations == b.conversations, || {
                    format!("{mixed} vs {plain} conversations differ on {id}")
                })?;
                compared += 1;
            }
        }
    }
    Ok(format!("{compared} run pairs identical trace-for-trace"))
}

// 5 ---------------------------------------------------------------------------

fn budget_law() -> Check {
    let oracle = FnOracle(|_: &Conversation, _: &DrawKey<'_>| {
        Ok::<_, OracleError>(format_answer("/*@ ensures \\result == x; @*/"))
    });
    let verifier = semantic_verifier("Post (unmatched)");
    let prompts = PromptSet::bundled();
    let engine = Engine::new(&oracle, &verifier, &prompts);
    let doc = listing_doc();
    let task = Task {
        id: "budget",
        doc: &doc,
        target: "f",
    };
    let ctx = RunContext::default();
    let mixed = engine
        .run(
            &task,
            StrategySpec::Mixed {
                rounds: 5,
                steps_per_round: 10,
            },
            ctx,
        )
        .map_err(|e| e.to_string())?;
    ensure(mixed.outcome.traces.len() == 50, || {
        format!("mixed:5x10 produced {} traces", mixed.outcome.traces.len())
    })?;
    ensure(mixed.conversations.iter().all(|c| c.len() == 21), || {
        "mixed round conversation length".into()
    })?;
    let feedback = engine
        .run(&task, StrategySpec::Feedback { max_steps: 10 }, ctx)
        .map_err(|e| e.to_string())?;
    let len = feedback.conversations[0].len();
    ensure(len == 21, || format!("feedback:10 conversation has {len} messages"))?;
    Ok("mixed:5x10 → 50 traces, feedback:10 → 21 messages".into())
}

// 6 ---------------------------------------------------------------------------

fn copy_fixture() -> Result<tempfile::TempDir, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for entry in std::fs::read_dir(fixture_dir()).map_err(|e| e.to_string())? {
        let entry = entry.map_err(|e| e.to_string())?;
        let name = entry.file_name();
        if name.to_string_lossy().contains(".annotated.") {
            continue;
        }
        std::fs::copy(entry.path(), dir.path().join(name)).map_err(|e| e.to_string())?;
    }
    Ok(dir)
}

fn specloop(dir: &Path, args: &[&str]) -> Result<std::process::Output, String> {
    Command::new(env!("CARGO_BIN_EXE_specloop"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())
}

fn listing1_end_to_end() -> Check {
    let dir = copy_fixture()?;
    let out = specloop(
        dir.path(),
        &[
            "annotate",
            "Listing1.java",
            "--strategy",
            "feedback:10",
            "--config",
            "config.toml",
            "--gap-hint",
            "g",
        ],
    )?;
    ensure(out.status.code() == Some(0), || {
        format!("exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr))
    })?;
    let written = std::fs::read_to_string(dir.path().join("Listing1.annotated.java")).map_err(|e| e.to_string())?;
    let lines: Vec<&str> = written.lines().collect();
    let g = lines
        .iter()
        .position(|l| l.trim_start().starts_with("int g(int x)"))
        .ok_or("no g declaration in output")?;
    ensure(
        g > 0 && lines[g - 1].contains("normal_behavior") && lines[g - 1].contains("\\result == 2*x"),
        || format!("line above g is {:?}", lines.get(g.wrapping_sub(1))),
    )?;
    let original: Vec<&str> = LISTING1.lines().collect();
    let mut without: Vec<&str> = lines.clone();
    without.remove(g - 1);
    ensure(without == original, || {
        "output differs from input beyond the splice".into()
    })?;
    Ok(format!("exit 0, contract spliced above g at line {g}"))
}

// 7 ---------------------------------------------------------------------------

fn record(task: &str, strategy: StrategySpec, run: u32, solved_at: Option<u32>, ratio: Option<f64>) -> RunRecord {
    let mut outcome = Outcome::unsolved_with_cause("");
    outcome.cause = None;
    outcome.solved = solved_at.is_some();
    outcome.solving_candidate_index = solved_at;
    outcome.token_ratio = ratio;
    RunRecord {
        task_id: task.into(),
        kind: GapKind::Invariant,
        strategy,
        run_index: run,
        seed: 0,
        outcome,
        started_at_ms: 0,
        finished_at_ms: 0,
    }
}

fn curve_correctness() -> Check {
    let s = StrategySpec::Feedback { max_steps: 3 };
    // task a solved by its second candidate, task b never
    let fixture = vec![record("a", s, 0, Some(2), Some(2.6)), record("b", s, 0, None, None)];
    let curve = curve_success_vs_steps(&fixture, s, GapKind::Invariant, 3).map_err(|e| e.to_string())?;
    let medians: Vec<f64> = curve.points.iter().map(|p| p.median).collect();
    ensure(medians == [0.0, 0.5, 0.5], || format!("rates {medians:?}"))?;

    let gen = proptest::collection::vec(
        (0u32..8, 0u32..5, proptest::option::of((1u32..=10, 1.0f64..30.0))),
        1..80,
    );
    let mut runner = TestRunner::new(PropConfig {
        cases: 256,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let s10 = StrategySpec::Feedback { max_steps: 10 };
    runner
        .run(&gen, |rows| {
            let mut seen = HashSet::new();
            let records: Vec<RunRecord> = rows
                .into_iter()
                .filter(|(t, r, _)| seen.insert((*t, *r)))
                .map(|(t, r, hit)| record(&format!("t{t}"), s10, r, hit.map(|h| h.0), hit.map(|h| h.1)))
                .collect();
            let steps = curve_success_vs_steps(&records, s10, GapKind::Invariant, 10).unwrap();
            let ratio = curve_success_vs_token_ratio(&records, s10, GapKind::Invariant, 14.0).unwrap();
            for c in [&steps, &ratio] {
                for w in c.points.windows(2) {
                    prop_assert!(w[0].min <= w[1].min && w[0].median <= w[1].median && w[0].max <= w[1].max);
                }
                for p in &c.points {
                    prop_assert!(p.min <= p.median && p.median <= p.max);
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("fixture rates [0.0, 0.5, 0.5]; 256 random logs monotone with min ≤ median ≤ max".into())
}

// 8 ---------------------------------------------------------------------------

fn strip_timestamps(log: &str) -> Result<Vec<serde_json::Value>, String> {
    log.lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).map_err(|e| e.to_string())?;
            if let Some(obj) = v.as_object_mut() {
                obj.remove("started_at_ms");
                obj.remove("finished_at_ms");
            }
            Ok(v)
        })
        .collect()
}

fn run_and_report(dir: &Path, tag: &str) -> Result<(String, BTreeMap<String, Vec<u8>>), String> {
    let log = format!("runs_{tag}.jsonl");
    let out = specloop(
        dir,
        &[
            "bench",
            "run",
            "--manifest",
            "manifest.json",
            "--strategies",
            "sampling:3,feedback:3,mixed:2x2",
            "--runs",
            "3",
            "--out",
            &log,
            "--config",
            "config.toml",
            "--seed",
            "11",
            "--parallelism",
            "4",
        ],
    )?;
    ensure(out.status.success(), || {
        format!("bench run: {}", String::from_utf8_lossy(&out.stderr))
    })?;
    let report_dir = format!("report_{tag}");
    let out = specloop(
        dir,
        &[
            "bench",
            "report",
            "--log",
            &log,
            "--curve",
            "steps",
            "--curve",
            "token-ratio",
            "--max-ratio",
            "14",
            "--table",
            "mixed",
            "--out-dir",
            &report_dir,
        ],
    )?;
    ensure(out.status.success(), || {
        format!("bench report: {}", String::from_utf8_lossy(&out.stderr))
    })?;
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir.join(&report_dir)).map_err(|e| e.to_string())? {
        let entry = entry.map_err(|e| e.to_string())?;
        files.insert(
            entry.file_name().to_string_lossy().into_owned(),
            std::fs::read(entry.path()).map_err(|e| e.to_string())?,
        );
    }
    let log_text = std::fs::read_to_string(dir.join(&log)).map_err(|e| e.to_string())?;
    Ok((log_text, files))
}

fn replay_determinism() -> Check {
    let dir = copy_fixture()?;
    let (log_a, rep_a) = run_and_report(dir.path(), "a")?;
    let (log_b, rep_b) = run_and_report(dir.path(), "b")?;
    let (a, b) = (strip_timestamps(&log_a)?, strip_timestamps(&log_b)?);
    ensure(a.len() == 1 + 2 * 3 * 3, || format!("{} log lines", a.len()))?;
    ensure(a == b, || "run logs differ beyond timestamps".into())?;
    ensure(rep_a.len() == 3, || format!("{} report files", rep_a.len()))?;
    ensure(rep_a == rep_b, || "reports differ between runs".into())?;
    Ok(format!(
        "{} records identical; {} report files byte-identical",
        a.len() - 1,
        rep_a.len()
    ))
}

// 9 ---------------------------------------------------------------------------

const PINNED: [(&str, &str); 8] = [
    (
        "invariant/system",
        "d2ea49efeaed1b98c878f2b838c7a37d0d4341adaad2919427b6bbdc95c2156a",
    ),
    (
        "invariant/initial",
        "6c75fd1fe26d6220cc033cef0cd3233c24b01c08f088a9da81b5332d729b5662",
    ),
    (
        "invariant/feedback_syntax",
        "c3e7f1fab062769033351ea883a63e38872c9756c27b2dfc390d8bbd5327a7ba",
    ),
    (
        "invariant/feedback_semantic",
        "2a04fe15f1021cb9d967a9407843573d37e937967da2828829817fbebde13f7a",
    ),
    (
        "contract/system",
        "d2ea49efeaed1b98c878f2b838c7a37d0d4341adaad2919427b6bbdc95c2156a",
    ),
    (
        "contract/initial",
        "a1f9cd784a314dd1b05efe2c049083f7923c9ecc763b83e93eeeb01995ebf60d",
    ),
    (
        "contract/feedback_syntax",
        "5e8f04c21672e3d40ead38a3e25d00a73f3eec94634514605d395d28240474ed",
    ),
    (
        "contract/feedback_semantic",
        "f7c53c79991807f86f60d326c1e2855e40522e55d9a22f4bd7cf0fac7ac1269a",
    ),
];

fn prompt_fidelity() -> Check {
    let prompts = PromptSet::bundled();
    let hashes = prompts.hashes();
    for (name, want) in PINNED {
        let on_disk = std::fs::read(prompts_dir().join(format!("{name}.txt"))).map_err(|e| e.to_string())?;
        ensure(sha256_hex(&on_disk) == want, || format!("{name}.txt hash drifted"))?;
        ensure(hashes.get(name).map(String::as_str) == Some(want), || {
            format!("bundled {name} hash")
        })?;
    }
    let template = |name: &str| std::fs::read_to_string(prompts_dir().join(format!("{name}.txt"))).unwrap();

    // system and initial prompts rendered for the listing fixture
    let doc = listing_doc();
    ensure(
        prompts.render_system(GapKind::Contract) == template("contract/system"),
        || "system".into(),
    )?;
    let initial = prompts
        .render_initial(GapKind::Contract, &doc)
        .map_err(|e| e.to_string())?;
    let expected = template("contract/initial")
        .replace("<partially annotated file>", LISTING1)
        .replace("<called method>", "g")
        .replace("<calling method>", "f");
    ensure(initial == expected, || "contract initial prompt".into())?;
    ensure(
        initial.contains("to the method 'g' such that the contract specified by 'f'"),
        || "contract initial prompt wording".into(),
    )?;

    let loop_src = "class C {\n  int sum(int[] a) {\n    int s = 0;\n    //Add invariant here\n    for (int i = 0; i < a.length; i++) s += a[i];\n    return s;\n  }\n}\n";
    let inv_doc = parse_document(loop_src, None).map_err(|e| e.to_string())?;
    let inv_initial = prompts
        .render_initial(GapKind::Invariant, &inv_doc)
        .map_err(|e| e.to_string())?;
    let expected = template("invariant/initial")
        .replace("<partially annotated file>", loop_src)
        .replace("<method name>", "sum");
    ensure(inv_initial == expected, || "invariant initial prompt".into())?;

    // feedback prompts
    let syntax = Verdict::syntax("Encountered \"=\" at line 3", "");
    let rendered = prompts
        .render_feedback(GapKind::Invariant, &syntax, Some("sum"))
        .map_err(|e| e.to_string())?;
    let expected = template("invariant/feedback_syntax").replace("<parser error>", "Encountered \"=\" at line 3");
    ensure(rendered == expected, || "invariant syntax feedback".into())?;

    let labels = [
        "Invariant Initially Valid",
        "Body Preserves Invariant",
        "Use Case",
        "Post (...)",
    ];
    let mut supplied: Vec<String> = labels.iter().map(|s| s.to_string()).collect();
    supplied.extend(labels.iter().map(|s| s.to_string()));
    let semantic = Verdict::semantic(supplied, Some("sum".into()), "").unwrap();
    for kind in GapKind::ALL {
        let text = prompts
            .render_feedback(kind, &semantic, Some("sum"))
            .map_err(|e| e.to_string())?;
        for label in labels {
            let n = text.matches(label).count();
            ensure(n == 1, || format!("{kind} feedback contains {label:?} {n} times"))?;
        }
    }
    Ok("8 template hashes pinned; rendered prompts match; 4 labels once each".into())
}

// 10 --------------------------------------------------------------------------

const LOOP_TEMPLATE: &str = "class Sum{N} {\n  int sum(int[] a) {\n    int s = 0;\n    //Add invariant here\n    for (int i = 0; i < a.length; i++) s += a[i] * {N};\n    return s;\n  }\n}\n";
const CALL_TEMPLATE: &str =
    "//@ ensures \\result == -2*x + {N};\nint f(int x) { return g(-x) + {N}; }\nint g(int x) { return x+x; }\n";

fn sampling_vs_feedback_curves() -> Check {
    let mut tasks = Vec::new();
    let mut profiles = BTreeMap::new();
    for n in 0..30u32 {
        let (kind, src, hint, target) = if n % 2 == 0 {
            (GapKind::Invariant, LOOP_TEMPLATE, None, "sum")
        } else {
            (GapKind::Contract, CALL_TEMPLATE, Some("g"), "f")
        };
        let text = src.replace("{N}", &n.to_string());
        let doc = parse_document(&text, hint).map_err(|e| e.to_string())?;
        let id = format!("syn{n:02}");
        let correct = match kind {
            GapKind::Invariant => "/*@ loop_invariant 0 <= i && i <= a.length; decreases a.length - i; @*/".to_string(),
            GapKind::Contract => CORRECT_G.to_string(),
        };
        // per-task success probability spread over [0.05, 0.6]
        let p = 0.05 + 0.55 * (n as f64 / 29.0);
        let mut profile = stochastic_profile(p, 0.6);
        profile.correct_answer = correct;
        profiles.insert(id.clone(), profile);
        tasks.push(LoadedTask {
            spec: SpecTask {
                id,
                source_path: format!("syn{n}.java").into(),
                kind,
                gap_hint: hint.map(Into::into),
                target_method: None,
                tags: vec!["synthetic".into()],
            },
            doc,
            target: target.into(),
        });
    }
    let oracle = StochasticOracle::new(StochasticOracleConfig {
        seed: 5,
        default: None,
        tasks: profiles,
    })
    .map_err(|e| e.to_string())?;
    let verifier = MockVerifier::new(vec![
        MockRule::new(RuleMatch::Exact(CORRECT_G.into()), Verdict::success("")),
        MockRule::new(
            RuleMatch::Contains("loop_invariant 0 <= i && i <= a.length;".into()),
            Verdict::success(""),
        ),
    ])
    .unwrap();
    let prompts = PromptSet::bundled();
    let engine = Engine::new(&oracle, &verifier, &prompts);
    let sampling = StrategySpec::Sampling { max_samples: 10 };
    let feedback = StrategySpec::Feedback { max_steps: 10 };
    let config = MatrixConfig {
        runs: 5,
        seed: 42,
        parallelism: 4,
    };
    let mut records = Vec::new();
    run_matrix(&engine, &tasks, &[sampling, feedback], &config, &HashSet::new(), |r| {
        records.push(r.clone());
        Ok(())
    })
    .map_err(|e| e.to_string())?;

    let mut notes = Vec::new();
    for kind in GapKind::ALL {
        for spec in [sampling, feedback] {
            let c = curve_success_vs_steps(&records, spec, kind, 10).map_err(|e| e.to_string())?;
            ensure(c.points.windows(2).all(|w| w[0].median <= w[1].median), || {
                format!("{spec} {kind} step curve decreases")
            })?;
        }
        let rs = curve_success_vs_token_ratio(&records, sampling, kind, 14.0).map_err(|e| e.to_string())?;
        let rf = curve_success_vs_token_ratio(&records, feedback, kind, 14.0).map_err(|e| e.to_string())?;
        for (ps, pf) in rs.points.iter().zip(&rf.points).filter(|(p, _)| p.x <= 3.0 + 1e-9) {
            ensure(ps.median >= pf.median, || {
                format!(
                    "{kind}: at ratio {:.1} sampling median {:.3} < feedback median {:.3}",
                    ps.x, ps.median, pf.median
                )
            })?;
        }
        let at3 = |c: &specloop_core::bench::Curve| c.points.iter().find(|p| (p.x - 3.0).abs() < 1e-9).unwrap().median;
        notes.push(format!(
            "{kind} at t=3: sampling {:.2} ≥ feedback {:.2}",
            at3(&rs),
            at3(&rf)
        ));
    }
    Ok(notes.join("; "))
}

// -----------------------------------------------------------------------------

fn main() {
    let criteria: [Criterion; 10] = [
        ("cost-model exactness", Duration::from_secs(1), cost_model_exactness),
        (
            "measured vs predicted tokens",
            Duration::from_secs(5),
            measured_vs_predicted,
        ),
        (
            "geometric sampling law",
            Duration::from_secs(30),
            geometric_sampling_law,
        ),
        (
            "degenerate strategy equivalences",
            Duration::from_secs(5),
            degenerate_equivalences,
        ),
        ("budget law", Duration::from_secs(5), budget_law),
        (
            "listing fixture end to end",
            Duration::from_secs(5),
            listing1_end_to_end,
        ),
        ("curve correctness", Duration::from_secs(10), curve_correctness),
        ("replay determinism", Duration::from_secs(30), replay_determinism),
        ("prompt fidelity", Duration::from_secs(1), prompt_fidelity),
        (
            "qualitative sampling vs feedback curves",
            Duration::from_secs(120),
            sampling_vs_feedback_curves,
        ),
    ];
    let mut failed = 0;
    for (name, limit, check) in criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        let elapsed = start.elapsed();
        let result = match result {
            Ok(detail) if elapsed > limit => Err(format!("{detail}; took {elapsed:.2?}, limit {limit:?}")),
            other => other,
        };
        match result {
            Ok(detail) => println!("PASS  {name} ({elapsed:.2?}): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name} ({elapsed:.2?}): {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
