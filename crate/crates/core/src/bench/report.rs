use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use super::log::RunRecord;
use super::BenchError;
use crate::source_model::GapKind;
use crate::strategy::StrategySpec;

/// Arms picked when several sampling or mixed configurations share a log.
pub const PREFERRED_SAMPLING: StrategySpec = StrategySpec::Sampling { max_samples: 50 };
pub const PREFERRED_MIXED: StrategySpec = StrategySpec::Mixed {
    rounds: 5,
    steps_per_round: 10,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArmSummary {
    pub category: GapKind,
    pub arm: StrategySpec,
    /// Tasks solved in at least one run.
    pub solved: usize,
    pub total: usize,
    /// Solved by this arm and never by the other.
    pub exclusive_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArmComparison {
    pub sampling: StrategySpec,
    pub mixed: StrategySpec,
    pub rows: Vec<ArmSummary>,
}

fn pick_arm(records: &[RunRecord], family: &str, preferred: StrategySpec) -> Result<StrategySpec, BenchError> {
    let arms: BTreeSet<StrategySpec> = records
        .iter()
        .map(|r| r.strategy)
        .filter(|s| s.family() == family)
        .collect();
    if arms.contains(&preferred) {
        return Ok(preferred);
    }
    let mut it = arms.iter();
    match (it.next(), it.next()) {
        (Some(&only), None) => Ok(only),
        (None, _) => Err(BenchError::ArmMissing(format!("no {family} runs in the log"))),
        (Some(_), Some(_)) => Err(BenchError::ArmMissing(format!(
            "several {family} arms in the log; name one explicitly"
        ))),
    }
}

/// Compare a mixed and a sampling arm, detecting both from the log.
pub fn report_mixed_vs_sampling(records: &[RunRecord]) -> Result<ArmComparison, BenchError> {
    let sampling = pick_arm(records, "sampling", PREFERRED_SAMPLING)?;
    let mixed = pick_arm(records, "mixed", PREFERRED_MIXED)?;
    compare_arms(records, sampling, mixed)
}

/// Per-category solved counts and exclusive solves of two arms. Rows are
/// ordered invariant before contract, sampling before mixed.
pub fn compare_arms(
    records: &[RunRecord],
    sampling: StrategySpec,
    mixed: StrategySpec,
) -> Result<ArmComparison, BenchError> {
    type Table<'a> = BTreeMap<(GapKind, StrategySpec), (BTreeSet<&'a str>, BTreeSet<&'a str>)>;
    let mut table: Table<'_> = BTreeMap::new();
    for arm in [sampling, mixed] {
        if !records.iter().any(|r| r.strategy == arm) {
            return Err(BenchError::ArmMissing(format!("no {arm} runs in the log")));
        }
    }
    for r in records.iter().filter(|r| r.strategy == sampling || r.strategy == mixed) {
        let (all, solved) = table.entry((r.kind, r.strategy)).or_default();
        all.insert(&r.task_id);
        if r.outcome.solved {
            solved.insert(&r.task_id);
        }
    }
    let empty = (BTreeSet::new(), BTreeSet::new());
    let mut rows = Vec::new();
    for category in GapKind::ALL {
        if !table.keys().any(|(k, _)| *k == category) {
            continue;
        }
        for (arm, other) in [(sampling, mixed), (mixed, sampling)] {
            let (all, solved) = table.get(&(category, arm)).unwrap_or(&empty);
            let other_solved = &table.get(&(category, other)).unwrap_or(&empty).1;
            rows.push(ArmSummary {
                category,
                arm,
                solved: solved.len(),
                total: all.len(),
                exclusive_ids: solved.difference(other_solved).map(|s| s.to_string()).collect(),
            });
        }
    }
    Ok(ArmComparison { sampling, mixed, rows })
}

pub const SUMMARY_CSV_HEADER: &str = "category,arm,solved,total,exclusive_ids";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

pub fn summary_to_csv(cmp: &ArmComparison) -> String {
    let mut out = String::from(SUMMARY_CSV_HEADER);
    out.push('\n');
    for row in &cmp.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            row.category,
            row.arm,
            row.solved,
            row.total,
            csv_field(&row.exclusive_ids.join(";"))
        );
    }
    out
}
