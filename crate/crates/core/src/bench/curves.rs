use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use super::log::RunRecord;
use super::BenchError;
use crate::source_model::GapKind;
use crate::strategy::StrategySpec;

/// Token-ratio grid points per unit ratio.
pub const RATIO_GRID_DIVISIONS: u32 = 10;
pub const DEFAULT_MAX_RATIO: f64 = 14.0;
const RATIO_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XAxis {
    Steps,
    TokenRatio,
}

impl XAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            XAxis::Steps => "steps",
            XAxis::TokenRatio => "token_ratio",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub x: f64,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub strategy: StrategySpec,
    pub kind: GapKind,
    pub x_axis: XAxis,
    pub points: Vec<CurvePoint>,
}

/// Median with the even-count convention of averaging the two central values.
pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Per-run outcome tables for one (strategy, kind) slice. Tasks absent from a
/// run count as unsolved in it.
struct Slice<'a> {
    tasks: BTreeSet<&'a str>,
    runs: BTreeMap<u32, BTreeMap<&'a str, &'a RunRecord>>,
}

impl<'a> Slice<'a> {
    fn new(records: &'a [RunRecord], strategy: StrategySpec, kind: GapKind) -> Result<Self, BenchError> {
        let mut tasks = BTreeSet::new();
        let mut runs: BTreeMap<u32, BTreeMap<&str, &RunRecord>> = BTreeMap::new();
        for r in records.iter().filter(|r| r.strategy == strategy && r.kind == kind) {
            tasks.insert(r.task_id.as_str());
            runs.entry(r.run_index).or_default().insert(&r.task_id, r);
        }
        if tasks.is_empty() {
            return Err(BenchError::NoData(format!("{strategy} on {kind} tasks")));
        }
        Ok(Slice { tasks, runs })
    }

    fn point(&self, x: f64, solved: impl Fn(&RunRecord) -> bool) -> CurvePoint {
        let total = self.tasks.len() as f64;
        let mut rates: Vec<f64> = self
            .runs
            .values()
            .map(|run| run.values().filter(|r| r.outcome.solved && solved(r)).count() as f64 / total)
            .collect();
        let m = median(&mut rates);
        CurvePoint {
            x,
            min: rates[0],
            median: m,
            max: rates[rates.len() - 1],
        }
    }
}

/// Fraction of tasks solved by candidate k (1-based), k = 1..=max_steps.
pub fn curve_success_vs_steps(
    records: &[RunRecord],
    strategy: StrategySpec,
    kind: GapKind,
    max_steps: u32,
) -> Result<Curve, BenchError> {
    let slice = Slice::new(records, strategy, kind)?;
    let points = (1..=max_steps)
        .map(|k| slice.point(k as f64, |r| r.outcome.solving_candidate_index.is_some_and(|i| i <= k)))
        .collect();
    Ok(Curve {
        strategy,
        kind,
        x_axis: XAxis::Steps,
        points,
    })
}

/// Fraction of tasks solved with token ratio at most t, on a 0.1 grid from 0
/// to `max_ratio`.
pub fn curve_success_vs_token_ratio(
    records: &[RunRecord],
    strategy: StrategySpec,
    kind: GapKind,
    max_ratio: f64,
) -> Result<Curve, BenchError> {
    let slice = Slice::new(records, strategy, kind)?;
    let last = (max_ratio * RATIO_GRID_DIVISIONS as f64).round().max(0.0) as u32;
    let points = (0..=last)
        .map(|i| {
            let t = i as f64 / RATIO_GRID_DIVISIONS as f64;
            slice.point(t, |r| r.outcome.token_ratio.is_some_and(|q| q <= t + RATIO_EPSILON))
        })
        .collect();
    Ok(Curve {
        strategy,
        kind,
        x_axis: XAxis::TokenRatio,
        points,
    })
}

/// Value of the curve at `x` (exact grid point), if present.
pub fn curve_at(curve: &Curve, x: f64) -> Option<&CurvePoint> {
    curve.points.iter().find(|p| (p.x - x).abs() < RATIO_EPSILON)
}

pub const CURVE_CSV_HEADER: &str = "strategy,kind,x_axis,x,min,median,max";

pub fn curves_to_csv(curves: &[Curve]) -> String {
    let mut out = String::from(CURVE_CSV_HEADER);
    out.push('\n');
    for c in curves {
        for p in &c.points {
            let x = match c.x_axis {
                XAxis::Steps => format!("{}", p.x as u64),
                XAxis::TokenRatio => format!("{:.1}", p.x),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{:.6},{:.6},{:.6}",
                c.strategy,
                c.kind,
                c.x_axis.as_str(),
                x,
                p.min,
                p.median,
                p.max
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategy::Outcome;
    use proptest::prelude::*;

    pub(crate) fn record(
        task: &str,
        strategy: StrategySpec,
        run: u32,
        solved_at: Option<u32>,
        ratio: Option<f64>,
    ) -> RunRecord {
        let mut outcome = Outcome::unsolved_with_cause("test");
        outcome.cause = None;
        outcome.solved = solved_at.is_some();
        outcome.solving_candidate_index = solved_at;
        outcome.token_ratio = ratio;
        RunRecord {
            task_id: task.into(),
            kind: GapKind::Contract,
            strategy,
            run_index: run,
            seed: 0,
            outcome,
            started_at_ms: 0,
            finished_at_ms: 0,
        }
    }

    #[test]
    fn two_task_fixture() {
        let s: StrategySpec = "feedback:3".parse().unwrap();
        let records = vec![record("a", s, 0, Some(2), Some(2.5)), record("b", s, 0, None, None)];
        let curve = curve_success_vs_steps(&records, s, GapKind::Contract, 3).unwrap();
        let medians: Vec<f64> = curve.points.iter().map(|p| p.median).collect();
        assert_eq!(medians, vec![0.0, 0.5, 0.5]);
        let ratio = curve_success_vs_token_ratio(&records, s, GapKind::Contract, 3.0).unwrap();
        assert_eq!(ratio.points.len(), 31);
        assert_eq!(curve_at(&ratio, 2.4).unwrap().median, 0.0);
        assert_eq!(curve_at(&ratio, 2.5).unwrap().median, 0.5);
        assert_eq!(curve_at(&ratio, 3.0).unwrap().median, 0.5);
    }

    #[test]
    fn min_median_max_over_runs() {
        let s: StrategySpec = "sampling:2".parse().unwrap();
        let mut records = Vec::new();
        // run r solves r of the 4 tasks at the first candidate
        for run in 0..4u32 {
            for t in 0..4u32 {
                let solved = (t < run).then_some(1);
                records.push(record(&format!("t{t}"), s, run, solved, solved.map(|_| 1.0)));
            }
        }
        let c = curve_success_vs_steps(&records, s, GapKind::Contract, 2).unwrap();
        let p = c.points[0];
        assert_eq!((p.min, p.median, p.max), (0.0, 0.375, 0.75));
    }

    #[test]
    fn no_data() {
        let s: StrategySpec = "feedback:3".parse().unwrap();
        assert!(matches!(
            curve_success_vs_steps(&[], s, GapKind::Invariant, 3),
            Err(BenchError::NoData(_))
        ));
    }

    #[test]
    fn csv_format() {
        let s: StrategySpec = "feedback:2".parse().unwrap();
        let records = vec![record("a", s, 0, Some(1), Some(1.0))];
        let c = curve_success_vs_steps(&records, s, GapKind::Contract, 2).unwrap();
        assert_eq!(
            curves_to_csv(&[c]),
            "strategy,kind,x_axis,x,min,median,max\n\
             feedback:2,contract,steps,1,1.000000,1.000000,1.000000\n\
             feedback:2,contract,steps,2,1.000000,1.000000,1.000000\n"
        );
    }

    fn arb_records() -> impl Strategy<Value = Vec<RunRecord>> {
        proptest::collection::vec(
            (0u32..6, 0u32..4, proptest::option::of((1u32..=10, 1.0f64..20.0))),
            1..60,
        )
        .prop_map(|rows| {
            let s: StrategySpec = "feedback:10".parse().unwrap();
            let mut seen = std::collections::HashSet::new();
            rows.into_iter()
                .filter(|(t, r, _)| seen.insert((*t, *r)))
                .map(|(t, r, hit)| record(&format!("t{t}"), s, r, hit.map(|h| h.0), hit.map(|h| h.1)))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn curves_are_monotone_and_bounded(records in arb_records()) {
            let s: StrategySpec = "feedback:10".parse().unwrap();
            let steps = curve_success_vs_steps(&records, s, GapKind::Contract, 10).unwrap();
            let ratio = curve_success_vs_token_ratio(&records, s, GapKind::Contract, 25.0).unwrap();
            for c in [&steps, &ratio] {
                for w in c.points.windows(2) {
                    prop_assert!(w[0].median <= w[1].median);
                    prop_assert!(w[0].min <= w[1].min && w[0].max <= w[1].max);
                }
                for p in &c.points {
                    prop_assert!(0.0 <= p.min && p.min <= p.median && p.median <= p.max && p.max <= 1.0);
                }
            }
            // both curves saturate at the overall solve rate
            let end_steps = steps.points.last().unwrap();
            let end_ratio = ratio.points.last().unwrap();
            prop_assert_eq!(end_steps.median, end_ratio.median);
        }
    }
}
