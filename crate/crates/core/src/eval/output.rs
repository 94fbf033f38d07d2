//! Result files: per-trial CSV, path-trace JSON and comparison-report JSON.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::stats::{mean, one_tailed_test, std_error, StatTest};
use super::{ComparisonReport, PairwiseTest, PlannerSummary, TrialRecord};
use crate::error::{Error, Result};
use crate::planners::PlannerKind;

pub const CSV_HEADER: &str = "trial,seed,planner,budget,final_error,path_cost,mean_action_time_s";

/// One CSV line. An empty `mean_action_time_s` means no timing was taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub trial: usize,
    pub seed: u64,
    pub planner: String,
    pub budget: f64,
    pub final_error: f64,
    pub path_cost: f64,
    pub mean_action_time_s: Option<f64>,
}

impl From<&TrialRecord> for CsvRow {
    fn from(r: &TrialRecord) -> Self {
        CsvRow {
            trial: r.trial,
            seed: r.seed,
            planner: r.planner.name().to_string(),
            budget: r.budget,
            final_error: r.final_error,
            path_cost: r.path_cost,
            mean_action_time_s: r.mean_action_time(),
        }
    }
}

pub fn write_records_csv(path: &Path, records: &[TrialRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(CsvRow::from(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        offset: 0,
        message: e.to_string(),
    })?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            offset: 0,
            message: format!("unexpected header {:?}", header.join(",")),
        });
    }
    r.deserialize()
        .map(|row| {
            row.map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                offset: e.position().map_or(0, |p| p.byte()),
                message: e.to_string(),
            })
        })
        .collect()
}

/// Builds the comparison report from CSV rows. Planner order follows first
/// appearance; the reference is `nmpse` when present, otherwise the first
/// planner.
pub fn report_from_rows(rows: &[CsvRow], test: StatTest, alpha: f64) -> ComparisonReport {
    let mut order: Vec<&str> = Vec::new();
    let mut errors: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut times: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in rows {
        if !order.contains(&r.planner.as_str()) {
            order.push(&r.planner);
        }
        errors.entry(&r.planner).or_default().push(r.final_error);
        if let Some(t) = r.mean_action_time_s {
            times.entry(&r.planner).or_default().push(t);
        }
    }
    let planners = order
        .iter()
        .map(|p| {
            let e = &errors[p];
            PlannerSummary {
                planner: p.to_string(),
                n: e.len(),
                mre: mean(e),
                std_error: std_error(e),
                mean_action_time_s: times.get(p).map(|t| mean(t)),
            }
        })
        .collect();
    let reference = order
        .iter()
        .copied()
        .find(|p| *p == PlannerKind::Nmpse.name())
        .or(order.first().copied());
    let comparisons = match reference {
        None => Vec::new(),
        Some(rf) => order
            .iter()
            .filter(|p| **p != rf)
            .map(|other| match one_tailed_test(test, &errors[rf], &errors[other]) {
                Ok(r) => PairwiseTest {
                    reference: rf.to_string(),
                    other: other.to_string(),
                    t: r.t.is_finite().then_some(r.t),
                    p: Some(r.p),
                    df: Some(r.df),
                    significant: r.p < alpha,
                    note: (!r.t.is_finite()).then(|| "zero variance in both samples".to_string()),
                },
                Err(e) => PairwiseTest {
                    reference: rf.to_string(),
                    other: other.to_string(),
                    t: None,
                    p: None,
                    df: None,
                    significant: false,
                    note: Some(e.to_string()),
                },
            })
            .collect(),
    };
    ComparisonReport {
        label: None,
        test,
        alpha,
        planners,
        comparisons,
    }
}

pub fn report_from_csv(path: &Path, test: StatTest, alpha: f64) -> Result<ComparisonReport> {
    Ok(report_from_rows(&read_records_csv(path)?, test, alpha))
}

pub fn write_report_json(path: &Path, report: &ComparisonReport) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(report)? + "\n")?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub cell_row: usize,
    pub cell_col: usize,
    /// Move into this cell; `null` at the start and for multi-move legs.
    pub action: Option<String>,
}

pub fn trace_json(record: &TrialRecord) -> Result<String> {
    let steps: Vec<TraceStep> = record
        .cells
        .iter()
        .zip(&record.actions)
        .enumerate()
        .map(|(step, (c, a))| TraceStep {
            step,
            cell_row: c.row,
            cell_col: c.col,
            action: a.map(|a| a.to_string()),
        })
        .collect();
    Ok(serde_json::to_string_pretty(&steps)? + "\n")
}

/// Writes `trial_<id>_<planner>.json` per record into `dir`.
pub fn write_traces(dir: &Path, records: &[TrialRecord]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    records
        .iter()
        .map(|r| {
            let p = dir.join(format!("trial_{:03}_{}.json", r.trial, r.planner));
            fs::write(&p, trace_json(r)?)?;
            Ok(p)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{ExplorationAction, GridCell};

    fn rec(trial: usize, planner: PlannerKind, err: f64, times: Vec<f64>) -> TrialRecord {
        TrialRecord {
            trial,
            seed: 1000 + trial as u64,
            planner,
            budget: 3.0,
            start: GridCell::new(0, 0),
            cells: vec![GridCell::new(0, 0), GridCell::new(0, 1), GridCell::new(1, 2)],
            actions: vec![None, Some(ExplorationAction::E), Some(ExplorationAction::SE)],
            final_error: err,
            path_cost: 20.0,
            action_times: times,
        }
    }

    fn records() -> Vec<TrialRecord> {
        let mut v = Vec::new();
        for t in 0..4 {
            v.push(rec(t, PlannerKind::Nmpse, 1.0 + 0.1 * t as f64 / 3.0, vec![0.1, 0.3]));
            v.push(rec(t, PlannerKind::Random, 2.0 + 0.7 * t as f64, vec![]));
        }
        v
    }

    #[test]
    fn csv_round_trip_gives_identical_report() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        let recs = records();
        write_records_csv(&p, &recs).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(text.lines().count(), 9);
        assert!(text.lines().nth(2).unwrap().ends_with(','));
        let from_csv = report_from_csv(&p, StatTest::Welch, 0.05).unwrap();
        assert_eq!(from_csv, super::super::report(&recs, StatTest::Welch, 0.05));
        let s = from_csv.summary("nmpse").unwrap();
        assert!((s.mean_action_time_s.unwrap() - 0.2).abs() < 1e-15);
        assert!(from_csv.comparison("random").unwrap().significant);
    }

    #[test]
    fn bad_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        fs::write(&p, "a,b\n1,2\n").unwrap();
        assert!(matches!(read_records_csv(&p), Err(Error::Parse { .. })));
    }

    #[test]
    fn trace_lists_steps() {
        let json = trace_json(&rec(0, PlannerKind::Nmpse, 1.0, vec![])).unwrap();
        let steps: Vec<TraceStep> = serde_json::from_str(&json).unwrap();
        assert_eq!(steps.len(), 3);
        assert_eq!(steps[2].action.as_deref(), Some("SE"));
        assert_eq!((steps[2].cell_row, steps[2].cell_col), (1, 2));
        assert_eq!(steps[0].action, None);
    }

    #[test]
    fn degenerate_pairs_are_noted() {
        let recs: Vec<_> = (0..3)
            .flat_map(|t| [rec(t, PlannerKind::Nmpse, 0.0, vec![]), rec(t, PlannerKind::Fixed, 0.0, vec![])])
            .collect();
        let rep = super::super::report(&recs, StatTest::Welch, 0.05);
        let c = rep.comparison("fixed").unwrap();
        assert!(c.p.is_none() && !c.significant && c.note.is_some());
    }
}
