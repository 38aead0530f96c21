//! Aggregation of run records and merged comparison tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::{read_run_csv, RunRecord};

/// A (game, seed) cell dropped from the aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedRun {
    pub game_id: usize,
    pub seed: u64,
    pub reason: String,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-step statistics of one learner over all (game, seed) runs.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateReport {
    pub learner: String,
    pub fingerprint: String,
    pub steps: Vec<u64>,
    pub mean_return: Vec<f64>,
    pub std_return: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub runs: Vec<RunRecord>,
    pub excluded: Vec<ExcludedRun>,
}

pub const AGGREGATE_CSV_HEADER: [&str; 9] = [
    "learner",
    "step",
    "n_runs",
    "mean_return",
    "std_return",
    "mean_normalized_return",
    "std_normalized_return",
    "min_normalized_return",
    "max_normalized_return",
];

/// Combines runs that share one evaluation grid.
pub fn aggregate(
    learner: &str,
    fingerprint: &str,
    runs: Vec<RunRecord>,
    excluded: Vec<ExcludedRun>,
) -> Result<AggregateReport> {
    let first = runs.first().ok_or_else(|| Error::invalid("no runs to aggregate"))?;
    let steps = first.steps();
    let offending: Vec<String> = runs
        .iter()
        .filter(|r| r.steps() != steps)
        .map(|r| format!("game {} seed {}", r.game_id, r.seed))
        .collect();
    if !offending.is_empty() {
        return Err(Error::GridMismatch(offending));
    }
    let mut report = AggregateReport {
        learner: learner.to_string(),
        fingerprint: fingerprint.to_string(),
        steps: steps.clone(),
        mean_return: Vec::new(),
        std_return: Vec::new(),
        mean: Vec::new(),
        std: Vec::new(),
        min: Vec::new(),
        max: Vec::new(),
        runs: Vec::new(),
        excluded,
    };
    for i in 0..steps.len() {
        let rets: Vec<f64> = runs.iter().map(|r| r.points[i].ret).collect();
        let norms: Vec<f64> = runs.iter().map(|r| r.points[i].normalized_return).collect();
        let (m, s) = mean_std(&rets);
        report.mean_return.push(m);
        report.std_return.push(s);
        let (m, s) = mean_std(&norms);
        report.mean.push(m);
        report.std.push(s);
        report.min.push(norms.iter().copied().fold(f64::INFINITY, f64::min));
        report.max.push(norms.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    report.runs = runs;
    Ok(report)
}

impl AggregateReport {
    /// Mean normalized return at the last evaluation point.
    pub fn final_mean(&self) -> f64 {
        *self.mean.last().expect("aggregate has at least one step")
    }

    pub fn final_std(&self) -> f64 {
        *self.std.last().expect("aggregate has at least one step")
    }

    pub fn final_mean_return(&self) -> f64 {
        *self.mean_return.last().expect("aggregate has at least one step")
    }

    /// Final normalized return of every run, in (game, seed) order.
    pub fn final_values(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.last().unwrap().normalized_return).collect()
    }

    /// First evaluation step at which the mean normalized return reaches
    /// `level`.
    pub fn steps_to_reach(&self, level: f64) -> Option<u64> {
        self.steps.iter().zip(&self.mean).find(|(_, &m)| m >= level).map(|(&s, _)| s)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(AGGREGATE_CSV_HEADER)?;
        for i in 0..self.steps.len() {
            w.write_record([
                self.learner.clone(),
                self.steps[i].to_string(),
                self.runs.len().to_string(),
                self.mean_return[i].to_string(),
                self.std_return[i].to_string(),
                self.mean[i].to_string(),
                self.std[i].to_string(),
                self.min[i].to_string(),
                self.max[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn write_excluded_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["game_id", "seed", "reason"])?;
        for x in &self.excluded {
            w.write_record([x.game_id.to_string(), x.seed.to_string(), x.reason.clone()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// One-line human summary.
    pub fn summary(&self) -> String {
        format!(
            "{}: final normalized return {:.4} ± {:.4} over {} runs ({} excluded)",
            self.learner,
            self.final_mean(),
            self.final_std(),
            self.runs.len(),
            self.excluded.len()
        )
    }
}

/// One merged (learner, step) row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub learner: String,
    pub step: u64,
    pub n_runs: usize,
    pub mean_return: f64,
    pub std_return: f64,
    pub mean_normalized_return: f64,
    pub std_normalized_return: f64,
}

/// Merged view of several run CSVs.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        if self.rows.is_empty() {
            w.write_record([
                "learner",
                "step",
                "n_runs",
                "mean_return",
                "std_return",
                "mean_normalized_return",
                "std_normalized_return",
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    /// Fixed-width text table.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{:<16} {:>10} {:>6} {:>22} {:>22}\n",
            "learner", "step", "runs", "return", "normalized"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<16} {:>10} {:>6} {:>22} {:>22}",
                r.learner,
                r.step,
                r.n_runs,
                format!("{:.4} ± {:.4}", r.mean_return, r.std_return),
                format!("{:.4} ± {:.4}", r.mean_normalized_return, r.std_normalized_return),
            );
        }
        s
    }
}

/// Merges run CSVs into mean ± std per (learner, step). All files of one
/// learner must share the same evaluation grid.
pub fn report<P: AsRef<Path>>(paths: &[P]) -> Result<ComparisonTable> {
    if paths.is_empty() {
        return Err(Error::invalid("report needs at least one CSV"));
    }
    // learner -> (grid, per-step (returns, normalized)), in first-seen order.
    let mut order: Vec<String> = Vec::new();
    let mut grids: BTreeMap<String, (PathBuf, Vec<u64>)> = BTreeMap::new();
    let mut values: BTreeMap<String, Vec<(Vec<f64>, Vec<f64>)>> = BTreeMap::new();
    let mut offending: Vec<String> = Vec::new();

    for path in paths {
        let path = path.as_ref();
        let rows = read_run_csv(std::fs::File::open(path)?)?;
        let mut by_learner: BTreeMap<String, Vec<(u64, f64, f64)>> = BTreeMap::new();
        let mut seen: Vec<String> = Vec::new();
        for r in rows {
            if !by_learner.contains_key(&r.learner) {
                seen.push(r.learner.clone());
            }
            by_learner
                .entry(r.learner.clone())
                .or_default()
                .push((r.step, r.ret, r.normalized_return));
        }
        for learner in seen {
            let points = &by_learner[&learner];
            let grid: Vec<u64> = points.iter().map(|p| p.0).collect();
            match grids.get(&learner) {
                None => {
                    order.push(learner.clone());
                    grids.insert(learner.clone(), (path.to_path_buf(), grid.clone()));
                    values.insert(learner.clone(), vec![(Vec::new(), Vec::new()); grid.len()]);
                }
                Some((first, g)) if *g != grid => {
                    let first = first.display().to_string();
                    if !offending.contains(&first) {
                        offending.push(first);
                    }
                    offending.push(path.display().to_string());
                    continue;
                }
                Some(_) => {}
            }
            let slots = values.get_mut(&learner).unwrap();
            for (slot, p) in slots.iter_mut().zip(points) {
                slot.0.push(p.1);
                slot.1.push(p.2);
            }
        }
    }
    if !offending.is_empty() {
        return Err(Error::GridMismatch(offending));
    }

    let mut rows = Vec::new();
    for learner in order {
        let grid = &grids[&learner].1;
        for (step, (rets, norms)) in grid.iter().zip(&values[&learner]) {
            let (mean_return, std_return) = mean_std(rets);
            let (mean_norm, std_norm) = mean_std(norms);
            rows.push(ComparisonRow {
                learner: learner.clone(),
                step: *step,
                n_runs: rets.len(),
                mean_return,
                std_return,
                mean_normalized_return: mean_norm,
                std_normalized_return: std_norm,
            });
        }
    }
    Ok(ComparisonTable { rows })
}
