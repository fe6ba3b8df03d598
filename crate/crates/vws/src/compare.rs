//! Metric-by-metric comparison of two recipe runs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::report::{num, Summary, Table};

#[derive(Debug, Error)]
pub enum CompareError {
    #[error("runs are of different recipes: {a} vs {b}")]
    RecipeMismatch { a: String, b: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricDiff {
    pub name: String,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub rel_diff: f64,
    pub randomized: bool,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub recipe: String,
    pub tolerance: f64,
    pub metrics: Vec<MetricDiff>,
    /// Assertions whose pass/fail outcome differs between the runs.
    pub changed_assertions: Vec<String>,
}

impl CompareReport {
    pub fn regressions(&self) -> usize {
        self.metrics.iter().filter(|m| m.flagged).count() + self.changed_assertions.len()
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new("compare", &["metric", "a", "b", "rel_diff", "randomized", "flagged"]);
        let cell = |v: Option<f64>| v.map(num).unwrap_or_default();
        for m in &self.metrics {
            t.push(vec![
                m.name.clone(),
                cell(m.a),
                cell(m.b),
                num(m.rel_diff),
                m.randomized.to_string(),
                m.flagged.to_string(),
            ]);
        }
        t
    }
}

/// `|a - b| / max(|a|, |b|)`, zero for identical values (including both NaN).
pub fn relative_difference(a: f64, b: f64) -> f64 {
    if a == b || (a.is_nan() && b.is_nan()) {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Compares `summary.json` of two run directories. Deterministic metrics
/// differing by more than `tol` and metrics present in only one run are flagged;
/// seed-dependent metrics are reported but not flagged.
pub fn compare_runs(dir_a: &Path, dir_b: &Path, tol: f64) -> anyhow::Result<CompareReport> {
    let a = Summary::load(dir_a)?;
    let b = Summary::load(dir_b)?;
    if a.recipe != b.recipe {
        return Err(CompareError::RecipeMismatch {
            a: a.recipe.name().into(),
            b: b.recipe.name().into(),
        }
        .into());
    }
    let mut merged: BTreeMap<&str, (Option<f64>, Option<f64>, bool)> = BTreeMap::new();
    for m in &a.metrics {
        merged.insert(&m.name, (Some(m.value), None, m.randomized));
    }
    for m in &b.metrics {
        let e = merged.entry(&m.name).or_insert((None, None, m.randomized));
        e.1 = Some(m.value);
        e.2 |= m.randomized;
    }
    let metrics = merged
        .into_iter()
        .map(|(name, (va, vb, randomized))| {
            let (rel_diff, flagged) = match (va, vb) {
                (Some(x), Some(y)) => {
                    let d = relative_difference(x, y);
                    (d, !randomized && !(d <= tol))
                }
                _ => (f64::INFINITY, true),
            };
            MetricDiff {
                name: name.to_string(),
                a: va,
                b: vb,
                rel_diff,
                randomized,
                flagged,
            }
        })
        .collect();
    let outcomes: BTreeMap<&str, bool> = b.assertions.iter().map(|x| (x.name.as_str(), x.passed)).collect();
    let changed_assertions = a
        .assertions
        .iter()
        .filter(|x| outcomes.get(x.name.as_str()) != Some(&x.passed))
        .map(|x| x.name.clone())
        .collect();
    Ok(CompareReport {
        recipe: a.recipe.name().into(),
        tolerance: tol,
        metrics,
        changed_assertions,
    })
}
