//! Recipe output: CSV tables, assertions, metrics and the JSON summary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Recipe};
use crate::plot::Plot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
    Within,
    Holds,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Within => "+-",
            Relation::Holds => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    #[serde(deserialize_with = "null_as_nan")]
    pub measured: f64,
    pub relation: Relation,
    #[serde(deserialize_with = "null_as_nan")]
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    #[serde(deserialize_with = "null_as_nan")]
    pub value: f64,
    /// Depends on the seed.
    pub randomized: bool,
}

/// JSON has no NaN; serde_json writes it as null.
fn null_as_nan<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Full-precision cell text.
pub fn num(v: f64) -> String {
    format!("{v:.10e}")
}

/// What a recipe produces before anything touches the disk.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub tables: Vec<Table>,
    pub plots: Vec<(String, Plot)>,
    pub assertions: Vec<Assertion>,
    pub metrics: Vec<Metric>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn at_most(&mut self, name: impl Into<String>, measured: f64, threshold: f64, detail: impl Into<String>) {
        self.assert(name, measured <= threshold, measured, Relation::AtMost, threshold, detail);
    }

    pub fn at_least(&mut self, name: impl Into<String>, measured: f64, threshold: f64, detail: impl Into<String>) {
        self.assert(name, measured >= threshold, measured, Relation::AtLeast, threshold, detail);
    }

    pub fn within(&mut self, name: impl Into<String>, measured: f64, target: f64, tol: f64, detail: impl Into<String>) {
        let d = detail.into();
        self.assert(
            name,
            (measured - target).abs() <= tol,
            measured,
            Relation::Within,
            tol,
            format!("target {target}; {d}"),
        );
    }

    pub fn holds(&mut self, name: impl Into<String>, ok: bool, detail: impl Into<String>) {
        self.assert(name, ok, f64::NAN, Relation::Holds, f64::NAN, detail);
    }

    fn assert(&mut self, name: impl Into<String>, passed: bool, measured: f64, relation: Relation, threshold: f64, detail: impl Into<String>) {
        self.assertions.push(Assertion {
            name: name.into(),
            passed,
            measured,
            relation,
            threshold,
            detail: detail.into(),
        });
    }

    pub fn metric(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.push(Metric {
            name: name.into(),
            value,
            randomized: false,
        });
    }

    pub fn random_metric(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.push(Metric {
            name: name.into(),
            value,
            randomized: true,
        });
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        log::warn!("{msg}");
        self.warnings.push(msg);
    }

    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub recipe: Recipe,
    pub passed: bool,
    pub config: ExperimentConfig,
    pub assertions: Vec<Assertion>,
    pub metrics: Vec<Metric>,
    pub tables: Vec<String>,
    pub plots: Vec<String>,
    pub warnings: Vec<String>,
    /// Informational only; never used in assertions.
    pub wall_time_s: f64,
}

impl Summary {
    pub fn load(dir: &Path) -> anyhow::Result<Self> {
        let path = dir.join(SUMMARY_FILE);
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn failed(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions.iter().filter(|a| !a.passed)
    }
}

pub const SUMMARY_FILE: &str = "summary.json";
pub const SUMMARY_TEXT: &str = "summary.txt";
pub const FAILURE_FILE: &str = "failure.json";

/// Machine-readable failure record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub recipe: Option<Recipe>,
    pub error: Option<String>,
    pub failed_assertions: Vec<Assertion>,
}

impl FailureRecord {
    pub fn write(&self, dir: &Path) -> anyhow::Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(FAILURE_FILE);
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }
}

/// Writes tables, plots, `summary.json` and `summary.txt`; sorts everything first
/// so output does not depend on case completion order.
pub fn write_report(config: &ExperimentConfig, mut report: Report, wall_time_s: f64) -> anyhow::Result<Summary> {
    let dir = &config.out;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let stale = dir.join(FAILURE_FILE);
    if stale.exists() {
        std::fs::remove_file(&stale)?;
    }
    report.metrics.sort_by(|a, b| a.name.cmp(&b.name));
    report.tables.sort_by(|a, b| a.name.cmp(&b.name));
    report.plots.sort_by(|a, b| a.0.cmp(&b.0));

    let mut tables = Vec::new();
    for t in &report.tables {
        let file = format!("{}.csv", t.name);
        t.write(&dir.join(&file))?;
        tables.push(file);
    }
    let mut plots = Vec::new();
    for (name, p) in &report.plots {
        let file = format!("{name}.svg");
        std::fs::write(dir.join(&file), p.to_svg())?;
        plots.push(file);
    }
    let summary = Summary {
        recipe: config.recipe,
        passed: report.passed(),
        config: config.clone(),
        assertions: report.assertions,
        metrics: report.metrics,
        tables,
        plots,
        warnings: report.warnings,
        wall_time_s,
    };
    std::fs::write(dir.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)?)?;
    std::fs::write(dir.join(SUMMARY_TEXT), render_text(&summary))?;
    if !summary.passed {
        FailureRecord {
            recipe: Some(summary.recipe),
            error: None,
            failed_assertions: summary.failed().cloned().collect(),
        }
        .write(dir)?;
    }
    Ok(summary)
}

pub fn render_text(s: &Summary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "recipe {}: {}", s.recipe.name(), if s.passed { "PASS" } else { "FAIL" });
    let _ = writeln!(
        out,
        "n={:?} eps={:?} T={} dt={} scheme={} seed={}",
        s.config.n,
        s.config.eps,
        s.config.t_final,
        s.config.dt,
        s.config.scheme.map(|x| format!("{x:?}").to_lowercase()).unwrap_or_else(|| "both".into()),
        s.config.seed
    );
    for a in &s.assertions {
        let value = if a.relation == Relation::Holds {
            String::new()
        } else {
            format!(" {:.4e} {} {:.4e}", a.measured, a.relation.symbol(), a.threshold)
        };
        let _ = writeln!(out, "  [{}] {}{}  {}", if a.passed { "ok" } else { "FAIL" }, a.name, value, a.detail);
    }
    for w in &s.warnings {
        let _ = writeln!(out, "  warning: {w}");
    }
    let _ = writeln!(out, "  tables: {}", s.tables.join(", "));
    let _ = writeln!(out, "  plots: {}", s.plots.join(", "));
    let _ = writeln!(out, "  wall time {:.2}s", s.wall_time_s);
    out
}

/// `log₂` ratios of consecutive values on a halving sequence.
pub fn orders(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// `log(e₁/e₂) / log(x₁/x₂)` for an arbitrary refinement sequence.
pub fn orders_against(xs: &[f64], values: &[f64]) -> Vec<f64> {
    xs.windows(2)
        .zip(values.windows(2))
        .map(|(x, v)| (v[0] / v[1]).ln() / (x[0] / x[1]).ln())
        .collect()
}

pub fn min_or_nan(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

pub fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}
