//! Run artifacts: `summary.json`, `results.csv` and `plotdata/*.csv`.
//!
//! Everything written here is a function of the config alone (no timings,
//! thread counts or paths), so repeated runs are byte-identical.

use std::fs;
use std::path::Path;

use ergolab_core::integrability::CrucReport;
use ergolab_core::scenario::ScenarioSpec;
use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    pub detail: String,
}

/// A two-column series for `plotdata/`.
#[derive(Debug, Clone)]
pub struct Plot {
    pub name: String,
    pub columns: [&'static str; 2],
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct Table {
    pub header: String,
    pub rows: Vec<String>,
}

impl Table {
    pub const QUANTITY_HEADER: &'static str = "scenario,quantity,value";

    pub fn quantities() -> Self {
        Self { header: Self::QUANTITY_HEADER.into(), rows: Vec::new() }
    }

    pub fn with_header(header: &str) -> Self {
        Self { header: header.into(), rows: Vec::new() }
    }
}

/// What a pipeline hands back.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub results: Vec<Value>,
    pub table: Table,
    pub plots: Vec<Plot>,
}

impl Outcome {
    pub fn new(table: Table) -> Self {
        Self { checks: Vec::new(), results: Vec::new(), table, plots: Vec::new() }
    }

    pub fn check(&mut self, scope: &str, name: &str, passed: bool, value: Option<f64>, detail: impl Into<String>) {
        self.checks.push(Check { name: format!("{scope}: {name}"), passed, value, detail: detail.into() });
    }

    pub fn cruc(&mut self, scope: &str, r: &CrucReport) {
        self.check(
            scope,
            &format!("integration by parts inequality ({})", r.design),
            r.passed,
            Some(r.worst_slack),
            format!("{} test functions, b_bar = {}", r.n_functions, fmt_f64(r.b_bar)),
        );
    }

    /// Row of the `scenario,quantity,value` table.
    pub fn quantity(&mut self, scope: &str, name: &str, value: f64) {
        self.table.rows.push(format!("{scope},{name},{}", fmt_f64(value)));
    }

    pub fn plot(&mut self, scope: &str, what: &str, columns: [&'static str; 2], points: Vec<(f64, f64)>) {
        self.plots.push(Plot { name: format!("{}_{what}", file_stem(scope)), columns, points });
    }

    /// Verdict over the checks recorded since index `start`.
    pub fn verdict_since(&self, start: usize) -> &'static str {
        verdict(self.checks[start..].iter().all(|c| c.passed))
    }
}

pub fn verdict(passed: bool) -> &'static str {
    if passed {
        "consistent"
    } else {
        "inconsistent"
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioInfo {
    pub label: String,
    pub spec: ScenarioSpec,
    pub domain: [f64; 2],
    pub ln_z: f64,
    pub z_rel_err: f64,
    pub tail_mass: f64,
    pub outside_hypotheses: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub name: String,
    pub experiment: &'static str,
    /// Statements of the theory that the pipeline exercises.
    pub exercises: Vec<&'static str>,
    pub grid_n: usize,
    pub seed: u64,
    pub scenarios: Vec<ScenarioInfo>,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub verdict: &'static str,
    pub results: Value,
}

/// Shortest round-trip decimal, switching to exponent form outside
/// `[1e-4, 1e15)`.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn file_stem(label: &str) -> String {
    let mut s: String = label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' }).collect();
    while s.contains("__") {
        s = s.replace("__", "_");
    }
    s.trim_matches('_').to_string()
}

pub fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("results serialize")
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json(path: &Path, v: &impl Serialize) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(v).expect("summary serializes");
    s.push('\n');
    write(path, &s)
}

/// Write `results.csv`, `summary.json` and `plotdata/` under `dir`.
pub fn write_run(dir: &Path, summary: &Summary, outcome: &Outcome) -> CliResult<()> {
    let plot_dir = dir.join("plotdata");
    fs::create_dir_all(&plot_dir).map_err(|e| CliError::io(&plot_dir, e))?;
    let mut csv = outcome.table.header.clone();
    csv.push('\n');
    for r in &outcome.table.rows {
        csv.push_str(r);
        csv.push('\n');
    }
    write(&dir.join("results.csv"), &csv)?;
    for p in &outcome.plots {
        let mut s = format!("{},{}\n", p.columns[0], p.columns[1]);
        for (x, y) in &p.points {
            s.push_str(&format!("{},{}\n", fmt_f64(*x), fmt_f64(*y)));
        }
        write(&plot_dir.join(format!("{}.csv", p.name)), &s)?;
    }
    write_json(&dir.join("summary.json"), summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(fmt_f64(0.085336), "0.085336");
        assert_eq!(fmt_f64(1e-10), "1e-10");
        assert_eq!(fmt_f64(0.0), "0");
        assert_eq!(fmt_f64(2.5e20), "2.5e20");
        assert_eq!(fmt_f64(f64::NAN), "NaN");
    }

    #[test]
    fn stems() {
        assert_eq!(file_stem("power(alpha=1.5)"), "power_alpha_1.5");
        assert_eq!(file_stem("quadratic"), "quadratic");
    }
}
