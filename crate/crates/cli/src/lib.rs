//! Config-driven experiment runner for `ergolab-core`.
//!
//! A run executes one pipeline over a list of scenarios and writes
//! `results.csv`, `summary.json` and `plotdata/*.csv` to its output
//! directory. A suite runs several of them into subdirectories and adds an
//! aggregated `summary.json` at the top.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

use config::{ConfigFile, Experiment};
use error::{CliError, CliResult};
use output::{verdict, write_json, write_run, Summary};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub summaries: Vec<Summary>,
    pub passed: bool,
}

#[derive(Serialize)]
struct SuiteSummary<'a> {
    runs: &'a [Summary],
    passed: bool,
    verdict: &'static str,
}

const DEFAULT_OUT: &str = "ergolab-out";

pub fn run_file(path: &Path, opts: &RunOptions, log: &mut dyn FnMut(&Summary)) -> CliResult<RunReport> {
    let cfg = config::load(path)?;
    let base = path.parent();
    match cfg {
        ConfigFile::Single(r) => {
            let p = experiments::prepare(&r, base, opts.seed)?;
            let dir = opts.out.clone().or(r.out.clone()).unwrap_or_else(|| Path::new(DEFAULT_OUT).join(&p.name));
            let (summary, outcome) = experiments::execute(&p)?;
            write_run(&dir, &summary, &outcome)?;
            log(&summary);
            let passed = summary.passed;
            Ok(RunReport { out_dir: dir, summaries: vec![summary], passed })
        }
        ConfigFile::Suite(s) => {
            let prepared: Vec<_> =
                s.runs.iter().map(|r| experiments::prepare(r, base, opts.seed)).collect::<CliResult<_>>()?;
            let dir = opts.out.clone().or(s.out.clone()).unwrap_or_else(|| Path::new(DEFAULT_OUT).join("suite"));
            fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
            let mut summaries = Vec::with_capacity(prepared.len());
            for p in &prepared {
                let (summary, outcome) = experiments::execute(p)?;
                write_run(&dir.join(&p.name), &summary, &outcome)?;
                log(&summary);
                summaries.push(summary);
            }
            let passed = summaries.iter().all(|s| s.passed);
            write_json(&dir.join("summary.json"), &SuiteSummary { runs: &summaries, passed, verdict: verdict(passed) })?;
            Ok(RunReport { out_dir: dir, summaries, passed })
        }
    }
}

pub fn list_text() -> String {
    Experiment::ALL.iter().map(|e| format!("{:<16}{}\n", e.tag(), e.description())).collect()
}

pub fn list_json() -> String {
    let v: Vec<_> = Experiment::ALL
        .iter()
        .map(|e| serde_json::json!({ "tag": e.tag(), "description": e.description() }))
        .collect();
    serde_json::to_string_pretty(&v).expect("listing serializes")
}
