//! Run configurations. Parsing is strict at every level: an unknown key is
//! a config error that names the key.
//!
//! A config file holds either one run or a suite `{"runs": [...]}`.

use std::fs;
use std::path::{Path, PathBuf};

use ergolab_core::generator::{DEFAULT_N, MIN_N};
use ergolab_core::scenario::{FamilyTag, ScenarioSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub const DEFAULT_SEED: u64 = 20261016;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    PoincareChain,
    LsiChain,
    FsobolevChain,
    HittingXcheck,
    Ladder,
    Integrability,
    DecaySuite,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::PoincareChain,
        Experiment::LsiChain,
        Experiment::FsobolevChain,
        Experiment::HittingXcheck,
        Experiment::Ladder,
        Experiment::Integrability,
        Experiment::DecaySuite,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Experiment::PoincareChain => "poincare-chain",
            Experiment::LsiChain => "lsi-chain",
            Experiment::FsobolevChain => "fsobolev-chain",
            Experiment::HittingXcheck => "hitting-xcheck",
            Experiment::Ladder => "ladder",
            Experiment::Integrability => "integrability",
            Experiment::DecaySuite => "decay-suite",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Experiment::PoincareChain => "spectral gap, Poincare resolvent Lyapunov function and hitting-time threshold",
            Experiment::LsiChain => "entropy decay, entropic Lyapunov function and weighted hitting threshold",
            Experiment::FsobolevChain => "F-Sobolev Lyapunov construction for power potentials over a radius sweep",
            Experiment::HittingXcheck => "exponential hitting moments by Feynman-Kac solve against Monte Carlo",
            Experiment::Ladder => "super-Lyapunov ladder series with uniform TV and kernel-bound sweeps",
            Experiment::Integrability => "phi-Lyapunov pair, moment recursion and exponential integrability",
            Experiment::DecaySuite => "variance, entropy and total-variation decay curves",
        }
    }
}

fn default_grid_n() -> usize {
    DEFAULT_N
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_scenarios() -> Vec<ScenarioSpec> {
    vec![ScenarioSpec::new(FamilyTag::Quadratic)]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Output subdirectory inside a suite; defaults to the experiment tag.
    #[serde(default)]
    pub name: Option<String>,
    pub experiment: Experiment,
    #[serde(default = "default_scenarios")]
    pub scenarios: Vec<ScenarioSpec>,
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Experiment-specific knobs, parsed by the pipeline.
    #[serde(default)]
    pub params: Value,
}

impl RunConfig {
    pub fn name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.experiment.tag().to_string())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub runs: Vec<RunConfig>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub enum ConfigFile {
    Single(RunConfig),
    Suite(SuiteConfig),
}

pub fn parse(text: &str) -> CliResult<ConfigFile> {
    let v: Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
    let is_suite = v.as_object().is_some_and(|o| o.contains_key("runs"));
    let cfg = if is_suite {
        ConfigFile::Suite(serde_json::from_value(v).map_err(|e| CliError::Config(e.to_string()))?)
    } else {
        ConfigFile::Single(serde_json::from_value(v).map_err(|e| CliError::Config(e.to_string()))?)
    };
    validate(&cfg)?;
    Ok(cfg)
}

pub fn load(path: &Path) -> CliResult<ConfigFile> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn validate_run(r: &RunConfig) -> CliResult<()> {
    if r.grid_n < MIN_N {
        return Err(CliError::Config(format!("grid_n must be >= {MIN_N}, got {}", r.grid_n)));
    }
    if r.scenarios.is_empty() {
        return Err(CliError::Config(format!("run '{}' lists no scenarios", r.name())));
    }
    Ok(())
}

fn validate(cfg: &ConfigFile) -> CliResult<()> {
    match cfg {
        ConfigFile::Single(r) => validate_run(r),
        ConfigFile::Suite(s) => {
            if s.runs.is_empty() {
                return Err(CliError::Config("suite has no runs".into()));
            }
            let mut names: Vec<String> = Vec::new();
            for r in &s.runs {
                validate_run(r)?;
                let n = r.name();
                if names.contains(&n) {
                    return Err(CliError::Config(format!("duplicate run name '{n}'")));
                }
                names.push(n);
            }
            Ok(())
        }
    }
}

/// Parse the `params` object of a run; `null` or absent means all defaults.
pub fn parse_params<P: DeserializeOwned + Default>(run: &str, v: &Value) -> CliResult<P> {
    if v.is_null() {
        return Ok(P::default());
    }
    serde_json::from_value(v.clone()).map_err(|e| CliError::Config(format!("params of run '{run}': {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_is_named() {
        let e = parse(r#"{"experiment": "ladder", "foo": 1}"#).unwrap_err();
        assert!(e.to_string().contains("foo"), "{e}");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn nested_unknown_key_is_named() {
        let e = parse(r#"{"experiment": "ladder", "scenarios": [{"family": "quadratic", "bar": 2}]}"#).unwrap_err();
        assert!(e.to_string().contains("bar"), "{e}");
    }

    #[test]
    fn defaults_fill_in() {
        let ConfigFile::Single(r) = parse(r#"{"experiment": "poincare-chain"}"#).unwrap() else { panic!() };
        assert_eq!(r.grid_n, DEFAULT_N);
        assert_eq!(r.seed, DEFAULT_SEED);
        assert_eq!(r.scenarios.len(), 1);
        assert_eq!(r.name(), "poincare-chain");
    }

    #[test]
    fn suite_rejects_duplicate_names() {
        let e = parse(r#"{"runs": [{"experiment": "ladder"}, {"experiment": "ladder"}]}"#).unwrap_err();
        assert!(e.to_string().contains("duplicate"));
    }

    #[test]
    fn tags_round_trip() {
        for x in Experiment::ALL {
            let v: Experiment = serde_json::from_value(Value::String(x.tag().into())).unwrap();
            assert_eq!(v, x);
        }
    }
}
