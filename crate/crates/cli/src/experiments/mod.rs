//! The seven experiment pipelines.
//!
//! Each run is prepared first (params parsed, scenarios built) so that a
//! suite with a bad entry fails before any computation starts.

use std::path::Path;

use ergolab_core::generator::DiscreteGenerator;
use ergolab_core::scenario::{FamilyTag, Scenario, ScenarioSpec};
use serde_json::Value;

use crate::config::{parse_params, Experiment, RunConfig};
use crate::error::{CliError, CliResult, Context};
use crate::output::{verdict, Outcome, ScenarioInfo, Summary};

pub mod decay;
pub mod fsobolev;
pub mod hitting;
pub mod integrability;
pub mod ladder;
pub mod lsi;
pub mod poincare;

/// A built scenario with its display label.
pub struct Prepped {
    pub label: String,
    pub spec: ScenarioSpec,
    pub scenario: Scenario,
}

impl Prepped {
    pub fn generator(&self, n: usize) -> CliResult<DiscreteGenerator> {
        DiscreteGenerator::build(&self.scenario, n).ctx(|| format!("{}: grid", self.label))
    }

    pub fn info(&self) -> ScenarioInfo {
        let s = &self.scenario;
        ScenarioInfo {
            label: self.label.clone(),
            spec: self.spec.clone(),
            domain: [s.x_lo, s.x_hi],
            ln_z: s.ln_z,
            z_rel_err: s.z_rel_err,
            tail_mass: s.tail_mass,
            outside_hypotheses: s.outside_hypotheses,
        }
    }
}

pub fn label(spec: &ScenarioSpec) -> String {
    let p = &spec.params;
    let mut s = match spec.family {
        FamilyTag::Quadratic => "quadratic".to_string(),
        FamilyTag::Power => format!("power(alpha={})", p.alpha.unwrap_or(f64::NAN)),
        FamilyTag::Logpower => format!("logpower(beta={})", p.beta.unwrap_or(f64::NAN)),
        FamilyTag::Cauchy => format!("cauchy(c={})", p.c.unwrap_or(f64::NAN)),
        FamilyTag::Table => "table".to_string(),
    };
    if let Some(sc) = p.scale.filter(|v| *v != 1.0) {
        s.push_str(&format!("*{sc}"));
    }
    if let Some(r) = spec.radius {
        s.push_str(&format!("@R={r}"));
    }
    s
}

pub struct Ctx<'a> {
    pub n: usize,
    pub seed: u64,
    pub scenarios: &'a [Prepped],
}

enum Params {
    Poincare(poincare::Params),
    Lsi(lsi::Params),
    Fsobolev(fsobolev::Params),
    Hitting(hitting::Params),
    Ladder(ladder::Params),
    Integrability(integrability::Params),
    Decay(decay::Params),
}

pub struct Prepared {
    pub name: String,
    pub experiment: Experiment,
    pub n: usize,
    pub seed: u64,
    pub scenarios: Vec<Prepped>,
    params: Params,
}

pub fn prepare(cfg: &RunConfig, base_dir: Option<&Path>, seed: Option<u64>) -> CliResult<Prepared> {
    let name = cfg.name();
    let mut scenarios = Vec::with_capacity(cfg.scenarios.len());
    for spec in &cfg.scenarios {
        let label = label(spec);
        let scenario = Scenario::from_spec(spec, base_dir)
            .map_err(|e| CliError::Config(format!("run '{name}', scenario {label}: {e}")))?;
        scenarios.push(Prepped { label, spec: spec.clone(), scenario });
    }
    let v = &cfg.params;
    let params = match cfg.experiment {
        Experiment::PoincareChain => Params::Poincare(parse_params(&name, v)?),
        Experiment::LsiChain => Params::Lsi(parse_params(&name, v)?),
        Experiment::FsobolevChain => Params::Fsobolev(parse_params(&name, v)?),
        Experiment::HittingXcheck => Params::Hitting(parse_params(&name, v)?),
        Experiment::Ladder => Params::Ladder(parse_params(&name, v)?),
        Experiment::Integrability => Params::Integrability(parse_params(&name, v)?),
        Experiment::DecaySuite => Params::Decay(parse_params(&name, v)?),
    };
    let err = |m: String| CliError::Config(format!("params of run '{name}': {m}"));
    match &params {
        Params::Fsobolev(p) => fsobolev::validate(p, &scenarios).map_err(err)?,
        Params::Ladder(p) => ladder::validate(p, &scenarios).map_err(err)?,
        Params::Hitting(p) => hitting::validate(p).map_err(err)?,
        _ => {}
    }
    Ok(Prepared { name, experiment: cfg.experiment, n: cfg.grid_n, seed: seed.unwrap_or(cfg.seed), scenarios, params })
}

pub fn execute(p: &Prepared) -> CliResult<(Summary, Outcome)> {
    let ctx = Ctx { n: p.n, seed: p.seed, scenarios: &p.scenarios };
    let (exercises, outcome) = match &p.params {
        Params::Poincare(q) => (poincare::EXERCISES, poincare::run(&ctx, q)?),
        Params::Lsi(q) => (lsi::EXERCISES, lsi::run(&ctx, q)?),
        Params::Fsobolev(q) => (fsobolev::EXERCISES, fsobolev::run(&ctx, q)?),
        Params::Hitting(q) => (hitting::EXERCISES, hitting::run(&ctx, q)?),
        Params::Ladder(q) => (ladder::EXERCISES, ladder::run(&ctx, q)?),
        Params::Integrability(q) => (integrability::EXERCISES, integrability::run(&ctx, q)?),
        Params::Decay(q) => (decay::EXERCISES, decay::run(&ctx, q)?),
    };
    let passed = outcome.checks.iter().all(|c| c.passed);
    let summary = Summary {
        name: p.name.clone(),
        experiment: p.experiment.tag(),
        exercises: exercises.to_vec(),
        grid_n: p.n,
        seed: p.seed,
        scenarios: p.scenarios.iter().map(Prepped::info).collect(),
        checks: outcome.checks.clone(),
        passed,
        verdict: verdict(passed),
        results: Value::Array(outcome.results.clone()),
    };
    Ok((summary, outcome))
}

pub(crate) fn profile_points(x: &[f64], y: &[f64]) -> Vec<(f64, f64)> {
    x.iter().copied().zip(y.iter().copied()).collect()
}

/// Every `k`-th node, keeping plot files small.
pub(crate) fn thin(x: &[f64], y: &[f64], max_points: usize) -> Vec<(f64, f64)> {
    let k = (x.len() / max_points.max(1)).max(1);
    let mut v: Vec<(f64, f64)> = x.iter().zip(y).step_by(k).map(|(a, b)| (*a, *b)).collect();
    if let (Some(lx), Some(ly)) = (x.last(), y.last()) {
        if v.last().map(|p| p.0) != Some(*lx) {
            v.push((*lx, *ly));
        }
    }
    v
}

pub(crate) const PLOT_POINTS: usize = 1024;
