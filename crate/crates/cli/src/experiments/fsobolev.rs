//! F-Sobolev chain for power potentials `|x|^α` with `F = ln₊^β`,
//! `β = 2(1 − 1/α)`, and `h = a|V|^β`. Each exponent is tried across a
//! sweep of truncation radii; a certificate counts only if it holds at all
//! of them. Exponents above `β` are expected to break somewhere.

use ergolab_core::fenchel::FSpec;
use ergolab_core::generator::DiscreteGenerator;
use ergolab_core::integrability::{phi_lyap_to_poincare_check, PhiLyap};
use ergolab_core::lyapunov::{construct_fsobolev_lyapunov, ResolventLyapunov};
use ergolab_core::scenario::FamilyTag;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{thin, Ctx, Prepped, PLOT_POINTS};
use crate::error::{CliResult, Context};
use crate::output::{to_json, Outcome, Table};

pub const EXERCISES: &[&str] = &[
    "F-Sobolev inequality gives a Lyapunov function with rate a|V|^beta",
    "super-Poincare exponent beta = 2(1 - 1/alpha) for the measure exp(-|x|^alpha)",
    "phi-Lyapunov function gives a weighted Poincare inequality",
];

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectFailure {
    pub alpha: f64,
    pub factor: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub c_f: f64,
    pub d_f: f64,
    /// `h = a|V|^β'`
    pub a: f64,
    pub epsilon: f64,
    /// Radii tried, as multiples of the scenario radius.
    pub radius_factors: Vec<f64>,
    /// `β' = factor · β`; factor 1 must certify.
    pub exponent_factors: Vec<f64>,
    pub expect_failure: Vec<ExpectFailure>,
    pub cruc_functions: usize,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            c_f: 1.0,
            d_f: 0.0,
            a: 0.5,
            epsilon: 0.1,
            radius_factors: vec![1.0, 1.5, 2.0],
            exponent_factors: vec![1.0, 1.5],
            expect_failure: Vec::new(),
            cruc_functions: 100,
        }
    }
}

pub fn validate(p: &Params, scenarios: &[Prepped]) -> Result<(), String> {
    if let Some(s) = scenarios.iter().find(|s| s.spec.family != FamilyTag::Power) {
        return Err(format!("fsobolev-chain needs power scenarios, got {}", s.label));
    }
    if p.radius_factors.is_empty() || p.radius_factors.iter().any(|f| !(*f > 0.0)) {
        return Err("radius_factors must be nonempty and positive".into());
    }
    if !p.exponent_factors.contains(&1.0) {
        return Err("exponent_factors must include 1".into());
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct Attempt {
    radius: f64,
    valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    worst_margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn attempt(
    sc: &Prepped,
    n: usize,
    radius: f64,
    beta: f64,
    p: &Params,
) -> CliResult<(Attempt, Option<(DiscreteGenerator, Vec<f64>, ResolventLyapunov)>)> {
    let s = sc.scenario.with_radius(radius).ctx(|| format!("{}: radius {radius}", sc.label))?;
    let gen = DiscreteGenerator::build(&s, n).ctx(|| format!("{}: grid", sc.label))?;
    let fspec = FSpec::log_plus_power(beta, p.c_f, p.d_f).ctx(|| format!("{}: F with beta {beta}", sc.label))?;
    let pot = &s.potential;
    let h: Vec<f64> = gen.nodes().iter().map(|&x| p.a * pot.v(x).abs().powf(beta)).collect();
    Ok(match construct_fsobolev_lyapunov(&gen, &fspec, &h, p.epsilon) {
        Ok(r) => {
            let valid = r.certificate.valid && !r.region_empty;
            (Attempt { radius, valid, worst_margin: Some(r.certificate.worst_margin), error: None }, Some((gen, h, r)))
        }
        Err(e) => (Attempt { radius, valid: false, worst_margin: None, error: Some(e.to_string()) }, None),
    })
}

pub fn run(ctx: &Ctx, p: &Params) -> CliResult<Outcome> {
    let mut out = Outcome::new(Table::quantities());
    for sc in ctx.scenarios {
        let l = sc.label.as_str();
        let start = out.checks.len();
        let alpha = sc.spec.params.alpha.expect("validated power family");
        let beta = 2.0 * (1.0 - 1.0 / alpha);
        let r0 = sc.scenario.radius();
        let mut exponents = Vec::new();
        for &factor in &p.exponent_factors {
            let b = factor * beta;
            let mut attempts = Vec::new();
            let mut base = None;
            for (j, &rf) in p.radius_factors.iter().enumerate() {
                let (a, built) = attempt(sc, ctx.n, rf * r0, b, p)?;
                if j == 0 && factor == 1.0 {
                    base = built;
                }
                attempts.push(a);
            }
            let certified = attempts.iter().all(|a| a.valid);
            let first_failure = attempts.iter().find(|a| !a.valid).map(|a| a.radius);
            let detail = match first_failure {
                Some(r) => format!("beta' = {b}: first failure at R = {r}"),
                None => format!("beta' = {b}: valid at all {} radii", attempts.len()),
            };
            let expected_fail =
                p.expect_failure.iter().any(|e| (e.alpha - alpha).abs() < 1e-12 && (e.factor - factor).abs() < 1e-12);
            if factor == 1.0 {
                out.check(l, "certified at the critical exponent", certified, Some(b), detail.clone());
            } else if expected_fail {
                out.check(l, &format!("fails at {factor} x the critical exponent"), !certified, Some(b), detail.clone());
            }
            out.quantity(l, &format!("certified_factor_{factor}"), if certified { 1.0 } else { 0.0 });

            let mut cruc = None;
            if let Some((gen, h, rl)) = base {
                let phi2: Vec<f64> =
                    h.iter().zip(&rl.region).map(|(hi, &r)| if r { rl.rate * hi } else { 0.0 }).collect();
                let c_mask: Vec<bool> = rl.region.iter().map(|r| !r).collect();
                let phil = PhiLyap::from_nodes(&gen, "fsobolev-resolvent", rl.v.clone(), phi2, &c_mask, 1)
                    .ctx(|| format!("{l}: phi-Lyapunov recheck"))?;
                let c = phi_lyap_to_poincare_check(&gen, &phil, p.cruc_functions, ctx.seed);
                out.cruc(l, &c);
                out.quantity(l, "cruc_worst_slack", c.worst_slack);
                out.plot(l, "v", ["x", "v"], thin(gen.nodes(), &rl.v, PLOT_POINTS));
                cruc = Some(to_json(&c));
            }
            exponents.push(json!({
                "factor": factor,
                "beta": b,
                "certified": certified,
                "expected_failure": expected_fail,
                "attempts": to_json(&attempts),
                "cruc": cruc,
            }));
        }
        let verdict = out.verdict_since(start);
        out.results.push(json!({
            "scenario": l,
            "alpha": alpha,
            "beta": beta,
            "base_radius": r0,
            "exponents": exponents,
            "verdict": verdict,
        }));
    }
    Ok(out)
}
