//! Variance, entropy and total-variation decay curves with their fitted
//! rates and the consistency relations between them.

use ergolab_core::ergodicity::{
    entropy_decay, point_mass_entropy, tv_decay, uniform_tv_sup, variance_decay,
};
use serde::Deserialize;
use serde_json::json;

use super::{profile_points, Ctx};
use crate::error::{CliResult, Context};
use crate::output::{to_json, Outcome, Table};

pub const EXERCISES: &[&str] = &[
    "spectral gap equals the exponential decay rate of the variance",
    "log-Sobolev inequality gives exponential entropy decay",
    "Pinsker inequality between total variation and entropy",
];

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    /// Horizon; `12/λ₁` when absent.
    pub t_max: Option<f64>,
    pub n_times: usize,
    /// Coefficients of the polynomial `f0` for the variance curve.
    pub f0_poly: Vec<f64>,
    /// Initial density `∝ e^{tilt·x}` for the entropy curve.
    pub tilt: f64,
    /// Point-mass start for the TV and Pinsker curves.
    pub x0: f64,
    pub uniform_t: Vec<f64>,
    pub starts: usize,
    /// Relative tolerance of the variance rate against `2λ₁`.
    pub variance_tolerance: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            t_max: None,
            n_times: 97,
            f0_poly: vec![0.0, 1.0, 0.3],
            tilt: 0.5,
            x0: 2.0,
            uniform_t: vec![0.25, 0.5, 1.0, 2.0],
            starts: 64,
            variance_tolerance: 0.05,
        }
    }
}

const MONOTONE_TOL: f64 = 1e-9;

pub fn run(ctx: &Ctx, p: &Params) -> CliResult<Outcome> {
    let mut out = Outcome::new(Table::quantities());
    for sc in ctx.scenarios {
        let l = sc.label.as_str();
        let start = out.checks.len();
        let gen = sc.generator(ctx.n)?;
        let lambda1 = gen.lambda1();
        let t_max = p.t_max.unwrap_or(12.0 / lambda1);
        let steps = p.n_times.max(2) - 1;
        let times: Vec<f64> = (0..=steps).map(|k| t_max * k as f64 / steps as f64).collect();
        let x = gen.nodes();

        let f0: Vec<f64> = x
            .iter()
            .map(|t| p.f0_poly.iter().enumerate().map(|(j, c)| c * t.powi(j as i32)).sum())
            .collect();
        let var = variance_decay(&gen, &f0, &times).ctx(|| format!("{l}: variance decay"))?;
        let vr = var.fitted_rate.unwrap_or(f64::NAN);
        out.check(
            l,
            "variance rate matches twice the spectral gap",
            (vr - 2.0 * lambda1).abs() <= p.variance_tolerance * 2.0 * lambda1,
            Some(vr),
            format!("2 lambda1 = {}", 2.0 * lambda1),
        );

        let g0: Vec<f64> = x.iter().map(|t| (p.tilt * t).exp()).collect();
        let ent = entropy_decay(&gen, &g0, &times).ctx(|| format!("{l}: entropy decay"))?;
        out.check(l, "entropy nonincreasing", ent.max_increase() <= MONOTONE_TOL, Some(ent.max_increase()), "");

        let tv = tv_decay(&gen, p.x0, &times).ctx(|| format!("{l}: TV decay"))?;
        out.check(l, "TV nonincreasing", tv.max_increase() <= MONOTONE_TOL, Some(tv.max_increase()), "");
        let pm = point_mass_entropy(&gen, p.x0, &times).ctx(|| format!("{l}: point-mass entropy"))?;
        let pinsker = tv
            .values
            .iter()
            .zip(&pm.values)
            .map(|(t, e)| t - (0.5 * e).sqrt())
            .fold(f64::NEG_INFINITY, f64::max);
        out.check(l, "Pinsker", pinsker <= 1e-12, Some(pinsker), "max of TV - sqrt(Ent/2)");

        let mut sups = Vec::new();
        for &t in &p.uniform_t {
            sups.push(uniform_tv_sup(&gen, t, p.starts).ctx(|| format!("{l}: uniform TV at t = {t}"))?.sup);
        }
        let worst = sups.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        out.check(l, "uniform TV nonincreasing in t", !(worst > MONOTONE_TOL), Some(worst), format!("sups {sups:?}"));

        out.quantity(l, "lambda1", lambda1);
        out.quantity(l, "variance_rate", vr);
        out.quantity(l, "entropy_rate", ent.fitted_rate.unwrap_or(f64::NAN));
        out.quantity(l, "tv_rate", tv.fitted_rate.unwrap_or(f64::NAN));
        out.plot(l, "variance", ["t", "variance"], profile_points(&var.times, &var.values));
        out.plot(l, "entropy", ["t", "entropy"], profile_points(&ent.times, &ent.values));
        out.plot(l, "tv", ["t", "tv"], profile_points(&tv.times, &tv.values));
        out.plot(l, "uniform_tv", ["t", "sup_tv"], profile_points(&p.uniform_t, &sups));
        let verdict = out.verdict_since(start);
        out.results.push(json!({
            "scenario": l,
            "lambda1": lambda1,
            "variance": to_json(&var),
            "entropy": to_json(&ent),
            "tv": to_json(&tv),
            "point_mass_entropy": to_json(&pm),
            "pinsker_worst": pinsker,
            "uniform_tv": { "t": p.uniform_t, "sup": sups },
            "verdict": verdict,
        }));
    }
    Ok(out)
}
