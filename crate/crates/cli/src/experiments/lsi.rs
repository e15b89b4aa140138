//! Log-Sobolev chain: entropy decay rate, the entropic resolvent Lyapunov
//! function for `h = c·x²`, and the hitting threshold with weight `h`.

use ergolab_core::ergodicity::entropy_decay;
use ergolab_core::hitting::{critical_theta, Weight};
use ergolab_core::integrability::{phi_lyap_to_poincare_check, PhiLyap};
use ergolab_core::lyapunov::construct_entropic_lyapunov;
use serde::Deserialize;
use serde_json::json;

use super::{profile_points, thin, Ctx, PLOT_POINTS};
use crate::error::{CliResult, Context};
use crate::output::{to_json, Outcome, Table};

pub const EXERCISES: &[&str] = &[
    "log-Sobolev inequality gives exponential entropy decay",
    "log-Sobolev inequality gives a Lyapunov function with unbounded rate h",
    "Lyapunov rate h gives exponential moments of the h-weighted hitting functional",
    "phi-Lyapunov function gives a weighted Poincare inequality",
];

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub c_ls: f64,
    pub epsilon: f64,
    /// `h = h_coef · x²` for the entropic construction.
    pub h_coef: f64,
    /// Weight of the hitting functional.
    pub theta_weight: Weight,
    pub u: [f64; 2],
    /// Initial density `∝ e^{tilt·x}` for the entropy curve.
    pub tilt: f64,
    pub t_max: f64,
    pub dt: f64,
    /// Required fraction of the rate `2/C_LS`.
    pub rate_factor: f64,
    pub cruc_functions: usize,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            c_ls: 2.0,
            epsilon: 0.1,
            h_coef: 0.25,
            theta_weight: Weight::AbsPower { p: 2.0 },
            u: [-1.0, 1.0],
            tilt: 0.5,
            t_max: 10.0,
            dt: 0.2,
            rate_factor: 0.95,
            cruc_functions: 100,
        }
    }
}

pub fn run(ctx: &Ctx, p: &Params) -> CliResult<Outcome> {
    let mut out = Outcome::new(Table::quantities());
    let times: Vec<f64> = (0..=((p.t_max / p.dt).round() as usize)).map(|k| k as f64 * p.dt).collect();
    for sc in ctx.scenarios {
        let l = sc.label.as_str();
        let start = out.checks.len();
        let gen = sc.generator(ctx.n)?;
        let x = gen.nodes();

        let f0: Vec<f64> = x.iter().map(|t| (p.tilt * t).exp()).collect();
        let ent = entropy_decay(&gen, &f0, &times).ctx(|| format!("{l}: entropy decay"))?;
        let target = p.rate_factor * 2.0 / p.c_ls;
        let rate = ent.fitted_rate.unwrap_or(f64::NAN);
        out.check(l, "entropy decay rate", rate >= target, Some(rate), format!("needs >= {target}"));
        out.check(l, "entropy nonincreasing", ent.max_increase() <= 1e-9, Some(ent.max_increase()), "largest relative step");

        let h: Vec<f64> = x.iter().map(|t| p.h_coef * t * t).collect();
        let rl = construct_entropic_lyapunov(&gen, &h, p.c_ls, p.epsilon).ctx(|| format!("{l}: entropic construction"))?;
        out.check(
            l,
            "entropic drift certificate",
            rl.certificate.valid && !rl.region_empty,
            Some(rl.certificate.worst_margin),
            format!("rate {} in front of h, b = {}", rl.rate, rl.b),
        );

        let hw = p.theta_weight.on_nodes(x);
        let star = critical_theta(&gen, (p.u[0], p.u[1]), &hw).ctx(|| format!("{l}: weighted threshold"))?;
        out.check(
            l,
            "weighted hitting threshold positive",
            star.theta > 0.0,
            Some(star.theta),
            format!("h = {}", p.theta_weight.tag()),
        );

        let phi2: Vec<f64> = h.iter().zip(&rl.region).map(|(hi, &r)| if r { rl.rate * hi } else { 0.0 }).collect();
        let c_mask: Vec<bool> = rl.region.iter().map(|r| !r).collect();
        let phil = PhiLyap::from_nodes(&gen, "entropic-resolvent", rl.v.clone(), phi2, &c_mask, 1)
            .ctx(|| format!("{l}: phi-Lyapunov recheck"))?;
        let cruc = phi_lyap_to_poincare_check(&gen, &phil, p.cruc_functions, ctx.seed);
        out.cruc(l, &cruc);

        out.quantity(l, "entropy_rate", rate);
        out.quantity(l, "entropic_rate", rl.rate);
        out.quantity(l, "entropic_b", rl.b);
        out.quantity(l, "theta_star", star.theta);
        out.quantity(l, "cruc_worst_slack", cruc.worst_slack);
        out.plot(l, "entropy", ["t", "entropy"], profile_points(&ent.times, &ent.values));
        out.plot(l, "v", ["x", "v"], thin(x, &rl.v, PLOT_POINTS));
        let verdict = out.verdict_since(start);
        out.results.push(json!({
            "scenario": l,
            "entropy": to_json(&ent),
            "entropy_rate": rate,
            "rate_target": target,
            "entropic": to_json(&rl),
            "theta_star": star.theta,
            "theta_weight": p.theta_weight.tag(),
            "cruc": to_json(&cruc),
            "verdict": verdict,
        }));
    }
    Ok(out)
}
