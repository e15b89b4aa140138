//! Hitting-time moments two ways: the Dirichlet threshold θ* on two grids,
//! then the Feynman–Kac solution against Euler–Maruyama at `θ = f·θ*`.

use ergolab_core::generator::DiscreteGenerator;
use ergolab_core::hitting::{
    critical_theta, fk_moment, lp_membership_of_moment, mc_moment, McEstimate, McOptions, Weight,
};
use serde::Deserialize;
use serde_json::json;

use super::{thin, Ctx, PLOT_POINTS};
use crate::error::{CliResult, Context};
use crate::output::{to_json, Outcome, Table};

pub const EXERCISES: &[&str] = &[
    "exponential hitting moments are finite exactly below the Dirichlet principal eigenvalue",
    "Feynman-Kac representation of the hitting moment",
    "hitting moment belongs to L^p(mu) when theta/p is below the threshold",
];

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub u: [f64; 2],
    pub h: Weight,
    /// `θ = theta_fraction · θ*`
    pub theta_fraction: f64,
    pub x0: Vec<f64>,
    pub n_paths: usize,
    pub dt: f64,
    pub bridge: bool,
    /// Path-time cap; `50/θ*` when absent.
    pub time_cap: Option<f64>,
    /// Allowed relative change of θ* from N to 2N.
    pub grid_tolerance: f64,
    /// Allowed `|MC − FK|` in standard errors.
    pub se_multiple: f64,
    /// Exponents `p` for the `L^p(μ)` report.
    pub lp_p: Vec<f64>,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            u: [-1.0, 1.0],
            h: Weight::One,
            theta_fraction: 0.8,
            x0: vec![2.0],
            n_paths: 100_000,
            dt: 1e-3,
            bridge: false,
            time_cap: None,
            grid_tolerance: 0.01,
            se_multiple: 3.0,
            lp_p: vec![1.0, 2.0],
        }
    }
}

pub fn validate(p: &Params) -> Result<(), String> {
    if !(p.theta_fraction > 0.0 && p.theta_fraction < 1.0) {
        return Err(format!("theta_fraction must lie in (0, 1), got {}", p.theta_fraction));
    }
    if p.x0.is_empty() {
        return Err("x0 must list at least one start".into());
    }
    Ok(())
}

pub fn run(ctx: &Ctx, p: &Params) -> CliResult<Outcome> {
    let mut out = Outcome::new(Table::with_header(McEstimate::CSV_HEADER));
    let u = (p.u[0], p.u[1]);
    for sc in ctx.scenarios {
        let l = sc.label.as_str();
        let start = out.checks.len();
        let gen = sc.generator(ctx.n)?;
        let fine = DiscreteGenerator::build(&sc.scenario, 2 * ctx.n).ctx(|| format!("{l}: 2N grid"))?;
        let h = p.h.on_nodes(gen.nodes());
        let star = critical_theta(&gen, u, &h).ctx(|| format!("{l}: threshold"))?;
        let star2 = critical_theta(&fine, u, &p.h.on_nodes(fine.nodes())).ctx(|| format!("{l}: threshold on 2N"))?;
        let rel = (star.theta - star2.theta).abs() / star2.theta;
        out.check(
            l,
            "threshold stable under grid refinement",
            rel < p.grid_tolerance,
            Some(rel),
            format!("theta*(N) = {}, theta*(2N) = {}", star.theta, star2.theta),
        );

        let theta = p.theta_fraction * star.theta;
        let fk = fk_moment(&gen, u, &h, theta).ctx(|| format!("{l}: Feynman-Kac solve"))?;
        let mut opts = McOptions::new(p.n_paths, p.dt, ctx.seed, star.theta);
        opts.bridge = p.bridge;
        if let Some(c) = p.time_cap {
            opts.time_cap = c;
        }
        let mut starts = Vec::new();
        for &x0 in &p.x0 {
            // Both routes start from the same grid node.
            let i = gen.nearest(x0);
            let xs = gen.nodes()[i];
            let mc = mc_moment(&sc.scenario, u, p.h, theta, xs, &opts).ctx(|| format!("{l}: Monte Carlo at {xs}"))?;
            let diff = (mc.estimate - fk.w[i]).abs();
            let z = diff / mc.stderr;
            out.check(
                l,
                &format!("Monte Carlo agrees with Feynman-Kac at x = {xs}"),
                diff <= p.se_multiple * mc.stderr,
                Some(z),
                format!("MC {} +- {}, FK {}", mc.estimate, mc.stderr, fk.w[i]),
            );
            out.table.rows.push(mc.csv_row());
            starts.push(json!({ "x": xs, "fk": fk.w[i], "mc": to_json(&mc), "z": z }));
        }

        let mut lp = Vec::new();
        if p.h == Weight::One {
            for &q in &p.lp_p {
                match lp_membership_of_moment(&gen, u, theta, q) {
                    Ok(m) => lp.push(to_json(&m)),
                    Err(e) => lp.push(json!({ "p": q, "error": e.to_string() })),
                }
            }
        }
        out.plot(l, "fk", ["x", "w"], thin(gen.nodes(), &fk.w, PLOT_POINTS));
        let verdict = out.verdict_since(start);
        out.results.push(json!({
            "scenario": l,
            "set_u": p.u,
            "h": p.h.tag(),
            "theta_star": star.theta,
            "theta_star_2n": star2.theta,
            "theta_star_rel_change": rel,
            "theta": theta,
            "fk_rel_residual": fk.rel_residual,
            "starts": starts,
            "lp_membership": lp,
            "verdict": verdict,
        }));
    }
    Ok(out)
}
