//! Spectral gap, the Poincaré resolvent Lyapunov function for a set `A`,
//! the hitting threshold of `A` and the integration-by-parts check.

use ergolab_core::hitting::critical_theta;
use ergolab_core::integrability::{phi_lyap_to_poincare_check, PhiLyap};
use ergolab_core::lyapunov::{construct_poincare_lyapunov, interval_mask};
use serde::Deserialize;
use serde_json::json;

use super::{thin, Ctx, PLOT_POINTS};
use crate::error::{CliResult, Context};
use crate::output::{to_json, Outcome, Table};

pub const EXERCISES: &[&str] = &[
    "Poincare inequality gives a Lyapunov function with drift to any set of positive measure",
    "Lyapunov drift to a set gives exponential moments of its hitting time",
    "phi-Lyapunov function gives a weighted Poincare inequality",
];

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    /// The set `A`.
    pub a: [f64; 2],
    /// Poincaré constant; `1/λ₁` of the grid when absent.
    pub c_p: Option<f64>,
    pub cruc_functions: usize,
}

impl Default for Params {
    fn default() -> Self {
        Self { a: [-1.0, 1.0], c_p: None, cruc_functions: 100 }
    }
}

pub fn run(ctx: &Ctx, p: &Params) -> CliResult<Outcome> {
    let mut out = Outcome::new(Table::quantities());
    let a = (p.a[0], p.a[1]);
    for sc in ctx.scenarios {
        let l = sc.label.as_str();
        let start = out.checks.len();
        let gen = sc.generator(ctx.n)?;
        let gap = gen.spectral_gap().ctx(|| format!("{l}: spectral gap"))?;
        out.check(
            l,
            "spectral gap present",
            !gap.no_gap,
            Some(gap.lambda1),
            format!("lambda1 on 2N grid = {}", gap.refined),
        );
        let c_p = p.c_p.unwrap_or(1.0 / gap.lambda1);
        let pl = construct_poincare_lyapunov(&gen, a, c_p).ctx(|| format!("{l}: Poincare construction"))?;
        out.check(l, "resolvent solution positive", pl.v_min > 0.0, Some(pl.v_min), "min v over the grid");
        out.check(
            l,
            "drift Lv <= -cv off A",
            pl.complement_ok(),
            Some(pl.complement_margin),
            format!("worst margin against 1e-6 * sup|Lv/v| = {}", 1e-6 * pl.lv_over_v_sup),
        );
        out.check(
            l,
            "drift certificate",
            pl.certificate.valid,
            Some(pl.certificate.worst_margin),
            format!("b = {}", pl.certificate.b),
        );
        let ones = vec![1.0; gen.len()];
        let star = critical_theta(&gen, a, &ones).ctx(|| format!("{l}: hitting threshold"))?;
        out.check(l, "hitting threshold positive", star.theta > 0.0, Some(star.theta), "theta* for h = 1");

        let phil = PhiLyap::from_nodes(
            &gen,
            "poincare-resolvent",
            pl.v.clone(),
            vec![pl.c; gen.len()],
            &interval_mask(&gen, a.0, a.1),
            0,
        )
        .ctx(|| format!("{l}: phi-Lyapunov recheck"))?;
        let cruc = phi_lyap_to_poincare_check(&gen, &phil, p.cruc_functions, ctx.seed);
        out.cruc(l, &cruc);

        out.quantity(l, "spectral_gap", gap.lambda1);
        out.quantity(l, "c", pl.c);
        out.quantity(l, "mu_a", pl.mu_a);
        out.quantity(l, "v_min", pl.v_min);
        out.quantity(l, "complement_margin", pl.complement_margin);
        out.quantity(l, "theta_star", star.theta);
        out.quantity(l, "cruc_worst_slack", cruc.worst_slack);
        out.plot(l, "v", ["x", "v"], thin(gen.nodes(), &pl.v, PLOT_POINTS));
        let verdict = out.verdict_since(start);
        out.results.push(json!({
            "scenario": l,
            "set_a": p.a,
            "spectral_gap": gap.lambda1,
            "gap": to_json(&gap),
            "c": pl.c,
            "mu_a": pl.mu_a,
            "c_p": pl.c_p,
            "v_min": pl.v_min,
            "rel_residual": pl.rel_residual,
            "backward_error": pl.backward_error,
            "complement_margin": pl.complement_margin,
            "lv_over_v_sup": pl.lv_over_v_sup,
            "certificate": to_json(&pl.certificate),
            "theta_star": star.theta,
            "cruc": to_json(&cruc),
            "verdict": verdict,
        }));
    }
    Ok(out)
}
