//! `φ`-Lyapunov pair → condition constants → moment recursion →
//! exponential integrability of `ψ²`.

use ergolab_core::integrability::{
    condition_constants, exponential_moment, moment_sequence, phi_lyap_to_poincare_check, recursion_check, Func,
    PhiLyap,
};
use ergolab_core::ladder::ExpPowerW;
use serde::Deserialize;
use serde_json::{json, Value};

use super::{profile_points, Ctx};
use crate::error::{CliResult, Context};
use crate::output::{to_json, Outcome, Table};

pub const EXERCISES: &[&str] = &[
    "phi-Lyapunov function gives a weighted Poincare inequality",
    "moment recursion for psi^2 under the gradient bounds on phi and psi",
    "exponential integrability of a' psi^2 for a' below 1/a",
];

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub w: ExpPowerW,
    pub phi: Func,
    pub psi: Func,
    /// The set `C` of the drift condition.
    pub c_set: [f64; 2],
    /// Half-widths tried for the cut-off set `K`; `0` means no cut.
    pub k_schedule: Vec<f64>,
    pub n_max: usize,
    pub a_prime: f64,
    pub cruc_functions: usize,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            w: ExpPowerW { a: 0.25, p: 2.0 },
            phi: Func::SqrtQuadratic { c0: 0.8, c2: 0.2 },
            psi: Func::AbsPower { c: 1.0, p: 1.0 },
            c_set: [-5.2, 5.2],
            k_schedule: vec![0.0],
            n_max: 30,
            a_prime: 0.25,
            cruc_functions: 100,
        }
    }
}

pub fn run(ctx: &Ctx, p: &Params) -> CliResult<Outcome> {
    let mut out = Outcome::new(Table::quantities());
    let c = (p.c_set[0], p.c_set[1]);
    for sc in ctx.scenarios {
        let l = sc.label.as_str();
        let start = out.checks.len();
        let gen = sc.generator(ctx.n)?;
        let pl = PhiLyap::exp_power(&gen, p.w.a, p.w.p, &p.phi, c).ctx(|| format!("{l}: phi-Lyapunov pair"))?;
        out.check(
            l,
            "phi-Lyapunov certificate",
            pl.certificate.valid,
            Some(pl.certificate.worst_margin),
            format!("W = {}, phi = {}, b_bar = {}", pl.design, p.phi.tag(), pl.b_bar),
        );
        let cruc = phi_lyap_to_poincare_check(&gen, &pl, p.cruc_functions, ctx.seed);
        out.cruc(l, &cruc);

        let k = condition_constants(&gen, &p.phi, &p.psi, c, pl.b_bar, &p.k_schedule)
            .ctx(|| format!("{l}: condition constants"))?;
        out.check(l, "gradient condition delta < 1", k.valid, Some(k.delta), format!("K half-width {:?}", k.k_radius));
        let m = moment_sequence(&sc.scenario, &k.psi, p.n_max);
        out.check(l, "moments log-convex", m.log_convex, None, m.warning.clone().unwrap_or_default());

        let mut recursion = Value::Null;
        let mut exp_moment = Value::Null;
        if k.valid {
            let r = recursion_check(&m, &k).ctx(|| format!("{l}: recursion"))?;
            out.check(
                l,
                "moment recursion",
                r.passed,
                Some(r.worst_slack),
                format!("checked to n = {}, a observed {} vs a {}", r.max_n, r.a_observed, r.a_formula),
            );
            let admissible = p.a_prime < k.a_prime_max;
            out.check(l, "a' below 1/a", admissible, Some(p.a_prime), format!("1/a = {}", k.a_prime_max));
            if admissible {
                let e = exponential_moment(&sc.scenario, &k.psi, p.a_prime, &m, Some(k.a), Some(r.c_fit))
                    .ctx(|| format!("{l}: exponential moment"))?;
                out.check(
                    l,
                    "exponential moment by quadrature and by series",
                    e.consistent,
                    Some(e.direct - e.series),
                    format!("direct {}, series {}, tail bound {}", e.direct, e.series, e.tail_bound),
                );
                out.quantity(l, "exp_moment_direct", e.direct);
                out.quantity(l, "exp_moment_series", e.series);
                exp_moment = to_json(&e);
            }
            recursion = to_json(&r);
        }
        out.quantity(l, "a", k.a);
        out.quantity(l, "a_prime_max", k.a_prime_max);
        out.quantity(l, "cruc_worst_slack", cruc.worst_slack);
        let ns: Vec<f64> = (0..m.ln_beta.len()).map(|n| n as f64).collect();
        out.plot(l, "ln_beta", ["n", "ln_beta"], profile_points(&ns, &m.ln_beta));
        let verdict = out.verdict_since(start);
        out.results.push(json!({
            "scenario": l,
            "phi_lyapunov": to_json(&pl),
            "constants": to_json(&k),
            "moments": to_json(&m),
            "recursion": recursion,
            "exp_moment": exp_moment,
            "cruc": to_json(&cruc),
            "verdict": verdict,
        }));
    }
    Ok(out)
}
