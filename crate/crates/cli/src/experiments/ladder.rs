//! Super-Lyapunov ladders and the two truncation sweeps that probe
//! uniform ergodicity: `sup_x ‖P_t(x,·) − μ‖_TV` and `sup_{x,y} p_t(x,y)`.

use ergolab_core::ergodicity::{stepped_lyapunov_check, sweep_trend, TrendRule};
use ergolab_core::ladder::{build_ladder, ExpPowerW, LadderVerdict, Schedule, WConvention};
use ergolab_core::lyapunov::Candidate;
use serde::Deserialize;
use serde_json::{json, Value};

use super::{profile_points, Ctx, Prepped};
use crate::error::{CliResult, Context};
use crate::output::{to_json, Outcome, Table};

pub const EXERCISES: &[&str] = &[
    "summable super-Lyapunov ladder implies the process comes down from infinity",
    "coming down from infinity gives uniform exponential ergodicity in total variation",
    "ultraboundedness of the semigroup",
];

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Expect {
    pub verdict: Option<LadderVerdict>,
    /// Expected log-log slope of the terms.
    pub term_slope: Option<f64>,
    /// Relative tolerance on `term_slope`.
    pub slope_tolerance: Option<f64>,
    /// Bound on every term beyond `k = 40`.
    pub increment_bound: Option<f64>,
    pub ultrabounded: Option<bool>,
    pub uniform_tv: Option<bool>,
}

/// Per-scenario overrides, matched by position.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioParams {
    pub w: Option<ExpPowerW>,
    pub schedule: Option<Schedule>,
    pub convention: Option<WConvention>,
    pub stepped_u: Option<[f64; 2]>,
    pub expect: Expect,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub w: ExpPowerW,
    pub schedule: Schedule,
    pub convention: WConvention,
    pub k0: usize,
    pub k_max: usize,
    /// Time for the uniform TV sweep.
    pub tv_t: f64,
    /// Time for the kernel sweep.
    pub kernel_t: f64,
    pub radius_factors: Vec<f64>,
    pub starts: usize,
    pub probe_tv: bool,
    pub probe_kernel: bool,
    /// Time for the advisory check that `P_t W` is again a Lyapunov
    /// function off `stepped_u`; skipped when absent.
    pub stepped_t: Option<f64>,
    pub stepped_u: [f64; 2],
    pub per_scenario: Vec<ScenarioParams>,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            w: ExpPowerW { a: 0.5, p: 2.0 },
            schedule: Schedule::ExpPower { power: 1.0 },
            convention: WConvention::Annulus,
            k0: 1,
            k_max: 80,
            tv_t: 1.0,
            kernel_t: 0.5,
            radius_factors: vec![1.0, 1.5, 2.0],
            starts: 64,
            probe_tv: true,
            probe_kernel: true,
            stepped_t: None,
            stepped_u: [-1.0, 1.0],
            per_scenario: Vec::new(),
        }
    }
}

pub fn validate(p: &Params, scenarios: &[Prepped]) -> Result<(), String> {
    if !p.per_scenario.is_empty() && p.per_scenario.len() != scenarios.len() {
        return Err(format!("per_scenario has {} entries for {} scenarios", p.per_scenario.len(), scenarios.len()));
    }
    for w in std::iter::once(&p.w).chain(p.per_scenario.iter().filter_map(|s| s.w.as_ref())) {
        ExpPowerW::new(w.a, w.p).map_err(|e| e.to_string())?;
    }
    if p.radius_factors.len() < 3 || p.radius_factors.windows(2).any(|w| w[1] <= w[0]) {
        return Err("radius_factors needs at least three increasing entries".into());
    }
    Ok(())
}

pub fn run(ctx: &Ctx, p: &Params) -> CliResult<Outcome> {
    let mut out = Outcome::new(Table::quantities());
    let default_sp = ScenarioParams::default();
    for (idx, sc) in ctx.scenarios.iter().enumerate() {
        let l = sc.label.as_str();
        let start = out.checks.len();
        let sp = p.per_scenario.get(idx).unwrap_or(&default_sp);
        let w = sp.w.unwrap_or(p.w);
        let schedule = sp.schedule.unwrap_or(p.schedule);
        let convention = sp.convention.unwrap_or(p.convention);
        let su = sp.stepped_u.unwrap_or(p.stepped_u);
        let rep = build_ladder(&sc.scenario.potential, w, schedule, convention, p.k0, p.k_max)
            .ctx(|| format!("{l}: ladder"))?;
        let ex = &sp.expect;
        if let Some(v) = ex.verdict {
            out.check(l, "ladder verdict", rep.verdict == v, rep.tail_slope, format!("{:?}, expected {:?}", rep.verdict, v));
        }
        if let Some(m) = ex.term_slope {
            let tol = ex.slope_tolerance.unwrap_or(0.2);
            let sl = rep.tail_slope.unwrap_or(f64::NAN);
            out.check(
                l,
                "term decay slope",
                (sl - m).abs() <= tol * m.abs(),
                Some(sl),
                format!("expected {m} within {}%", 100.0 * tol),
            );
        }
        if let Some(b) = ex.increment_bound {
            let inc = rep.max_increment_beyond_40.unwrap_or(f64::INFINITY);
            out.check(l, "partial-sum increments beyond k = 40", inc < b, Some(inc), format!("bound {b}"));
        }
        out.quantity(l, "tail_slope", rep.tail_slope.unwrap_or(f64::NAN));
        if let Some(last) = rep.rows.last() {
            out.quantity(l, "partial_sum", last.partial_sum);
        }
        if let Some(e) = rep.limit_estimate {
            out.quantity(l, "limit_estimate", e);
        }
        let ks: Vec<f64> = rep.rows.iter().map(|r| r.k as f64).collect();
        out.plot(l, "ladder_terms", ["k", "term"], profile_points(&ks, &rep.rows.iter().map(|r| r.term).collect::<Vec<_>>()));
        out.plot(
            l,
            "ladder_partial_sums",
            ["k", "S_K"],
            profile_points(&ks, &rep.rows.iter().map(|r| r.partial_sum).collect::<Vec<_>>()),
        );

        let r0 = sc.scenario.radius();
        let radii: Vec<f64> = p.radius_factors.iter().map(|f| f * r0).collect();
        let mut tv = Value::Null;
        if p.probe_tv || ex.uniform_tv.is_some() {
            let (trend, profiles) = sweep_trend(&sc.scenario, ctx.n, p.tv_t, &radii, p.starts, TrendRule::TvFlattening)
                .ctx(|| format!("{l}: uniform TV sweep"))?;
            if let Some(want) = ex.uniform_tv {
                out.check(
                    l,
                    "uniform TV trend",
                    trend.bounded == want,
                    Some(trend.extrapolated),
                    format!("sups {:?}", trend.sups),
                );
            }
            for (r, pr) in radii.iter().zip(&profiles) {
                out.plot(l, &format!("tv_R{r:.4}"), ["x", "tv"], profile_points(&pr.x, &pr.value));
            }
            out.quantity(l, "tv_sup_extrapolated", trend.extrapolated);
            tv = to_json(&trend);
        }
        let mut kernel = Value::Null;
        if p.probe_kernel || ex.ultrabounded.is_some() {
            let (trend, profiles) =
                sweep_trend(&sc.scenario, ctx.n, p.kernel_t, &radii, p.starts, TrendRule::KernelBounded)
                    .ctx(|| format!("{l}: kernel sweep"))?;
            if let Some(want) = ex.ultrabounded {
                out.check(
                    l,
                    "kernel bound trend",
                    trend.bounded == want,
                    Some(trend.growth),
                    format!("sups {:?}", trend.sups),
                );
            }
            for (r, pr) in radii.iter().zip(&profiles) {
                out.plot(l, &format!("kernel_R{r:.4}"), ["x", "sup_y_p_t"], profile_points(&pr.x, &pr.value));
            }
            out.quantity(l, "kernel_sup_growth", trend.growth);
            kernel = to_json(&trend);
        }

        // Advisory only: never turned into a check.
        let mut stepped = Value::Null;
        if let Some(t) = p.stepped_t {
            let gen = sc.generator(ctx.n)?;
            let cand = Candidate::ExpPower { a: w.a, p: w.p };
            let lw = cand.lw_over_w(&gen).unwrap_or_default();
            let rate = gen
                .nodes()
                .iter()
                .zip(&lw)
                .filter(|(x, _)| **x < su[0] || **x > su[1])
                .map(|(_, r)| -r)
                .fold(f64::INFINITY, f64::min);
            stepped = if rate.is_finite() && rate > 0.0 {
                match stepped_lyapunov_check(&gen, &cand, t, (su[0], su[1]), 0.5 * rate) {
                    Ok(c) => json!({ "t": t, "u": su, "lambda": 0.5 * rate, "certificate": to_json(&c) }),
                    Err(e) => json!({ "t": t, "error": e.to_string() }),
                }
            } else {
                json!({ "t": t, "error": "W has no positive rate off U on this grid" })
            };
        }

        let verdict = out.verdict_since(start);
        out.results.push(json!({
            "scenario": l,
            "ladder": to_json(&rep),
            "verdict_ladder": rep.verdict,
            "uniform_tv": tv,
            "ultraboundedness": kernel,
            "stepped_lyapunov": stepped,
            "verdict": verdict,
        }));
    }
    Ok(out)
}
