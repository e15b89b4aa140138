//! Exponential integrability of `ψ²` from a `φ`-Lyapunov condition
//! `LW ≤ −φ²W + b·1_C`: the four condition constants, the moment sequence
//! `β_n = ∫ψ^{2n}dμ`, its two-term recursion and the resulting bound on
//! `∫e^{a′ψ²}dμ`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::DiscreteGenerator;
use crate::lyapunov::{certify_drift, interval_mask, Candidate, DriftCertificate, LwMode};
use crate::numerics::quadrature::{log_integrate, log_sum_exp};
use crate::scenario::{Family, Scenario};

/// Even closed-form functions of `x` with their derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Func {
    Constant { c: f64 },
    /// `c|x|^p`
    AbsPower { c: f64, p: f64 },
    /// `√(c0 + c2 x²)`
    SqrtQuadratic { c0: f64, c2: f64 },
    /// `√(c ln(1 + x²))`
    SqrtLog { c: f64 },
}

impl Func {
    /// `(f(x), f'(x))`
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let ax = x.abs();
        let sg = x.signum();
        match *self {
            Func::Constant { c } => (c, 0.0),
            Func::AbsPower { c, p } => {
                if p == 0.0 {
                    (c, 0.0)
                } else if ax == 0.0 {
                    let v = if p > 0.0 { 0.0 } else { f64::INFINITY };
                    let d = if p > 1.0 { 0.0 } else if p == 1.0 { c } else { f64::INFINITY };
                    (v, d * sg)
                } else {
                    (c * ax.powf(p), c * p * ax.powf(p - 1.0) * sg)
                }
            }
            Func::SqrtQuadratic { c0, c2 } => {
                let v = (c0 + c2 * x * x).sqrt();
                (v, c2 * x / v)
            }
            Func::SqrtLog { c } => {
                let l = (x * x).ln_1p();
                let v = (c * l).sqrt();
                let d = if ax == 0.0 { c.sqrt() * sg } else { c * x / ((1.0 + x * x) * v) };
                (v, d)
            }
        }
    }

    pub fn tag(&self) -> String {
        match self {
            Func::Constant { c } => format!("{c}"),
            Func::AbsPower { c, p } => format!("{c}|x|^{p}"),
            Func::SqrtQuadratic { c0, c2 } => format!("sqrt({c0}+{c2}x^2)"),
            Func::SqrtLog { c } => format!("sqrt({c}ln(1+x^2))"),
        }
    }

    /// `f(sx)`, used for scaling checks.
    pub fn scaled_value(&self, s: f64) -> Func {
        match *self {
            Func::Constant { c } => Func::Constant { c: s * c },
            Func::AbsPower { c, p } => Func::AbsPower { c: s * c, p },
            Func::SqrtQuadratic { c0, c2 } => Func::SqrtQuadratic { c0: s * s * c0, c2: s * s * c2 },
            Func::SqrtLog { c } => Func::SqrtLog { c: s * s * c },
        }
    }
}

/// `ψ` set to zero on `K = [−k, k]` with a C¹ ramp of width `w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutPsi {
    pub psi: Func,
    /// `(k, w)`, or `None` for no cut.
    pub cut: Option<(f64, f64)>,
}

impl CutPsi {
    pub fn uncut(psi: Func) -> Self {
        Self { psi, cut: None }
    }

    pub fn eval(&self, x: f64) -> (f64, f64) {
        let (v, d) = self.psi.eval(x);
        let Some((k, w)) = self.cut else { return (v, d) };
        let t = (x.abs() - k) / w;
        if t <= 0.0 {
            (0.0, 0.0)
        } else if t >= 1.0 {
            (v, d)
        } else {
            let s = t * t * (3.0 - 2.0 * t);
            let ds = 6.0 * t * (1.0 - t) / w * x.signum();
            (v * s, d * s + v * ds)
        }
    }

    /// `ln ψ²`
    fn ln_sq(&self, x: f64) -> f64 {
        let v = self.eval(x).0;
        if v == 0.0 {
            f64::NEG_INFINITY
        } else {
            2.0 * v.abs().ln()
        }
    }

    /// Points where the integrands have kinks.
    fn breaks(&self) -> Vec<f64> {
        let mut b = vec![0.0];
        if let Some((k, w)) = self.cut {
            b.extend([-k - w, -k, k, k + w]);
        }
        b.sort_by(f64::total_cmp);
        b
    }
}

/// A `φ`-Lyapunov pair checked on the grid with discrete `LW`.
#[derive(Debug, Clone, Serialize)]
pub struct PhiLyap {
    pub design: String,
    /// `b / min_{C̄} W`
    pub b_bar: f64,
    /// Hull of `C` after folding in the collar.
    pub c_hull: Option<[f64; 2]>,
    pub certificate: DriftCertificate,
    #[serde(skip)]
    pub w: Vec<f64>,
    #[serde(skip)]
    pub phi2: Vec<f64>,
    #[serde(skip)]
    pub c_mask: Vec<bool>,
}

impl PhiLyap {
    /// Recheck `(W, φ², C)` with discrete `LW` and no collar, after widening
    /// `C` by `collar` nodes on each side. The discrete inequality then holds
    /// at every node, which is what the integration by parts needs.
    pub fn from_nodes(
        gen: &DiscreteGenerator,
        design: &str,
        w: Vec<f64>,
        phi2: Vec<f64>,
        c_mask: &[bool],
        collar: usize,
    ) -> Result<Self> {
        let n = gen.len();
        let mut c = c_mask.to_vec();
        for i in 0..n {
            if c_mask[i] {
                for o in &mut c[i.saturating_sub(collar)..=(i + collar).min(n - 1)] {
                    *o = true;
                }
            }
        }
        let cert = certify_drift(
            gen,
            &Candidate::Nodes { tag: design.into(), values: w.clone() },
            &phi2,
            &c,
            0,
            LwMode::Discrete,
        )?;
        let w_min_c = w.iter().zip(&c).filter(|(_, m)| **m).map(|(v, _)| *v).fold(f64::INFINITY, f64::min);
        let b_bar = if w_min_c.is_finite() { cert.b / w_min_c } else { 0.0 };
        let c_hull = cert.u;
        Ok(Self { design: design.into(), b_bar, c_hull, certificate: cert, w, phi2, c_mask: c })
    }

    /// `W = e^{a|x|^p}`, `φ` closed form, `C` an interval.
    pub fn exp_power(gen: &DiscreteGenerator, a: f64, p: f64, phi: &Func, c: (f64, f64)) -> Result<Self> {
        let cand = Candidate::ExpPower { a, p };
        let w = cand.values(gen.nodes());
        let phi2 = gen.nodes().iter().map(|&x| phi.eval(x).0.powi(2)).collect();
        Self::from_nodes(gen, &cand.tag(), w, phi2, &interval_mask(gen, c.0, c.1), 0)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionConstants {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub b_bar: f64,
    /// `½(2β/(1−δ) + √(4β²/(1−δ)² + 4α/(1−δ)))`; any larger `a` works.
    pub a: f64,
    /// `1/a`; admissible `a′` are strictly below.
    pub a_prime_max: f64,
    pub valid: bool,
    /// Half-width of `K`, the smallest schedule entry with `δ < 1`.
    pub k_radius: Option<f64>,
    pub psi: CutPsi,
    /// Hull of the sampled points where `|φ'|²/φ⁴ ≥ 1`, when invalid.
    pub violation: Option<[f64; 2]>,
}

/// Sample points: the grid nodes plus a geometric extension to `10³R`.
fn sample_points(gen: &DiscreteGenerator) -> Vec<f64> {
    let nodes = gen.nodes();
    let (lo, hi) = (nodes[0], nodes[nodes.len() - 1]);
    let r = lo.abs().max(hi.abs()).max(1.0);
    let mut xs: Vec<f64> = nodes.to_vec();
    for j in 1..=400 {
        let f = 1000f64.powf(j as f64 / 400.0);
        xs.push(hi.max(r) * f);
        xs.push(lo.min(-r) * f);
    }
    xs
}

/// The four suprema for `ψ` cut on `K = [−k, k]` (ramp width one grid
/// cell), skipping sample points within one more cell of `K`.
fn constants_for_cut(
    gen: &DiscreteGenerator,
    xs: &[f64],
    phi: &Func,
    psi: CutPsi,
    c: (f64, f64),
    b_bar: f64,
) -> Result<ConditionConstants> {
    let h = gen.h();
    let skip = |x: f64| match psi.cut {
        Some((k, w)) => x.abs() <= k + w + h,
        None => false,
    };
    let (mut al, mut be, mut de, mut ga) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    let mut viol: Option<[f64; 2]> = None;
    for &x in xs {
        if !skip(x) {
            let (f, df) = phi.eval(x);
            if !(f > 0.0) || !f.is_finite() {
                return Err(Error::NotPositive(format!("phi = {f} at x = {x} outside K")));
            }
            let (s, ds) = psi.eval(x);
            al = al.max(s * s * ds * ds / (f * f));
            be = be.max((s * df * ds / (f * f * f)).abs());
            let d = df * df / (f * f * f * f);
            de = de.max(d);
            if d >= 1.0 {
                viol = Some(match viol {
                    None => [x, x],
                    Some([a, b]) => [a.min(x), b.max(x)],
                });
            }
        }
        if x >= c.0 && x <= c.1 {
            let f = phi.eval(x).0;
            let s = psi.eval(x).0;
            if s != 0.0 {
                ga = ga.max(s * s / (f * f));
            }
        }
    }
    let valid = de < 1.0 && al.is_finite() && be.is_finite() && ga.is_finite();
    let a = if valid {
        let bt = be / (1.0 - de);
        bt + (bt * bt + al / (1.0 - de)).sqrt()
    } else {
        f64::NAN
    };
    Ok(ConditionConstants {
        alpha: al,
        beta: be,
        gamma: ga,
        delta: de,
        b_bar,
        a,
        a_prime_max: 1.0 / a,
        valid,
        k_radius: psi.cut.map(|(k, _)| k),
        psi,
        violation: viol,
    })
}

/// Evaluate the condition constants, searching the half-width of `K` over
/// `k_schedule` (`0` meaning no cut) and keeping the first entry with
/// `δ < 1`. When none qualifies the last attempt is returned as invalid.
pub fn condition_constants(
    gen: &DiscreteGenerator,
    phi: &Func,
    psi: &Func,
    c: (f64, f64),
    b_bar: f64,
    k_schedule: &[f64],
) -> Result<ConditionConstants> {
    let xs = sample_points(gen);
    let schedule: Vec<f64> = if k_schedule.is_empty() { vec![0.0] } else { k_schedule.to_vec() };
    let mut last = None;
    for &k in &schedule {
        let cut = if k > 0.0 { CutPsi { psi: *psi, cut: Some((k, gen.h())) } } else { CutPsi::uncut(*psi) };
        match constants_for_cut(gen, &xs, phi, cut, c, b_bar) {
            Ok(cc) if cc.valid => return Ok(cc),
            Ok(cc) => last = Some(Ok(cc)),
            Err(e) => last = Some(Err(e)),
        }
    }
    last.expect("schedule is nonempty")
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentSequence {
    pub n_max: usize,
    /// `ln β_n` for `n = 0..=n_max`.
    pub ln_beta: Vec<f64>,
    /// `β_n / (n β_{n−1})` for `n ≥ 1`.
    pub ratios: Vec<f64>,
    pub rel_error: Vec<f64>,
    pub log_convex: bool,
    pub warning: Option<String>,
}

impl MomentSequence {
    pub fn beta(&self, n: usize) -> f64 {
        self.ln_beta[n].exp()
    }
}

/// Right end beyond which `log_f` stays 60 below its running maximum,
/// scanning geometrically from `start`. `None` if not reached by `limit`.
fn tail_extent<F: Fn(f64) -> f64>(log_f: F, start: f64, limit: f64) -> Option<f64> {
    let mut x = start.max(1.0);
    let mut peak = f64::NEG_INFINITY;
    while x <= limit {
        let v = log_f(x);
        peak = peak.max(v);
        if peak > f64::NEG_INFINITY && v < peak - 60.0 {
            return Some(x);
        }
        x *= 1.02;
    }
    None
}

/// `ln ∫ e^{log_f} dx` split at `breaks`, over a range that is extended
/// past the truncation for closed-form potentials. `None` if the tail is
/// not resolved.
fn ln_integral<F: Fn(f64) -> f64 + Sync>(scenario: &Scenario, log_f: F, breaks: &[f64]) -> Option<(f64, f64)> {
    let closed = !matches!(scenario.potential.family, Family::Table(_));
    let (lo, hi) = if closed {
        let hi = tail_extent(&log_f, scenario.x_hi, 1e6)?;
        let lo = -tail_extent(|x| log_f(-x), -scenario.x_lo, 1e6)?;
        (lo, hi)
    } else {
        // no extension beyond a table: demand a small edge value
        let edge = log_f(scenario.x_lo).max(log_f(scenario.x_hi));
        let mid = log_f(0.5 * (scenario.x_lo + scenario.x_hi));
        if edge > mid - 40.0 && edge > f64::NEG_INFINITY {
            return None;
        }
        (scenario.x_lo, scenario.x_hi)
    };
    let mut pts = vec![lo];
    pts.extend(breaks.iter().copied().filter(|b| *b > lo && *b < hi));
    pts.push(hi);
    let pieces: Vec<(f64, f64)> = pts.windows(2).map(|w| log_integrate(&log_f, w[0], w[1], 1e-12)).collect();
    let ln = log_sum_exp(pieces.iter().map(|p| p.0));
    let err = pieces.iter().map(|p| p.1).fold(0.0, f64::max);
    Some((ln, err))
}

/// `β_n = ∫ψ^{2n}dμ` for `n ≤ n_max`, in log space.
pub fn moment_sequence(scenario: &Scenario, psi: &CutPsi, n_max: usize) -> MomentSequence {
    let pot = &scenario.potential;
    let ln_z = scenario.ln_z;
    let breaks = psi.breaks();
    let res: Vec<Option<(f64, f64)>> = (0..=n_max)
        .into_par_iter()
        .map(|n| {
            if n == 0 {
                return Some((0.0, 0.0));
            }
            let nf = n as f64;
            ln_integral(scenario, |x| nf * psi.ln_sq(x) - pot.v(x) - ln_z, &breaks)
        })
        .collect();
    let mut warning = None;
    let mut ln_beta = Vec::new();
    let mut rel_error = Vec::new();
    for (n, r) in res.into_iter().enumerate() {
        match r {
            Some((l, e)) => {
                ln_beta.push(l);
                rel_error.push(e);
            }
            None => {
                warning = Some(format!("tail of psi^(2n) not resolved at n = {n}; n_max reduced to {}", n - 1));
                break;
            }
        }
    }
    let n_max = ln_beta.len() - 1;
    let ratios = (1..=n_max).map(|n| (ln_beta[n] - ln_beta[n - 1]).exp() / n as f64).collect();
    let log_convex = (1..n_max).all(|n| {
        let (a, b, c) = (ln_beta[n - 1], ln_beta[n], ln_beta[n + 1]);
        b == f64::NEG_INFINITY || 2.0 * b <= a + c + 1e-9 * (1.0 + b.abs())
    });
    MomentSequence { n_max, ln_beta, ratios, rel_error, log_convex, warning }
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct RecursionReport {
    pub max_n: usize,
    /// Smallest `(rhs − β_n)/rhs` of the two-term recursion, `n ≥ 2`.
    pub worst_slack: f64,
    /// Smallest slack of `β_n ≤ a_n β_{n−1}` with the explicit `a_n`.
    pub worst_slack_explicit: f64,
    /// `sup_n β_n / (n β_{n−1})`.
    pub a_observed: f64,
    pub a_formula: f64,
    /// First `n` from which `β_n ≤ a n β_{n−1}` holds throughout.
    pub n0: Option<usize>,
    /// `max β_n/(aⁿ n!)` over the first half of the range.
    pub c_fit: f64,
    /// Whether the second half obeys `β_n ≤ c aⁿ n!`.
    pub factorial_bound_holds: bool,
    pub first_violation: Option<usize>,
    pub passed: bool,
}

/// Tolerance on recursion slacks, covering quadrature error.
pub const RECURSION_TOL: f64 = 1e-6;

pub fn recursion_check(m: &MomentSequence, k: &ConditionConstants) -> Result<RecursionReport> {
    if !k.valid {
        return Err(Error::InvalidParameter("condition constants are not valid (delta >= 1)".into()));
    }
    let b = |n: usize| m.ln_beta[n].exp();
    let od = 1.0 / (1.0 - k.delta);
    let lin = |n: f64| (2.0 * n * k.beta + k.gamma * k.b_bar) * od;
    let mut worst: f64 = f64::INFINITY;
    let mut worst_explicit: f64 = f64::INFINITY;
    let mut first_violation = None;
    for n in 1..=m.n_max {
        let nf = n as f64;
        if n >= 2 {
            let rhs = k.alpha * od * nf * nf * b(n - 2) + lin(nf) * b(n - 1);
            if rhs > 0.0 {
                let s = (rhs - b(n)) / rhs;
                worst = worst.min(s);
                if s < -RECURSION_TOL && first_violation.is_none() {
                    first_violation = Some(n);
                }
            } else if b(n) > 0.0 && first_violation.is_none() {
                first_violation = Some(n);
            }
        }
        let bn1 = lin(nf + 1.0);
        let an = 0.5 * (bn1 + (bn1 * bn1 + 4.0 * k.alpha * od * (nf + 1.0).powi(2)).sqrt());
        let rhs = an * b(n - 1);
        if rhs > 0.0 {
            let s = (rhs - b(n)) / rhs;
            worst_explicit = worst_explicit.min(s);
            if s < -RECURSION_TOL && first_violation.is_none() {
                first_violation = Some(n);
            }
        }
    }
    let a_observed = m.ratios.iter().copied().filter(|r| r.is_finite()).fold(0.0, f64::max);
    let holds: Vec<bool> = m.ratios.iter().map(|r| !(*r > k.a * (1.0 + RECURSION_TOL))).collect();
    let n0 = (0..holds.len()).find(|&i| holds[i..].iter().all(|h| *h)).map(|i| i + 1);
    let ln_c_term = |n: usize| m.ln_beta[n] - n as f64 * k.a.ln() - ln_factorial(n);
    let half = m.n_max / 2;
    let ln_c = (0..=half).map(ln_c_term).fold(f64::NEG_INFINITY, f64::max);
    let factorial_bound_holds = (half + 1..=m.n_max).all(|n| ln_c_term(n) <= ln_c + RECURSION_TOL);
    Ok(RecursionReport {
        max_n: m.n_max,
        worst_slack: if worst.is_finite() { worst } else { 1.0 },
        worst_slack_explicit: if worst_explicit.is_finite() { worst_explicit } else { 1.0 },
        a_observed,
        a_formula: k.a,
        n0,
        c_fit: ln_c.exp(),
        factorial_bound_holds,
        first_violation,
        passed: first_violation.is_none(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpMoment {
    pub a_prime: f64,
    pub direct: f64,
    pub series: f64,
    /// `a′ⁿβ_n/n! / (1 − a′a)` at `n = n_max`.
    pub tail_bound: f64,
    /// `c/(1 − a′a)` with the fitted `c`.
    pub bound: Option<f64>,
    pub consistent: bool,
}

/// `∫e^{a′ψ²}dμ` by quadrature and by `Σ a′ⁿβ_n/n!`.
pub fn exponential_moment(
    scenario: &Scenario,
    psi: &CutPsi,
    a_prime: f64,
    moments: &MomentSequence,
    a: Option<f64>,
    c_fit: Option<f64>,
) -> Result<ExpMoment> {
    if !(a_prime >= 0.0) {
        return Err(Error::InvalidParameter(format!("a' must be >= 0, got {a_prime}")));
    }
    if let Some(a) = a {
        if !(a_prime * a < 1.0) {
            return Err(Error::InvalidParameter(format!("a' = {a_prime} is not below 1/a = {}", 1.0 / a)));
        }
    }
    let pot = &scenario.potential;
    let ln_z = scenario.ln_z;
    let direct = if a_prime == 0.0 {
        1.0
    } else {
        let f = |x: f64| {
            let s = psi.eval(x).0;
            a_prime * s * s - pot.v(x) - ln_z
        };
        match ln_integral(scenario, f, &psi.breaks()) {
            Some((l, _)) => l.exp(),
            None => {
                return Err(Error::Inconsistent(format!(
                    "direct quadrature of exp({a_prime} psi^2) does not converge at the truncation"
                )))
            }
        }
    };
    let terms: Vec<f64> = (0..=moments.n_max)
        .map(|n| {
            if n == 0 {
                0.0
            } else {
                n as f64 * a_prime.ln() + moments.ln_beta[n] - ln_factorial(n)
            }
        })
        .collect();
    let series = if a_prime == 0.0 { 1.0 } else { log_sum_exp(terms.iter().copied()).exp() };
    let damp = a.map(|a| 1.0 / (1.0 - a_prime * a)).unwrap_or(1.0);
    let tail_bound = if a_prime == 0.0 { 0.0 } else { terms[moments.n_max].exp() * damp };
    let bound = match (a, c_fit) {
        (Some(a), Some(c)) => Some(c / (1.0 - a_prime * a)),
        _ => None,
    };
    let consistent = (direct - series).abs() <= tail_bound + 1e-9 * direct;
    Ok(ExpMoment { a_prime, direct, series, tail_bound, bound, consistent })
}

/// Outcome of the integration-by-parts check on a `φ`-Lyapunov pair.
#[derive(Debug, Clone, Serialize)]
pub struct CrucReport {
    pub design: String,
    pub b_bar: f64,
    pub n_functions: usize,
    /// Smallest `(rhs − lhs)/max(lhs, rhs)` over the test functions.
    pub worst_slack: f64,
    /// `1 + b̄ e^{Osc_C V} |C|²/π²`
    pub holley_stroock: f64,
    /// Largest `∫h²φ²dμ / E(h)` over the `∫_C h dμ = 0` variants.
    pub hs_ratio_max: f64,
    pub passed: bool,
}

/// Slack floor for the check; it is exact on the grid up to round-off.
pub const CRUC_TOL: f64 = 1e-8;

/// Test functions: constants, low polynomial modes, bumps away from `C`,
/// and `n_random` seeded random combinations with centred variants.
fn test_functions(gen: &DiscreteGenerator, c_mask: &[bool], n_random: usize, seed: u64) -> Vec<Vec<f64>> {
    let x = gen.nodes();
    let r = x[0].abs().max(x[x.len() - 1].abs());
    let mut out: Vec<Vec<f64>> = vec![vec![1.0; x.len()]];
    for d in 1..=4 {
        out.push(x.iter().map(|t| (t / r).powi(d)).collect());
    }
    let outside: Vec<f64> = x.iter().zip(c_mask).filter(|(_, m)| !**m).map(|(t, _)| *t).collect();
    for &c in outside.iter().step_by((outside.len() / 8).max(1)) {
        out.push(x.iter().map(|t| (-(t - c).powi(2) / (2.0 * 0.05 * r * 0.05 * r)).exp()).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..n_random {
        let f: Vec<f64> = match k % 3 {
            0 => {
                let cs: Vec<f64> = (0..7).map(|_| rng.sample(StandardNormal)).collect();
                x.iter().map(|t| cs.iter().enumerate().map(|(j, c)| c * (t / r).powi(j as i32)).sum()).collect()
            }
            1 => {
                let c = rng.random_range(x[0]..x[x.len() - 1]);
                let s = r * 10f64.powf(rng.random_range(-2.0..0.0));
                x.iter().map(|t| (-(t - c).powi(2) / (2.0 * s * s)).exp()).collect()
            }
            _ => {
                let mut acc = 0.0;
                x.iter()
                    .map(|_| {
                        let z: f64 = rng.sample(StandardNormal);
                        acc += z * gen.h().sqrt();
                        acc
                    })
                    .collect()
            }
        };
        out.push(f);
    }
    out
}

/// Check `∫h²φ²dμ ≤ E(h) + b̄∫_C h²dμ` on test functions and report the
/// Holley–Stroock constant of the weighted Poincaré inequality.
pub fn phi_lyap_to_poincare_check(gen: &DiscreteGenerator, pl: &PhiLyap, n_random: usize, seed: u64) -> CrucReport {
    let m = gen.mass();
    let c = &pl.c_mask;
    let mu_c: f64 = m.iter().zip(c).filter(|(_, k)| **k).map(|(v, _)| v).sum();
    let mut fns = test_functions(gen, c, n_random, seed);
    // centred variants
    let centred: Vec<Vec<f64>> = fns
        .iter()
        .map(|f| {
            let mc: f64 = f.iter().zip(&m).zip(c).filter(|(_, k)| **k).map(|((v, w), _)| v * w).sum::<f64>();
            let shift = if mu_c > 0.0 { mc / mu_c } else { 0.0 };
            f.iter().map(|v| v - shift).collect()
        })
        .collect();
    let n_plain = fns.len();
    fns.extend(centred);
    let mut worst = f64::INFINITY;
    let mut hs_max: f64 = 0.0;
    for (j, f) in fns.iter().enumerate() {
        let lhs: f64 = f.iter().zip(&pl.phi2).zip(&m).map(|((h, p), w)| h * h * p * w).sum();
        let e = gen.dirichlet_form(f);
        let in_c: f64 = f.iter().zip(&m).zip(c).filter(|(_, k)| **k).map(|((h, w), _)| h * h * w).sum();
        let rhs = e + pl.b_bar * in_c;
        let scale = lhs.abs().max(rhs.abs());
        if scale > 0.0 {
            worst = worst.min((rhs - lhs) / scale);
        }
        if j >= n_plain && e > 1e-300 {
            hs_max = hs_max.max(lhs / e);
        }
    }
    let v: Vec<f64> = gen.nodes().iter().zip(c).filter(|(_, k)| **k).map(|(x, _)| gen.scenario().v(*x)).collect();
    let osc = v.iter().copied().fold(f64::NEG_INFINITY, f64::max) - v.iter().copied().fold(f64::INFINITY, f64::min);
    let width = pl.c_hull.map(|[a, b]| b - a).unwrap_or(0.0);
    let holley_stroock = 1.0 + pl.b_bar * osc.max(0.0).exp() * width * width / std::f64::consts::PI.powi(2);
    CrucReport {
        design: pl.design.clone(),
        b_bar: pl.b_bar,
        n_functions: fns.len(),
        worst_slack: worst,
        holley_stroock,
        hs_ratio_max: hs_max,
        passed: worst >= -CRUC_TOL,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Potential, TruncationPolicy};

    fn gauss() -> (Scenario, DiscreteGenerator) {
        let s = Scenario::build(Potential::quadratic(), TruncationPolicy::default()).unwrap();
        let g = DiscreteGenerator::build(&s, 4096).unwrap();
        (s, g)
    }

    fn double_factorial(n: usize) -> f64 {
        (1..=n).map(|k| (2 * k - 1) as f64).product()
    }

    #[test]
    fn gaussian_moments_are_double_factorials() {
        let (s, _) = gauss();
        let m = moment_sequence(&s, &CutPsi::uncut(Func::AbsPower { c: 1.0, p: 1.0 }), 30);
        assert_eq!(m.n_max, 30);
        assert!((m.beta(5) - 945.0).abs() < 945.0 * 1e-9);
        for n in 0..=15 {
            let want = double_factorial(n);
            assert!((m.beta(n) / want - 1.0).abs() < 1e-8, "n = {n}: {}", m.beta(n));
        }
        assert!(m.log_convex);
    }

    #[test]
    fn zero_psi_has_zero_moments() {
        let (s, g) = gauss();
        let m = moment_sequence(&s, &CutPsi::uncut(Func::Constant { c: 0.0 }), 5);
        assert!(m.ln_beta[1..].iter().all(|l| *l == f64::NEG_INFINITY));
        let k = condition_constants(&g, &Func::Constant { c: 1.0 }, &Func::Constant { c: 0.0 }, (-1.0, 1.0), 1.0, &[0.0])
            .unwrap();
        let r = recursion_check(&m, &k).unwrap();
        assert!(r.passed);
    }

    #[test]
    fn constant_phi_lipschitz_psi() {
        let (_, g) = gauss();
        let k = condition_constants(&g, &Func::Constant { c: 0.5 }, &Func::AbsPower { c: 1.0, p: 1.0 }, (-1.0, 1.0), 1.0, &[0.0])
            .unwrap();
        assert!(k.valid);
        assert_eq!(k.delta, 0.0);
        assert_eq!(k.beta, 0.0);
        // ψ²/φ² = 4x² on C = [−1, 1], sampled at the last node inside
        assert!(k.gamma <= 4.0 && k.gamma > 4.0 * (1.0 - 2.0 * g.h()), "{}", k.gamma);
        // β = 0, δ = 0 leaves a = √α
        assert!((k.a - k.alpha.sqrt()).abs() < 1e-12 * k.a);
    }

    #[test]
    fn power_family_chain_with_cut() {
        // V = |x|³, W = e^{|x|³/2}: LW/W + x⁴ = 3|x| − 1.25x⁴ ≤ 0 for |x| ≥ 1.34
        let s = Scenario::build(Potential::power(3.0).unwrap(), TruncationPolicy::default()).unwrap();
        let g = DiscreteGenerator::build(&s, 4096).unwrap();
        let phi = Func::AbsPower { c: 1.0, p: 2.0 };
        let pl = PhiLyap::exp_power(&g, 0.5, 3.0, &phi, (-1.45, 1.45)).unwrap();
        assert!(pl.certificate.valid, "{}", pl.certificate.worst_margin);
        let psi = Func::AbsPower { c: 1.0, p: 1.5 };
        let k = condition_constants(&g, &phi, &psi, (-1.45, 1.45), pl.b_bar, &[0.0, 0.5, 1.0, 1.3, 1.5]).unwrap();
        assert!(k.valid);
        assert_eq!(k.k_radius, Some(1.3));
        let m = moment_sequence(&s, &k.psi, 30);
        assert_eq!(m.n_max, 30);
        let r = recursion_check(&m, &k).unwrap();
        assert!(r.passed, "{r:?}");
        let cr = phi_lyap_to_poincare_check(&g, &pl, 100, 11);
        assert!(cr.passed, "{}", cr.worst_slack);
    }

    #[test]
    fn cauchy_branch_needs_k() {
        let s = Scenario::build(Potential::cauchy(2.0).unwrap(), TruncationPolicy { radius: Some(50.0), ..Default::default() })
            .unwrap();
        let g = DiscreteGenerator::build(&s, 1024).unwrap();
        // φ² = 2/|x|: |φ'|²/φ⁴ = 1/(8|x|)
        let phi = Func::AbsPower { c: 2f64.sqrt(), p: -0.5 };
        let psi = Func::SqrtLog { c: 1.0 };
        let k = condition_constants(&g, &phi, &psi, (-2.0, 2.0), 1.0, &[0.0, 0.25]).unwrap();
        assert!(k.valid);
        assert_eq!(k.k_radius, Some(0.25));
        assert!(k.delta < 1.0 && k.alpha.is_finite() && k.beta.is_finite());
    }

    #[test]
    fn gaussian_chain() {
        let (s, g) = gauss();
        // LW/W = ½ − x²/4 for W = e^{x²/4}; φ² = 0.2(4 + x²) holds off |x| < 5.1
        let phi = Func::SqrtQuadratic { c0: 0.8, c2: 0.2 };
        let pl = PhiLyap::exp_power(&g, 0.25, 2.0, &phi, (-5.2, 5.2)).unwrap();
        assert!(pl.certificate.valid, "{}", pl.certificate.worst_margin);
        let psi = Func::AbsPower { c: 1.0, p: 1.0 };
        let k = condition_constants(&g, &phi, &psi, (-5.2, 5.2), pl.b_bar, &[0.0]).unwrap();
        assert!(k.valid && k.a_prime_max > 0.25, "{k:?}");
        let m = moment_sequence(&s, &k.psi, 30);
        let r = recursion_check(&m, &k).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.a_observed < 2.0);
        let e = exponential_moment(&s, &k.psi, 0.25, &m, Some(k.a), Some(r.c_fit)).unwrap();
        assert!((e.direct - 2f64.sqrt()).abs() < 1e-6, "{}", e.direct);
        assert!((e.series - 2f64.sqrt()).abs() < 1e-6, "{}", e.series);
        assert!(e.consistent);
        let cr = phi_lyap_to_poincare_check(&g, &pl, 100, 7);
        assert!(cr.passed, "{}", cr.worst_slack);
    }

    #[test]
    fn exp_moment_at_zero_is_one() {
        let (s, _) = gauss();
        let psi = CutPsi::uncut(Func::AbsPower { c: 1.0, p: 1.0 });
        let m = moment_sequence(&s, &psi, 10);
        let e = exponential_moment(&s, &psi, 0.0, &m, None, None).unwrap();
        assert_eq!(e.direct, 1.0);
        assert_eq!(e.series, 1.0);
    }
}
