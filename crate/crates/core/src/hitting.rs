//! Exponential moments `E_x exp(∫₀^{T_U} θh(X_s) ds)` of hitting times, by a
//! Feynman–Kac linear solve and by Monte Carlo simulation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{DirichletRestriction, DiscreteGenerator};
use crate::numerics::quadrature::log_sum_exp;
use crate::numerics::tridiag::TridiagLu;
use crate::scenario::Scenario;

/// Weight `h ≥ 0` in the exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weight {
    One,
    /// `|x|^p`
    AbsPower { p: f64 },
}

impl Weight {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Weight::One => 1.0,
            Weight::AbsPower { p } => x.abs().powf(*p),
        }
    }

    pub fn on_nodes(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&t| self.eval(t)).collect()
    }

    pub fn tag(&self) -> String {
        match self {
            Weight::One => "1".into(),
            Weight::AbsPower { p } => format!("|x|^{p}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FkSolution {
    /// `w` on every node; 1 on the absorbing set.
    pub w: Vec<f64>,
    /// Residual of the free-node equations relative to the boundary data.
    pub rel_residual: f64,
}

fn check_weight(h: &[f64]) -> Result<()> {
    if let Some(v) = h.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("weight h must be finite and >= 0, found {v}")));
    }
    Ok(())
}

/// Solve `Lw + θhw = 0` off `U`, `w = 1` on `U`, reflecting at the outer ends.
pub fn fk_moment(gen: &DiscreteGenerator, u: (f64, f64), h: &[f64], theta: f64) -> Result<FkSolution> {
    let r = gen.restriction(u.0, u.1)?;
    fk_on_restriction(gen, &r, h, theta)
}

pub fn fk_on_restriction(gen: &DiscreteGenerator, r: &DirichletRestriction, h: &[f64], theta: f64) -> Result<FkSolution> {
    check_weight(h)?;
    if !(theta >= 0.0) {
        return Err(Error::InvalidParameter(format!("theta must be >= 0, got {theta}")));
    }
    if r.negative_count(theta, h) > 0 {
        let critical = critical_on_restriction(r, h)?;
        return Err(Error::AboveThreshold { theta, critical });
    }
    let (lo, dg, up) = (gen.lower(), gen.diag(), gen.upper());
    let n = gen.len();
    let m = r.free.len();
    let mut a_lo = vec![0.0; m];
    let mut a_d = vec![0.0; m];
    let mut a_up = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    for (k, &i) in r.free.iter().enumerate() {
        a_d[k] = -dg[i] - theta * h[i];
        if i > 0 {
            if r.absorbing[i - 1] {
                rhs[k] += lo[i];
            } else {
                a_lo[k] = -lo[i];
            }
        }
        if i + 1 < n {
            if r.absorbing[i + 1] {
                rhs[k] += up[i];
            } else {
                a_up[k] = -up[i];
            }
        }
    }
    // Compressed neighbours that are not grid neighbours are decoupled.
    for k in 1..m {
        if r.free[k] != r.free[k - 1] + 1 {
            a_lo[k] = 0.0;
            a_up[k - 1] = 0.0;
        }
    }
    let lu = TridiagLu::new(&a_lo, &a_d, &a_up)?;
    let expand = |wf: &[f64]| {
        let mut w = vec![1.0; n];
        for (k, &i) in r.free.iter().enumerate() {
            w[i] = wf[k];
        }
        w
    };
    // Residual of −Lw − θhw = 0 on free nodes, in difference form.
    let residual = |w: &[f64]| -> Vec<f64> {
        let lw = gen.apply(w);
        r.free.iter().map(|&i| lw[i] + theta * h[i] * w[i]).collect()
    };
    let scale = rhs.iter().fold(0.0_f64, |a, b| a.max(b.abs())).max(f64::MIN_POSITIVE);
    let mut wf = lu.solve(&rhs);
    let mut w = expand(&wf);
    let mut res = residual(&w);
    let mut rn = res.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    for _ in 0..4 {
        let corr = lu.solve(&res);
        let cand: Vec<f64> = wf.iter().zip(&corr).map(|(a, b)| a + b).collect();
        let cw = expand(&cand);
        let cr = residual(&cw);
        let cn = cr.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        if cn >= rn {
            break;
        }
        wf = cand;
        w = cw;
        res = cr;
        rn = cn;
    }
    if let Some(i) = w.iter().position(|v| !(*v >= 1.0 - 1e-9) || !v.is_finite()) {
        return Err(Error::NotPositive(format!("Feynman-Kac solution {} < 1 at x = {}", w[i], gen.nodes()[i])));
    }
    Ok(FkSolution { w, rel_residual: rn / scale })
}

/// Smallest `θ` for which `−L − θh` restricted to `U^c` stops being
/// positive definite, by bisection on Sturm inertia.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalTheta {
    pub theta: f64,
    /// Free nodes where `h = 0`; those directions carry no θ-weight.
    pub h_zero_nodes: usize,
}

pub fn critical_theta(gen: &DiscreteGenerator, u: (f64, f64), h: &[f64]) -> Result<CriticalTheta> {
    check_weight(h)?;
    let r = gen.restriction(u.0, u.1)?;
    let theta = critical_on_restriction(&r, h)?;
    let h_zero_nodes = r.free.iter().filter(|&&i| h[i] == 0.0).count();
    Ok(CriticalTheta { theta, h_zero_nodes })
}

fn critical_on_restriction(r: &DirichletRestriction, h: &[f64]) -> Result<f64> {
    if r.free.iter().all(|&i| h[i] == 0.0) {
        return Err(Error::DegenerateSet("weight h vanishes on the whole complement of U".into()));
    }
    let mut hi = 1.0;
    while r.negative_count(hi, h) == 0 {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::DegenerateSet("no finite threshold: h-weighted problem degenerate".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-14 * hi || mid == lo || mid == hi {
            break;
        }
        if r.negative_count(mid, h) == 0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `W_{θ,p} = E_x e^{(θ/p)T_U}` and `∫ W^p dμ`.
#[derive(Debug, Clone, Serialize)]
pub struct LpMembership {
    pub p: f64,
    pub theta: f64,
    pub integral: f64,
    /// Share of the integral from the outer tenth of the grid on each side.
    pub outer_share: f64,
    pub finite: bool,
}

pub fn lp_membership_of_moment(gen: &DiscreteGenerator, u: (f64, f64), theta: f64, p: f64) -> Result<LpMembership> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("p must be >= 1, got {p}")));
    }
    let one = vec![1.0; gen.len()];
    let r = gen.restriction(u.0, u.1)?;
    let star = r.principal_eigenvalue();
    if theta / p >= star {
        return Err(Error::AboveThreshold { theta: theta / p, critical: star });
    }
    let w = fk_on_restriction(gen, &r, &one, theta / p)?.w;
    let ln_terms: Vec<f64> = gen.log_mass().iter().zip(&w).map(|(l, v)| l + p * v.ln()).collect();
    let ln_total = log_sum_exp(ln_terms.iter().copied());
    let n = gen.len();
    let k = n / 10;
    let outer = log_sum_exp(ln_terms.iter().enumerate().filter(|(i, _)| *i < k || *i >= n - k).map(|(_, v)| *v));
    let outer_share = (outer - ln_total).exp();
    Ok(LpMembership { p, theta, integral: ln_total.exp(), outer_share, finite: ln_total.is_finite() && outer_share < 1e-3 })
}

/// Monte Carlo settings beyond the query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    /// Crossing probability of the Brownian bridge between steps.
    pub bridge: bool,
    /// Path-time cap; paths still running are counted and stopped.
    pub time_cap: f64,
}

impl McOptions {
    /// Cap `50/θ*` as a default.
    pub fn new(n_paths: usize, dt: f64, seed: u64, theta_star: f64) -> Self {
        Self { n_paths, dt, seed, bridge: false, time_cap: 50.0 / theta_star }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct McEstimate {
    pub x: f64,
    pub theta: f64,
    pub h_tag: String,
    pub estimate: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub dt: f64,
    /// Paths that touched an outer truncation boundary.
    pub truncation_hits: usize,
    pub seed: u64,
    pub capped_paths: usize,
    /// Hill estimate of the tail index of `exp(∫θh)`.
    pub tail_index: f64,
    pub possibly_divergent: bool,
}

impl McEstimate {
    pub const CSV_HEADER: &'static str = "x,theta,h_tag,estimate,stderr,n_paths,dt,truncation_hits,seed";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.x, self.theta, self.h_tag, self.estimate, self.stderr, self.n_paths, self.dt, self.truncation_hits, self.seed
        )
    }
}

struct PathOutcome {
    log_value: f64,
    touched_edge: bool,
    capped: bool,
}

fn run_path(
    s: &Scenario,
    u: (f64, f64),
    weight: Weight,
    theta: f64,
    x0: f64,
    opts: &McOptions,
    index: u64,
) -> PathOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(index);
    let dt = opts.dt;
    let sd = (2.0 * dt).sqrt();
    let (lo, hi) = (s.x_lo, s.x_hi);
    let inside = |x: f64| x >= u.0 && x <= u.1;
    let mut x = x0;
    let mut a = 0.0;
    let mut t = 0.0;
    let mut touched = false;
    if inside(x) {
        return PathOutcome { log_value: 0.0, touched_edge: false, capped: false };
    }
    loop {
        if t >= opts.time_cap {
            return PathOutcome { log_value: a, touched_edge: touched, capped: true };
        }
        a += theta * weight.eval(x) * dt;
        let z: f64 = rng.sample(StandardNormal);
        let mut xn = x - s.potential.dv(x) * dt + sd * z;
        if xn > hi {
            xn = (2.0 * hi - xn).max(lo);
            touched = true;
        } else if xn < lo {
            xn = (2.0 * lo - xn).min(hi);
            touched = true;
        }
        t += dt;
        let crossed = inside(xn) || (x < u.0 && xn > u.1) || (x > u.1 && xn < u.0);
        let bridged = opts.bridge && !crossed && {
            // distances to the nearer edge of U from both endpoints
            let edge = if x > u.1 { u.1 } else { u.0 };
            let d1 = (x - edge).abs();
            let d2 = (xn - edge).abs();
            let p = (-d1 * d2 / dt).exp();
            rng.random::<f64>() < p
        };
        if crossed || bridged {
            return PathOutcome { log_value: a, touched_edge: touched, capped: false };
        }
        x = xn;
    }
}

/// Hill estimator of the tail index from log-values, using the top `k`.
fn hill(log_values: &[f64], k: usize) -> f64 {
    let mut v = log_values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    if k + 1 > v.len() {
        return f64::INFINITY;
    }
    let base = v[k];
    let s: f64 = v[..k].iter().map(|l| l - base).sum();
    if s <= 0.0 {
        f64::INFINITY
    } else {
        k as f64 / s
    }
}

/// Euler–Maruyama estimate of `E_x exp(∫₀^{T_U} θh(X_s) ds)`.
///
/// Each path draws from its own ChaCha stream keyed by `(seed, path)`, and
/// outcomes are reduced in path order, so the result does not depend on
/// the number of worker threads.
pub fn mc_moment(
    s: &Scenario,
    u: (f64, f64),
    weight: Weight,
    theta: f64,
    x0: f64,
    opts: &McOptions,
) -> Result<McEstimate> {
    if opts.n_paths < 1000 {
        return Err(Error::InvalidParameter(format!("n_paths must be >= 1000, got {}", opts.n_paths)));
    }
    if !(opts.dt > 0.0) || !(theta >= 0.0) || !(opts.time_cap > 0.0) {
        return Err(Error::InvalidParameter("need dt > 0, theta >= 0 and a positive time cap".into()));
    }
    if !(u.1 > u.0) || u.0 <= s.x_lo && u.1 >= s.x_hi {
        return Err(Error::DegenerateSet(format!("target set ({}, {}) must be a proper interval", u.0, u.1)));
    }
    if x0 < s.x_lo || x0 > s.x_hi {
        return Err(Error::InvalidParameter(format!("start {x0} outside the domain")));
    }
    let outcomes: Vec<PathOutcome> = (0..opts.n_paths as u64)
        .into_par_iter()
        .map(|i| run_path(s, u, weight, theta, x0, opts, i))
        .collect();
    let n = outcomes.len() as f64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut hits = 0;
    let mut capped = 0;
    for o in &outcomes {
        let v = o.log_value.exp();
        sum += v;
        sum_sq += v * v;
        hits += o.touched_edge as usize;
        capped += o.capped as usize;
    }
    let mean = sum / n;
    let var = ((sum_sq / n - mean * mean) * n / (n - 1.0)).max(0.0);
    let logs: Vec<f64> = outcomes.iter().map(|o| o.log_value).collect();
    let k = (n.sqrt().ceil() as usize).max(10);
    let tail_index = if theta == 0.0 { f64::INFINITY } else { hill(&logs, k) };
    Ok(McEstimate {
        x: x0,
        theta,
        h_tag: weight.tag(),
        estimate: mean,
        stderr: (var / n).sqrt(),
        n_paths: opts.n_paths,
        dt: opts.dt,
        truncation_hits: hits,
        seed: opts.seed,
        capped_paths: capped,
        tail_index,
        possibly_divergent: capped as f64 > 0.01 * n || tail_index < 1.0,
    })
}
