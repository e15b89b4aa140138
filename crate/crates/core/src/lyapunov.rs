//! Drift certificates `LW ≤ −φ²W + b·1_U` and the resolvent construction of
//! Lyapunov functions from Poincaré, log-Sobolev and F-Sobolev inequalities.
//!
//! Rates are always folded into `φ²` (so the stored `λ` is 1).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fenchel::{DualValue, FSpec};
use crate::generator::DiscreteGenerator;
use crate::numerics::quadrature::log_sum_exp;

/// A candidate Lyapunov function.
#[derive(Debug, Clone, PartialEq)]
pub enum Candidate {
    /// `e^{a|x|^p}`, differentiated in closed form.
    ExpPower { a: f64, p: f64 },
    /// Values on the grid nodes.
    Nodes { tag: String, values: Vec<f64> },
}

impl Candidate {
    pub fn tag(&self) -> String {
        match self {
            Candidate::ExpPower { a, p } => format!("exp({a}|x|^{p})"),
            Candidate::Nodes { tag, .. } => tag.clone(),
        }
    }

    pub fn values(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Candidate::ExpPower { a, p } => x.iter().map(|t| (a * t.abs().powf(*p)).exp()).collect(),
            Candidate::Nodes { values, .. } => values.clone(),
        }
    }

    /// `LW/W` in closed form, when available.
    pub fn lw_over_w(&self, gen: &DiscreteGenerator) -> Option<Vec<f64>> {
        match self {
            Candidate::ExpPower { a, p } => {
                let pot = &gen.scenario().potential;
                Some(
                    gen.nodes()
                        .iter()
                        .map(|&x| {
                            let ax = x.abs();
                            // W'/W = g, W''/W = g' + g²
                            let g = if ax == 0.0 && *p <= 1.0 { 0.0 } else { a * p * ax.powf(p - 1.0) * x.signum() };
                            let dg = if *p == 1.0 {
                                0.0
                            } else if ax == 0.0 {
                                if *p == 2.0 { 2.0 * a } else { 0.0 }
                            } else {
                                a * p * (p - 1.0) * ax.powf(p - 2.0)
                            };
                            dg + g * g - pot.dv(x) * g
                        })
                        .collect(),
                )
            }
            Candidate::Nodes { .. } => None,
        }
    }
}

/// How `LW` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LwMode {
    /// Closed form when the candidate has one, discrete otherwise.
    ClosedForm,
    Discrete,
}

/// A checked drift inequality `LW ≤ −φ²W + b·1_U` on the grid.
#[derive(Debug, Clone, Serialize)]
pub struct DriftCertificate {
    pub candidate_tag: String,
    pub lambda: f64,
    pub b: f64,
    /// Hull of the exceptional node set, `None` when it is empty.
    #[serde(rename = "U")]
    pub u: Option<[f64; 2]>,
    /// `max (LW + φ²W − b·1_U)/W` over checked nodes.
    pub worst_margin: f64,
    pub worst_x: f64,
    pub valid: bool,
    #[serde(rename = "grid_N")]
    pub grid_n: usize,
    /// `min W` on the grid.
    pub w_min: f64,
    pub tolerance: f64,
    pub mode: LwMode,
    /// `max |closed − discrete|` of `LW/W` away from the outer ends.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discrepancy: Option<f64>,
    #[serde(skip)]
    pub lw_over_w: Vec<f64>,
    #[serde(skip)]
    pub w: Vec<f64>,
}

/// Nodes of the grid lying in the closed interval `[lo, hi]` after snapping.
pub fn interval_mask(gen: &DiscreteGenerator, lo: f64, hi: f64) -> Vec<bool> {
    if !(hi > lo) {
        return vec![false; gen.len()];
    }
    let (a, b) = (gen.nearest(lo), gen.nearest(hi));
    (0..gen.len()).map(|i| i >= a && i <= b).collect()
}

fn mask_hull(gen: &DiscreteGenerator, mask: &[bool]) -> Option<[f64; 2]> {
    let first = mask.iter().position(|m| *m)?;
    let last = mask.iter().rposition(|m| *m)?;
    Some([gen.nodes()[first], gen.nodes()[last]])
}

/// Nodes within `collar` cells of a switch of `mask`.
fn collar_mask(mask: &[bool], collar: usize) -> Vec<bool> {
    let n = mask.len();
    let mut out = vec![false; n];
    if collar == 0 {
        return out;
    }
    for i in 1..n {
        if mask[i] != mask[i - 1] {
            let lo = i.saturating_sub(collar);
            let hi = (i - 1 + collar).min(n - 1);
            for o in &mut out[lo..=hi] {
                *o = true;
            }
        }
    }
    out
}

/// Check `LW ≤ −φ²W + b·1_U` on every grid node outside the collar,
/// choosing the smallest admissible `b ≥ 0`.
pub fn certify_drift(
    gen: &DiscreteGenerator,
    cand: &Candidate,
    phi2: &[f64],
    exceptional: &[bool],
    collar: usize,
    mode: LwMode,
) -> Result<DriftCertificate> {
    let n = gen.len();
    assert!(phi2.len() == n && exceptional.len() == n);
    let w = cand.values(gen.nodes());
    if w.len() != n {
        return Err(Error::InvalidParameter(format!("candidate has {} values for {n} nodes", w.len())));
    }
    if let Some(i) = w.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::NotPositive(format!("W = {} at x = {}", w[i], gen.nodes()[i])));
    }
    let discrete: Vec<f64> = gen.apply(&w).iter().zip(&w).map(|(l, w)| l / w).collect();
    let closed = cand.lw_over_w(gen);
    let discrepancy = closed.as_ref().map(|c| {
        (1..n - 1).map(|i| (c[i] - discrete[i]).abs()).fold(0.0, f64::max)
    });
    let (lw_over_w, mode) = match (mode, closed) {
        (LwMode::ClosedForm, Some(c)) => (c, LwMode::ClosedForm),
        _ => (discrete, LwMode::Discrete),
    };
    let skip = collar_mask(exceptional, collar);
    let mut b: f64 = 0.0;
    for i in 0..n {
        if exceptional[i] && !skip[i] {
            b = b.max((lw_over_w[i] + phi2[i]) * w[i]);
        }
    }
    let mut worst = f64::NEG_INFINITY;
    let mut worst_x = f64::NAN;
    for i in 0..n {
        if skip[i] {
            continue;
        }
        let m = lw_over_w[i] + phi2[i] - if exceptional[i] { b / w[i] } else { 0.0 };
        if m > worst {
            worst = m;
            worst_x = gen.nodes()[i];
        }
    }
    let scale = lw_over_w.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tolerance = 1e-9 * scale.max(f64::MIN_POSITIVE);
    Ok(DriftCertificate {
        candidate_tag: cand.tag(),
        lambda: 1.0,
        b,
        u: mask_hull(gen, exceptional),
        worst_margin: worst,
        worst_x,
        valid: worst <= tolerance,
        grid_n: gen.n(),
        w_min: w.iter().copied().fold(f64::INFINITY, f64::min),
        tolerance,
        mode,
        discrepancy,
        lw_over_w,
        w,
    })
}

/// Output of the Poincaré resolvent construction.
#[derive(Debug, Clone, Serialize)]
pub struct PoincareLyapunov {
    pub c: f64,
    pub mu_a: f64,
    pub c_p: f64,
    pub v_min: f64,
    pub rel_residual: f64,
    pub backward_error: f64,
    /// `max (Lv + cv)/v` over nodes outside `A`.
    pub complement_margin: f64,
    /// `‖Lv/v‖_∞`
    pub lv_over_v_sup: f64,
    pub certificate: DriftCertificate,
    #[serde(skip)]
    pub v: Vec<f64>,
}

impl PoincareLyapunov {
    /// Worst margin on `A^c` within `10⁻⁶‖Lv/v‖_∞`.
    pub fn complement_ok(&self) -> bool {
        self.complement_margin <= 1e-6 * self.lv_over_v_sup
    }
}

/// `c = μ(A)·min(1/(4C_P), 1/8)`.
pub fn poincare_c(mu_a: f64, c_p: f64) -> f64 {
    mu_a * (0.25 / c_p).min(0.125)
}

/// Solve `(−L + 1_A − c)v = 1` and check `Lv ≤ −cv` off `A`.
pub fn construct_poincare_lyapunov(gen: &DiscreteGenerator, a: (f64, f64), c_p: f64) -> Result<PoincareLyapunov> {
    if !(c_p > 0.0) {
        return Err(Error::InvalidParameter(format!("C_P must be > 0, got {c_p}")));
    }
    let mu_a = gen.scenario().measure_of_set(a.0, a.1);
    if mu_a.empty || !(mu_a.value > 0.0) {
        return Err(Error::DegenerateSet(format!("mu(A) = 0 for A = ({}, {})", a.0, a.1)));
    }
    let c = poincare_c(mu_a.value, c_p);
    let in_a = interval_mask(gen, a.0, a.1);
    let phi: Vec<f64> = in_a.iter().map(|&m| if m { 1.0 - c } else { -c }).collect();
    let sol = gen.resolvent_solve(&phi, &vec![1.0; gen.len()])?;
    let v = sol.v;
    let v_min = v.iter().copied().fold(f64::INFINITY, f64::min);
    if !(v_min > 0.0) {
        return Err(Error::NotPositive(format!("resolvent solution has min v = {v_min}")));
    }
    let lv = gen.apply(&v);
    let mut margin = f64::NEG_INFINITY;
    let mut sup: f64 = 0.0;
    for i in 0..gen.len() {
        let r = lv[i] / v[i];
        sup = sup.max(r.abs());
        if !in_a[i] {
            margin = margin.max(r + c);
        }
    }
    let cert = certify_drift(
        gen,
        &Candidate::Nodes { tag: "poincare-resolvent".into(), values: v.clone() },
        &vec![c; gen.len()],
        &in_a,
        0,
        LwMode::Discrete,
    )?;
    Ok(PoincareLyapunov {
        c,
        mu_a: mu_a.value,
        c_p,
        v_min,
        rel_residual: sol.rel_residual,
        backward_error: sol.backward_error,
        complement_margin: margin,
        lv_over_v_sup: sup,
        certificate: cert,
        v,
    })
}

/// Output of the log-Sobolev and F-Sobolev resolvent constructions.
#[derive(Debug, Clone, Serialize)]
pub struct ResolventLyapunov {
    /// `ρ = 1/(2C)`
    pub rho: f64,
    pub b: f64,
    /// `ε/(2C)`, the certified rate in front of `h`.
    pub rate: f64,
    pub epsilon: f64,
    pub v_min: f64,
    pub rel_residual: f64,
    pub backward_error: f64,
    /// Whether `U_ε(h) = {(1−ε)h ≥ b}` contains any grid node.
    pub region_empty: bool,
    pub certificate: DriftCertificate,
    #[serde(skip)]
    pub v: Vec<f64>,
    #[serde(skip)]
    pub region: Vec<bool>,
}

/// Share of `Σ m_i e^{ln_f_i}` carried by the outer tenth of the grid on
/// each side. Values that are not small mean the integral is not resolved
/// at this truncation.
fn outer_share(gen: &DiscreteGenerator, ln_integrand: &[f64], ln_total: f64) -> f64 {
    let n = gen.len();
    let k = n / 10;
    let outer = log_sum_exp(
        gen.log_mass()
            .iter()
            .zip(ln_integrand)
            .enumerate()
            .filter(|(i, _)| *i < k || *i >= n - k)
            .map(|(_, (l, f))| l + f),
    );
    (outer - ln_total).exp()
}

const OUTER_LIMIT: f64 = 1e-3;

fn resolvent_pipeline(
    gen: &DiscreteGenerator,
    h: &[f64],
    rho: f64,
    b: f64,
    epsilon: f64,
    tag: &str,
) -> Result<ResolventLyapunov> {
    let n = gen.len();
    let phi: Vec<f64> = h.iter().map(|hi| rho * (b - hi)).collect();
    let sol = gen.resolvent_solve(&phi, &vec![1.0; n])?;
    let v = sol.v;
    let v_min = v.iter().copied().fold(f64::INFINITY, f64::min);
    if !(v_min > 0.0) {
        return Err(Error::NotPositive(format!("resolvent solution has min v = {v_min}")));
    }
    let region: Vec<bool> = h.iter().map(|hi| (1.0 - epsilon) * hi >= b).collect();
    let rate = rho * epsilon;
    let phi2: Vec<f64> = h.iter().zip(&region).map(|(hi, &r)| if r { rate * hi } else { 0.0 }).collect();
    let exceptional: Vec<bool> = region.iter().map(|r| !r).collect();
    let cert = certify_drift(
        gen,
        &Candidate::Nodes { tag: tag.into(), values: v.clone() },
        &phi2,
        &exceptional,
        1,
        LwMode::Discrete,
    )?;
    Ok(ResolventLyapunov {
        rho,
        b,
        rate,
        epsilon,
        v_min,
        rel_residual: sol.rel_residual,
        backward_error: sol.backward_error,
        region_empty: !region.iter().any(|r| *r),
        certificate: cert,
        v,
        region,
    })
}

/// `φ = ρ(b − h)` with `b = 2μ(e^h)` and `ρ = 1/(2C_LS)`.
pub fn construct_entropic_lyapunov(
    gen: &DiscreteGenerator,
    h: &[f64],
    c_ls: f64,
    epsilon: f64,
) -> Result<ResolventLyapunov> {
    if !(c_ls > 0.0) || !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!("need C_LS > 0 and 0 < eps < 1, got {c_ls}, {epsilon}")));
    }
    let lm = gen.log_mass();
    let ln_total = log_sum_exp(lm.iter().zip(h).map(|(l, hi)| l + hi));
    if !ln_total.is_finite() || outer_share(gen, h, ln_total) > OUTER_LIMIT {
        return Err(Error::NotIntegrable("h not exponentially integrable".into()));
    }
    let b = 2.0 * ln_total.exp();
    resolvent_pipeline(gen, h, 0.5 / c_ls, b, epsilon, "entropic-resolvent")
}

/// `μ(G*(h))`, computed in log-space on the grid.
pub fn mu_dual(gen: &DiscreteGenerator, fspec: &FSpec, h: &[f64]) -> Result<f64> {
    use rayon::prelude::*;
    let ln_g: Vec<f64> = h.par_iter().map(|&t| fspec.ln_dual(t)).map(DualValue::ln).collect();
    if let Some(i) = ln_g.iter().position(|l| *l == f64::INFINITY || l.is_nan()) {
        return Err(Error::NotIntegrable(format!("G* diverges at h = {} (x = {})", h[i], gen.nodes()[i])));
    }
    let ln_total = log_sum_exp(gen.log_mass().iter().zip(&ln_g).map(|(l, g)| l + g));
    if ln_total == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if !ln_total.is_finite() || outer_share(gen, &ln_g, ln_total) > OUTER_LIMIT {
        return Err(Error::NotIntegrable("G*(h) not integrable at this truncation".into()));
    }
    Ok(ln_total.exp())
}

/// `φ = ρ(b − h)` with `b = 2(D_F + μ(G*(h)))` and `ρ = 1/(2C_F)`.
pub fn construct_fsobolev_lyapunov(
    gen: &DiscreteGenerator,
    fspec: &FSpec,
    h: &[f64],
    epsilon: f64,
) -> Result<ResolventLyapunov> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!("need 0 < eps < 1, got {epsilon}")));
    }
    let b = 2.0 * (fspec.d_f + mu_dual(gen, fspec, h)?);
    resolvent_pipeline(gen, h, 0.5 / fspec.c_f, b, epsilon, "fsobolev-resolvent")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Potential, Scenario, TruncationPolicy};

    fn ou() -> DiscreteGenerator {
        let s = Scenario::build(Potential::quadratic(), TruncationPolicy { radius: Some(8.0), ..Default::default() })
            .unwrap();
        DiscreteGenerator::build(&s, 4096).unwrap()
    }

    #[test]
    fn gaussian_candidate_certifies() {
        let g = ou();
        let phi2: Vec<f64> = g.nodes().iter().map(|x| x * x / 8.0).collect();
        let u = interval_mask(&g, -2.0, 2.0);
        let cand = Candidate::ExpPower { a: 0.25, p: 2.0 };
        let c = certify_drift(&g, &cand, &phi2, &u, 0, LwMode::ClosedForm).unwrap();
        assert!(c.valid, "{}", c.worst_margin);
        // b = sup over U of (LW + φ²W) = (½ − x²/8) e^{x²/4}
        let oracle = (0..=2000)
            .map(|k| {
                let x: f64 = -2.0 + 4.0 * k as f64 / 2000.0;
                (0.5 - x * x / 8.0) * (x * x / 4.0).exp()
            })
            .fold(0.0, f64::max);
        assert!((c.b - oracle).abs() < 1e-3 * oracle, "{} vs {oracle}", c.b);
        assert!(c.discrepancy.unwrap() < 1e-2);
    }

    #[test]
    fn constant_candidate_never_strict() {
        let g = ou();
        let u = interval_mask(&g, -1.0, 1.0);
        let c = certify_drift(
            &g,
            &Candidate::Nodes { tag: "one".into(), values: vec![1.0; g.len()] },
            &vec![0.1; g.len()],
            &u,
            0,
            LwMode::Discrete,
        )
        .unwrap();
        assert!(!c.valid);
    }

    #[test]
    fn nonpositive_candidate_rejected() {
        let g = ou();
        let mut w = vec![1.0; g.len()];
        w[7] = 0.0;
        let r = certify_drift(
            &g,
            &Candidate::Nodes { tag: "bad".into(), values: w },
            &vec![0.0; g.len()],
            &vec![false; g.len()],
            0,
            LwMode::Discrete,
        );
        assert!(matches!(r, Err(Error::NotPositive(_))));
    }

    #[test]
    fn poincare_construction_ou() {
        let g = ou();
        let p = construct_poincare_lyapunov(&g, (-1.0, 1.0), 1.0).unwrap();
        assert!((p.c - 0.085_336).abs() < 1e-6, "{}", p.c);
        assert!(p.v_min > 0.0);
        assert!(p.complement_ok());
        assert!(p.certificate.valid);
        assert!(p.rel_residual < 1e-10);
    }

    #[test]
    fn entropic_construction_ou() {
        let g = ou();
        let h: Vec<f64> = g.nodes().iter().map(|x| x * x / 4.0).collect();
        let r = construct_entropic_lyapunov(&g, &h, 2.0, 0.1).unwrap();
        // b = 2μ(e^{x²/4}) = 2√2
        assert!((r.b - 2.0 * 2f64.sqrt()).abs() < 1e-5, "{}", r.b);
        assert!(r.certificate.valid);
        assert!(!r.region_empty);
        let zero = vec![0.0; g.len()];
        let z = construct_entropic_lyapunov(&g, &zero, 2.0, 0.1).unwrap();
        assert!(z.region_empty && z.certificate.valid);
        let wild: Vec<f64> = g.nodes().iter().map(|x| x * x / 2.0).collect();
        assert!(matches!(construct_entropic_lyapunov(&g, &wild, 2.0, 0.1), Err(Error::NotIntegrable(_))));
    }
}
