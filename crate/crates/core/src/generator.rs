//! μ-symmetric finite-difference generator on a uniform grid.
//!
//! The stencil is in divergence form,
//!
//! ```text
//! (Lf)_i = [a_{i+½}(f_{i+1} − f_i) − a_{i−½}(f_i − f_{i−1})] / (h m_i)
//! ```
//!
//! with face weights `a = e^{-V}/Z` at cell faces and `m_i` the μ-mass of the
//! cell around node `i`. Both ends are reflecting (no flux through the outer
//! faces). Then `m_i L_ij = m_j L_ji` holds by construction and
//! `⟨f, −Lf⟩_μ = Σ a_{i+½}(f_{i+1} − f_i)²/h`.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::numerics::quadrature::log_sum_exp;
use crate::numerics::tridiag::{kth_eigenvalue, sturm_count, TridiagLu};
use crate::scenario::Scenario;

pub const DEFAULT_N: usize = 4096;
pub const MIN_N: usize = 64;

#[derive(Debug, Clone)]
pub struct DiscreteGenerator {
    scenario: Scenario,
    x: Vec<f64>,
    h: f64,
    /// normalized ln m_i
    log_mass: Vec<f64>,
    /// normalized ln a_{i+½}, one per interior face
    log_face: Vec<f64>,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl DiscreteGenerator {
    /// Build on `n` uniform intervals (`n + 1` nodes) covering the scenario
    /// domain.
    pub fn build(scenario: &Scenario, n: usize) -> Result<Self> {
        if n < MIN_N {
            return Err(Error::InvalidParameter(format!("grid needs N >= {MIN_N}, got {n}")));
        }
        let (lo, hi) = (scenario.x_lo, scenario.x_hi);
        let h = (hi - lo) / n as f64;
        let x: Vec<f64> = (0..=n).map(|i| if i == n { hi } else { lo + i as f64 * h }).collect();
        let lrho = |t: f64| -scenario.v(t);

        // Cell masses by Simpson on [x_{i-½}, x_{i+½}] (half cells at the ends).
        let mut log_m = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let a = if i == 0 { x[0] } else { x[i] - 0.5 * h };
            let b = if i == n { x[n] } else { x[i] + 0.5 * h };
            let w = (b - a) / 6.0;
            let l = w.ln() + log_sum_exp([lrho(a), 4f64.ln() + lrho(0.5 * (a + b)), lrho(b)]);
            if !l.is_finite() {
                return Err(Error::Underflow { node: i, x: x[i] });
            }
            log_m.push(l);
        }
        let ln_total = log_sum_exp(log_m.iter().copied());
        let log_mass: Vec<f64> = log_m.iter().map(|l| l - ln_total).collect();
        let log_face: Vec<f64> = (0..n).map(|i| lrho(x[i] + 0.5 * h) - ln_total).collect();
        if let Some(i) = log_face.iter().position(|l| !l.is_finite()) {
            return Err(Error::Underflow { node: i, x: x[i] + 0.5 * h });
        }

        let mut lower = vec![0.0; n + 1];
        let mut upper = vec![0.0; n + 1];
        let mut diag = vec![0.0; n + 1];
        for i in 0..=n {
            if i > 0 {
                lower[i] = (log_face[i - 1] - log_mass[i]).exp() / h;
            }
            if i < n {
                upper[i] = (log_face[i] - log_mass[i]).exp() / h;
            }
            diag[i] = -(lower[i] + upper[i]);
            if !diag[i].is_finite() {
                return Err(Error::NonFinite { node: i, x: x[i], value: diag[i] });
            }
        }
        Ok(Self { scenario: scenario.clone(), x, h, log_mass, log_face, lower, diag, upper })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// Number of intervals.
    pub fn n(&self) -> usize {
        self.x.len() - 1
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.x
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn log_mass(&self) -> &[f64] {
        &self.log_mass
    }

    /// Discrete μ-weights `m_i` (sum to 1).
    pub fn mass(&self) -> Vec<f64> {
        self.log_mass.iter().map(|l| l.exp()).collect()
    }

    /// Face weights `a_{i+½}`.
    pub fn face(&self) -> Vec<f64> {
        self.log_face.iter().map(|l| l.exp()).collect()
    }

    /// Index of the node nearest to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        let i = ((x - self.x[0]) / self.h).round();
        (i.max(0.0) as usize).min(self.n())
    }

    /// `Lf` in difference form.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let n = self.len();
        assert_eq!(f.len(), n);
        (0..n)
            .map(|i| {
                let mut s = 0.0;
                if i + 1 < n {
                    s += self.upper[i] * (f[i + 1] - f[i]);
                }
                if i > 0 {
                    s -= self.lower[i] * (f[i] - f[i - 1]);
                }
                s
            })
            .collect()
    }

    /// `Σ m_i f_i g_i`
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.log_mass.iter().zip(f.iter().zip(g)).map(|(l, (a, b))| l.exp() * a * b).sum()
    }

    pub fn mean(&self, f: &[f64]) -> f64 {
        self.log_mass.iter().zip(f).map(|(l, a)| l.exp() * a).sum()
    }

    pub fn variance(&self, f: &[f64]) -> f64 {
        let m = self.mean(f);
        self.log_mass.iter().zip(f).map(|(l, a)| l.exp() * (a - m) * (a - m)).sum()
    }

    /// Discrete Dirichlet form `Σ a_{i+½}(f_{i+1} − f_i)²/h`.
    pub fn dirichlet_form(&self, f: &[f64]) -> f64 {
        self.log_face
            .iter()
            .enumerate()
            .map(|(i, l)| l.exp() * (f[i + 1] - f[i]).powi(2) / self.h)
            .sum()
    }

    /// The symmetric matrix `M^{½}(−L)M^{−½}` as (diagonal, squared
    /// off-diagonal).
    pub fn symmetrized(&self) -> (Vec<f64>, Vec<f64>) {
        let d: Vec<f64> = self.diag.iter().map(|v| -v).collect();
        let e2: Vec<f64> = (0..self.n())
            .map(|i| (2.0 * self.log_face[i] - self.log_mass[i] - self.log_mass[i + 1]).exp() / (self.h * self.h))
            .collect();
        (d, e2)
    }

    /// Second-smallest eigenvalue of `−L` on this grid only.
    pub fn lambda1(&self) -> f64 {
        let (d, e2) = self.symmetrized();
        kth_eigenvalue(&d, &e2, 1)
    }

    /// Spectral gap with grid refinement: the value at `N`, and at `N/2`
    /// and `2N` for the convergence order.
    pub fn spectral_gap(&self) -> Result<SpectralGap> {
        let l = self.lambda1();
        let fine = DiscreteGenerator::build(&self.scenario, 2 * self.n())?.lambda1();
        let coarse = if self.n() / 2 >= MIN_N {
            Some(DiscreteGenerator::build(&self.scenario, self.n() / 2)?.lambda1())
        } else {
            None
        };
        let delta = (l - fine).abs() / fine.abs().max(f64::MIN_POSITIVE);
        let order = coarse.and_then(|c| {
            let r = (c - l) / (l - fine);
            (r > 0.0 && r.is_finite()).then(|| r.log2())
        });
        Ok(SpectralGap { lambda1: l, refined: fine, coarse, rel_delta: delta, order, no_gap: l < NO_GAP_THRESHOLD })
    }

    /// Snap an open interval to grid nodes and build the restriction that
    /// treats the closed set as absorbing.
    pub fn restriction(&self, u_lo: f64, u_hi: f64) -> Result<DirichletRestriction> {
        if !(u_hi > u_lo) {
            return Err(Error::DegenerateSet(format!("absorbing interval ({u_lo}, {u_hi}) is empty")));
        }
        let ilo = self.nearest(u_lo);
        let ihi = self.nearest(u_hi);
        let absorbing: Vec<bool> = (0..self.len()).map(|i| i >= ilo && i <= ihi).collect();
        DirichletRestriction::new(self, absorbing)
    }

    pub fn principal_dirichlet_eigenvalue(&self, u_lo: f64, u_hi: f64) -> Result<f64> {
        Ok(self.restriction(u_lo, u_hi)?.principal_eigenvalue())
    }

    /// Solve `(−L + φ)v = g`.
    pub fn resolvent_solve(&self, phi: &[f64], g: &[f64]) -> Result<ResolventSolution> {
        let n = self.len();
        assert!(phi.len() == n && g.len() == n);
        let (d, e2) = self.symmetrized();
        let dphi: Vec<f64> = d.iter().zip(phi).map(|(a, b)| a + b).collect();
        if sturm_count(&dphi, &e2, 0.0) > 0 {
            return Err(Error::NotCoercive { rayleigh: kth_eigenvalue(&dphi, &e2, 0) });
        }
        let lower: Vec<f64> = self.lower.iter().map(|v| -v).collect();
        let upper: Vec<f64> = self.upper.iter().map(|v| -v).collect();
        let diag: Vec<f64> = self.diag.iter().zip(phi).map(|(a, b)| -a + b).collect();
        let lu = TridiagLu::new(&lower, &diag, &upper)?;
        let residual = |v: &[f64]| -> Vec<f64> {
            let lv = self.apply(v);
            (0..n).map(|i| g[i] - (-lv[i] + phi[i] * v[i])).collect()
        };
        let abs_row = |v: &[f64], i: usize| {
            let mut s = diag[i].abs() * v[i].abs();
            if i > 0 {
                s += lower[i].abs() * v[i - 1].abs();
            }
            if i + 1 < n {
                s += upper[i].abs() * v[i + 1].abs();
            }
            s
        };
        let mut v = lu.solve(g);
        let gnorm = g.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
        let mut r = residual(&v);
        let mut rn = r.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        for _ in 0..4 {
            if rn <= 1e-14 * gnorm {
                break;
            }
            let dv = lu.solve(&r);
            let cand: Vec<f64> = v.iter().zip(&dv).map(|(a, b)| a + b).collect();
            let rc = residual(&cand);
            let rcn = rc.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            if rcn >= rn {
                break;
            }
            v = cand;
            r = rc;
            rn = rcn;
        }
        let backward_error = (0..n)
            .map(|i| r[i].abs() / (g[i].abs() + abs_row(&v, i)).max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        Ok(ResolventSolution { v, rel_residual: rn / gnorm, backward_error })
    }

    /// Approximate `P_t f` by Crank–Nicolson with a damped start.
    pub fn semigroup_step(&self, f: &[f64], t: f64) -> Result<Vec<f64>> {
        if !(t > 0.0) {
            return Err(Error::InvalidParameter(format!("semigroup time must be > 0, got {t}")));
        }
        let mut out = self.evolve(f, &[0.0, t])?;
        Ok(out.pop().expect("two time points"))
    }

    /// `P_t f` at every time in `times` (ascending, starting at `t ≥ 0`).
    /// The first returned entry is `f` evolved to `times[0]`.
    pub fn evolve(&self, f: &[f64], times: &[f64]) -> Result<Vec<Vec<f64>>> {
        if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|t| *t < 0.0) {
            return Err(Error::InvalidParameter("time grid must be ascending and nonnegative".into()));
        }
        let mut cache: HashMap<u64, TridiagLu> = HashMap::new();
        let mut cur = f.to_vec();
        let mut out = Vec::with_capacity(times.len());
        let mut t_prev = 0.0;
        let mut started = false;
        for &t in times {
            let span = t - t_prev;
            if span > 0.0 {
                let max_dt = (span / 16.0).min(self.h);
                let steps = (span / max_dt).ceil() as usize;
                let dt = span / steps as f64;
                let lu = match cache.entry(dt.to_bits()) {
                    std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
                    std::collections::hash_map::Entry::Vacant(e) => e.insert(self.implicit_lu(0.5 * dt)?),
                };
                let mut k = 0;
                if !started {
                    // Four backward-Euler half steps replace the first two
                    // CN steps to damp non-smooth initial data.
                    for _ in 0..4 {
                        lu.solve_in_place(&mut cur);
                    }
                    k = 2;
                    started = true;
                }
                while k < steps {
                    let lf = self.apply(&cur);
                    for (c, l) in cur.iter_mut().zip(&lf) {
                        *c += 0.5 * dt * l;
                    }
                    lu.solve_in_place(&mut cur);
                    k += 1;
                }
            }
            t_prev = t;
            out.push(cur.clone());
        }
        Ok(out)
    }

    /// `P_t f` by `steps` backward-Euler steps. First order in time, but
    /// `(I − dt L)⁻¹` is an M-matrix inverse applied with positive sums only,
    /// so nonnegative data keep componentwise relative accuracy far into
    /// the tails where `μ` underflows relative to the bulk.
    pub fn semigroup_step_monotone(&self, f: &[f64], t: f64, steps: usize) -> Result<Vec<f64>> {
        if !(t > 0.0) || steps == 0 {
            return Err(Error::InvalidParameter(format!("need t > 0 and steps > 0, got {t}, {steps}")));
        }
        let lu = self.implicit_lu(t / steps as f64)?;
        let mut cur = f.to_vec();
        for _ in 0..steps {
            lu.solve_in_place(&mut cur);
        }
        Ok(cur)
    }

    /// LU of `I − τL`.
    fn implicit_lu(&self, tau: f64) -> Result<TridiagLu> {
        let lower: Vec<f64> = self.lower.iter().map(|v| -tau * v).collect();
        let upper: Vec<f64> = self.upper.iter().map(|v| -tau * v).collect();
        let diag: Vec<f64> = self.diag.iter().map(|v| 1.0 - tau * v).collect();
        TridiagLu::new(&lower, &diag, &upper)
    }

    /// Matrix Market coordinate dump of `L`, for debugging.
    pub fn to_matrix_market(&self) -> String {
        let n = self.len();
        let nnz = 3 * n - 2;
        let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(s, "{n} {n} {nnz}");
        for i in 0..n {
            if i > 0 {
                let _ = writeln!(s, "{} {} {:.17e}", i + 1, i, self.lower[i]);
            }
            let _ = writeln!(s, "{} {} {:.17e}", i + 1, i + 1, self.diag[i]);
            if i + 1 < n {
                let _ = writeln!(s, "{} {} {:.17e}", i + 1, i + 2, self.upper[i]);
            }
        }
        s
    }
}

pub const NO_GAP_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SpectralGap {
    pub lambda1: f64,
    /// λ₁ on the doubled grid.
    pub refined: f64,
    /// λ₁ on the halved grid, when that grid is admissible.
    pub coarse: Option<f64>,
    /// `|λ₁(N) − λ₁(2N)| / λ₁(2N)`
    pub rel_delta: f64,
    /// Observed convergence order `log₂[(λ(N/2) − λ(N)) / (λ(N) − λ(2N))]`.
    pub order: Option<f64>,
    pub no_gap: bool,
}

/// λ₁ across a sweep of truncation radii. A gap that keeps shrinking as the
/// domain grows is reported as absent.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GapTrend {
    pub radii: Vec<f64>,
    pub lambda1: Vec<f64>,
    pub no_gap: bool,
}

pub fn gap_trend(scenario: &Scenario, n: usize, radii: &[f64]) -> Result<GapTrend> {
    let mut lambda1 = Vec::with_capacity(radii.len());
    for &r in radii {
        let s = scenario.with_radius(r)?;
        lambda1.push(DiscreteGenerator::build(&s, n)?.lambda1());
    }
    let tiny = lambda1.iter().any(|l| *l < NO_GAP_THRESHOLD);
    // Every doubling-or-more of the radius cut the gap by at least 20%.
    let shrinking = lambda1.len() >= 2 && lambda1.windows(2).all(|w| w[1] < 0.8 * w[0]);
    Ok(GapTrend { radii: radii.to_vec(), lambda1, no_gap: tiny || shrinking })
}

#[derive(Debug, Clone)]
pub struct ResolventSolution {
    pub v: Vec<f64>,
    /// `‖(−L+φ)v − g‖_∞ / ‖g‖_∞`
    pub rel_residual: f64,
    /// Componentwise backward error `max |r_i| / (|g_i| + (|A||v|)_i)`,
    /// meaningful when `v` grows by many orders of magnitude.
    pub backward_error: f64,
}

/// `−L` restricted to the complement of an absorbing node set.
#[derive(Debug, Clone)]
pub struct DirichletRestriction {
    pub absorbing: Vec<bool>,
    /// Free node indices, ascending.
    pub free: Vec<usize>,
    /// Symmetrized restricted operator (diagonal, squared off-diagonal).
    /// Couplings between non-adjacent free nodes are zero.
    pub sym_diag: Vec<f64>,
    pub sym_off_sq: Vec<f64>,
}

impl DirichletRestriction {
    pub fn new(gen: &DiscreteGenerator, absorbing: Vec<bool>) -> Result<Self> {
        let free: Vec<usize> = (0..gen.len()).filter(|&i| !absorbing[i]).collect();
        if free.is_empty() {
            return Err(Error::DegenerateSet("absorbing set covers the whole domain".into()));
        }
        if free.len() == gen.len() {
            return Err(Error::DegenerateSet("absorbing set contains no grid node".into()));
        }
        let (d, e2) = gen.symmetrized();
        let sym_diag: Vec<f64> = free.iter().map(|&i| d[i]).collect();
        let sym_off_sq: Vec<f64> = free
            .windows(2)
            .map(|w| if w[1] == w[0] + 1 { e2[w[0]] } else { 0.0 })
            .collect();
        Ok(Self { absorbing, free, sym_diag, sym_off_sq })
    }

    pub fn principal_eigenvalue(&self) -> f64 {
        kth_eigenvalue(&self.sym_diag, &self.sym_off_sq, 0)
    }

    /// Number of negative eigenvalues of `(−L)|_free − θ·diag(w)`.
    pub fn negative_count(&self, theta: f64, weight: &[f64]) -> usize {
        let d: Vec<f64> = self
            .sym_diag
            .iter()
            .zip(&self.free)
            .map(|(a, &i)| a - theta * weight[i])
            .collect();
        sturm_count(&d, &self.sym_off_sq, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Potential, TruncationPolicy};

    fn ou_gen(n: usize) -> DiscreteGenerator {
        let s = Scenario::build(Potential::quadratic(), TruncationPolicy { radius: Some(8.0), ..Default::default() })
            .unwrap();
        DiscreteGenerator::build(&s, n).unwrap()
    }

    #[test]
    fn rows_sum_to_zero_and_symmetric() {
        let g = ou_gen(512);
        let m = g.mass();
        for i in 0..g.len() {
            let s = g.lower[i] + g.diag[i] + g.upper[i];
            assert!(s.abs() <= 1e-12 * g.diag[i].abs());
            assert!(g.lower[i] >= 0.0 && g.upper[i] >= 0.0);
            if i + 1 < g.len() {
                let a = m[i] * g.upper[i];
                let b = m[i + 1] * g.lower[i + 1];
                assert!((a - b).abs() <= 1e-12 * a.abs());
            }
        }
        assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn constants_are_annihilated() {
        let g = ou_gen(256);
        assert!(g.apply(&vec![3.0; g.len()]).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn ou_linear_and_quadratic() {
        let g = ou_gen(4096);
        let x = g.nodes().to_vec();
        let lx = g.apply(&x);
        let x2: Vec<f64> = x.iter().map(|v| v * v).collect();
        let lx2 = g.apply(&x2);
        let mut e1: f64 = 0.0;
        let mut e2: f64 = 0.0;
        for i in 1..g.n() {
            e1 = e1.max((lx[i] + x[i]).abs());
            e2 = e2.max((lx2[i] - (2.0 - 2.0 * x[i] * x[i])).abs() / (1.0 + x[i] * x[i]));
        }
        assert!(e1 < 1e-3, "{e1}");
        assert!(e2 < 1e-3, "{e2}");
    }

    #[test]
    fn dirichlet_form_identity() {
        let g = ou_gen(256);
        let f: Vec<f64> = g.nodes().iter().map(|x| (1.3 * x).sin() + 0.1 * x * x).collect();
        let lf = g.apply(&f);
        let lhs = -g.inner(&f, &lf);
        let rhs = g.dirichlet_form(&f);
        assert!((lhs - rhs).abs() <= 1e-12 * rhs);
    }

    #[test]
    fn ou_gap_and_dirichlet_threshold() {
        let g = ou_gen(4096);
        let gap = g.spectral_gap().unwrap();
        assert!((gap.lambda1 - 1.0).abs() < 5e-3);
        assert!(!gap.no_gap);
        // He₂ = x² − 1 vanishes at ±1, so the Dirichlet value is 2.
        let th = g.principal_dirichlet_eigenvalue(-1.0, 1.0).unwrap();
        assert!((th - 2.0).abs() < 1e-3, "{th}");
    }

    #[test]
    fn full_absorbing_set_rejected() {
        let g = ou_gen(128);
        assert!(g.restriction(-9.0, 9.0).is_err());
    }

    #[test]
    fn resolvent_constants() {
        let g = ou_gen(512);
        let one = vec![1.0; g.len()];
        let r = g.resolvent_solve(&one, &one).unwrap();
        assert!(r.v.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let neg = vec![-0.5; g.len()];
        assert!(matches!(g.resolvent_solve(&neg, &one), Err(Error::NotCoercive { .. })));
    }

    #[test]
    fn semigroup_decays_first_mode() {
        let g = ou_gen(2048);
        let x = g.nodes().to_vec();
        let p = g.semigroup_step(&x, 1.0).unwrap();
        let e = (-1.0f64).exp();
        for i in (0..g.len()).step_by(64) {
            if x[i].abs() < 5.0 {
                assert!((p[i] - e * x[i]).abs() < 1e-3, "{} vs {}", p[i], e * x[i]);
            }
        }
        let c = g.semigroup_step(&vec![2.0; g.len()], 0.7).unwrap();
        let dev = c.iter().fold(0.0_f64, |m, v| m.max((v - 2.0).abs()));
        assert!(dev < 1e-12, "{dev}");
    }

    #[test]
    fn matrix_market_header() {
        let g = ou_gen(64);
        let mm = g.to_matrix_market();
        assert!(mm.starts_with("%%MatrixMarket"));
        assert_eq!(mm.lines().count(), 2 + 3 * 65 - 2);
    }
}
