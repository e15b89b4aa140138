//! Potentials, invariant measures and truncated computational domains.
//!
//! A [`Scenario`] fixes a potential `V`, the normalized measure
//! `μ = e^{-V}/Z dx` and an interval `[x_lo, x_hi]` outside of which the
//! μ-mass is below a declared tolerance. Every other module consumes one.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::quadrature::{integrate, log_integrate, log_sum_exp, simpson_weights};

/// Monotone piecewise-cubic Hermite interpolant (Fritsch–Carlson slopes).
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 3 || y.len() != n {
            return Err(Error::InvalidParameter(
                "tabulated potential needs at least 3 (x, V) pairs".into(),
            ));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("tabulated x must be strictly increasing".into()));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("tabulated values must be finite".into()));
        }
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
        let mut d = vec![0.0; n];
        d[0] = delta[0];
        d[n - 1] = delta[n - 2];
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] <= 0.0 {
                d[i] = 0.0;
            } else {
                // weighted harmonic mean
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                let w1 = 2.0 * h1 + h0;
                let w2 = h1 + 2.0 * h0;
                d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        Ok(Self { x, y, d })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    fn segment(&self, t: f64) -> usize {
        let n = self.x.len();
        match self.x.binary_search_by(|p| p.total_cmp(&t)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    /// Value, first and second derivative. Outside the table the spline is
    /// continued linearly with the end slope.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let (lo, hi) = self.range();
        let n = self.x.len();
        if t < lo {
            return (self.y[0] + self.d[0] * (t - lo), self.d[0], 0.0);
        }
        if t > hi {
            return (self.y[n - 1] + self.d[n - 1] * (t - hi), self.d[n - 1], 0.0);
        }
        let i = self.segment(t);
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let (y0, y1, d0, d1) = (self.y[i], self.y[i + 1], self.d[i], self.d[i + 1]);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let v = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
        let dv = ((6.0 * s2 - 6.0 * s) * y0 + (3.0 * s2 - 4.0 * s + 1.0) * h * d0
            + (-6.0 * s2 + 6.0 * s) * y1
            + (3.0 * s2 - 2.0 * s) * h * d1)
            / h;
        let d2v = ((12.0 * s - 6.0) * y0 + (6.0 * s - 4.0) * h * d0
            + (-12.0 * s + 6.0) * y1
            + (6.0 * s - 2.0) * h * d1)
            / (h * h);
        (v, dv, d2v)
    }
}

/// Potential family. `V` is `scale` times the family's base shape.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `x²/2`
    Quadratic,
    /// `|x|^α`, `α ≥ 1`
    Power { alpha: f64 },
    /// `(1+x²) ln^β(1+x²)`, `β > 0`
    LogPower { beta: f64 },
    /// `c ln(1+x²)`
    Cauchy { c: f64 },
    Table(MonotoneSpline),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub family: Family,
    pub scale: f64,
}

impl Potential {
    pub fn new(family: Family, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale must be > 0, got {scale}")));
        }
        match &family {
            Family::Power { alpha } if !(*alpha >= 1.0 && alpha.is_finite()) => {
                return Err(Error::InvalidParameter(format!("power family needs alpha >= 1, got {alpha}")))
            }
            Family::LogPower { beta } if !(*beta > 0.0 && beta.is_finite()) => {
                return Err(Error::InvalidParameter(format!("logpower family needs beta > 0, got {beta}")))
            }
            Family::Cauchy { c } if !(*c > 0.0 && c.is_finite()) => {
                return Err(Error::InvalidParameter(format!("cauchy family needs c > 0, got {c}")))
            }
            _ => {}
        }
        Ok(Self { family, scale })
    }

    pub fn quadratic() -> Self {
        Self { family: Family::Quadratic, scale: 1.0 }
    }

    pub fn power(alpha: f64) -> Result<Self> {
        Self::new(Family::Power { alpha }, 1.0)
    }

    pub fn logpower(beta: f64) -> Result<Self> {
        Self::new(Family::LogPower { beta }, 1.0)
    }

    pub fn cauchy(c: f64) -> Result<Self> {
        Self::new(Family::Cauchy { c }, 1.0)
    }

    pub fn tag(&self) -> &'static str {
        match self.family {
            Family::Quadratic => "quadratic",
            Family::Power { .. } => "power",
            Family::LogPower { .. } => "logpower",
            Family::Cauchy { .. } => "cauchy",
            Family::Table(_) => "table",
        }
    }

    pub fn is_symmetric(&self) -> bool {
        !matches!(self.family, Family::Table(_))
    }

    /// `(V, V', V'')` at `x`.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let (v, dv, d2v) = match &self.family {
            Family::Quadratic => (0.5 * x * x, x, 1.0),
            Family::Power { alpha } => {
                let a = *alpha;
                let ax = x.abs();
                let v = ax.powf(a);
                let dv = if ax == 0.0 { 0.0 } else { a * ax.powf(a - 1.0) * x.signum() };
                let d2v = if a == 1.0 {
                    0.0
                } else if ax == 0.0 {
                    if a < 2.0 { f64::INFINITY } else if a == 2.0 { 2.0 } else { 0.0 }
                } else {
                    a * (a - 1.0) * ax.powf(a - 2.0)
                };
                (v, dv, d2v)
            }
            Family::LogPower { beta } => {
                let b = *beta;
                let u = 1.0 + x * x;
                let l = (x * x).ln_1p();
                if l == 0.0 {
                    let d2v = if b == 1.0 { 2.0 } else if b > 1.0 { 0.0 } else { f64::INFINITY };
                    (0.0, 0.0, d2v)
                } else {
                    let lb = l.powf(b);
                    let lb1 = l.powf(b - 1.0);
                    let v = u * lb;
                    let g = lb + b * lb1;
                    let dv = 2.0 * x * g;
                    let dg = (b * lb1 + b * (b - 1.0) * l.powf(b - 2.0)) * 2.0 * x / u;
                    (v, dv, 2.0 * g + 2.0 * x * dg)
                }
            }
            Family::Cauchy { c } => {
                let u = 1.0 + x * x;
                (c * (x * x).ln_1p(), 2.0 * c * x / u, 2.0 * c * (1.0 - x * x) / (u * u))
            }
            Family::Table(s) => s.eval(x),
        };
        (self.scale * v, self.scale * dv, self.scale * d2v)
    }

    pub fn v(&self, x: f64) -> f64 {
        self.eval(x).0
    }

    pub fn dv(&self, x: f64) -> f64 {
        self.eval(x).1
    }

    pub fn d2v(&self, x: f64) -> f64 {
        self.eval(x).2
    }

    /// `ln V'(e^s)` for the right tail, evaluated without forming `e^s`
    /// when the family admits it. Returns `None` where `V'(e^s) ≤ 0`.
    pub fn ln_dv_at_exp(&self, s: f64) -> Option<f64> {
        let ls = self.scale.ln();
        let r = match &self.family {
            Family::Quadratic => Some(s),
            Family::Power { alpha } => Some(alpha.ln() + (alpha - 1.0) * s),
            Family::LogPower { beta } => {
                // L = ln(1 + e^{2s}), V' = 2x (L^β + β L^{β-1})
                let l = if s > 0.0 { 2.0 * s + (-2.0 * s).exp().ln_1p() } else { (2.0 * s).exp().ln_1p() };
                Some(std::f64::consts::LN_2 + s + (beta - 1.0) * l.ln() + (l + beta).ln())
            }
            Family::Cauchy { c } => {
                let l = if s > 0.0 { 2.0 * s + (-2.0 * s).exp().ln_1p() } else { (2.0 * s).exp().ln_1p() };
                Some((2.0 * c).ln() + s - l)
            }
            Family::Table(_) => {
                let d = self.eval(s.exp()).1 / self.scale;
                (d > 0.0).then(|| d.ln())
            }
        };
        r.map(|v| v + ls)
    }
}

/// How the truncation radius is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    /// Target μ-mass outside the domain.
    pub tail_tol: f64,
    /// Largest radius the search may reach.
    pub max_radius: f64,
    /// Fixed radius overriding the search.
    pub radius: Option<f64>,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self { tail_tol: 1e-10, max_radius: 1e4, radius: None }
    }
}

/// Upper bound for `∫_r^∞ e^{-V(x)} dx` where `dv`, `d2v` describe the
/// outward derivatives at `r > 0`. Returns the natural log of the bound.
fn ln_tail_bound(v: f64, dv: f64, d2v: f64, r: f64) -> f64 {
    if dv <= 0.0 {
        return f64::INFINITY;
    }
    if d2v >= 0.0 {
        -v - dv.ln()
    } else {
        let k = r * dv;
        if k <= 1.0 {
            f64::INFINITY
        } else {
            -v + r.ln() - (k - 1.0).ln()
        }
    }
}

/// A potential together with its normalized measure and truncated domain.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub potential: Potential,
    pub x_lo: f64,
    pub x_hi: f64,
    /// `ln Z`, including the estimated mass beyond the domain.
    pub ln_z: f64,
    /// Richardson estimate of the relative error in `Z`.
    pub z_rel_err: f64,
    /// Estimated μ-mass outside `[x_lo, x_hi]`.
    pub tail_mass: f64,
    pub policy: TruncationPolicy,
    /// Tabulated potentials are only piecewise smooth.
    pub outside_hypotheses: bool,
}

impl Scenario {
    pub fn build(potential: Potential, policy: TruncationPolicy) -> Result<Self> {
        if !(policy.tail_tol > 0.0 && policy.tail_tol < 1.0) {
            return Err(Error::InvalidParameter(format!("tail_tol must lie in (0, 1), got {}", policy.tail_tol)));
        }
        if let Family::Table(s) = &potential.family {
            return Self::build_table(potential.clone(), s.range(), policy);
        }

        // Integrability: x V'(x) must exceed 1 far out, otherwise e^{-V}
        // decays no faster than 1/x.
        let far = policy.max_radius;
        let (_, dv_far, _) = potential.eval(far);
        if far * dv_far <= 1.0 {
            return Err(Error::NonIntegrable(format!(
                "{} potential has x V'(x) = {:.4} <= 1 at x = {far}; e^(-V) is not integrable",
                potential.tag(),
                far * dv_far
            )));
        }

        // Lower bound on Z from the core, used to make the tail test relative.
        let z_core = integrate(|x| (-potential.v(x)).exp(), -1.0, 1.0, 0.0, 1e-12).value;
        let ln_tail_rel = |r: f64| {
            let (v, dv, d2v) = potential.eval(r);
            std::f64::consts::LN_2 + ln_tail_bound(v, dv, d2v, r) - z_core.ln()
        };

        let radius = match policy.radius {
            Some(r) => {
                if !(r > 0.0 && r.is_finite()) {
                    return Err(Error::InvalidParameter(format!("radius must be > 0, got {r}")));
                }
                r
            }
            None => {
                let target = policy.tail_tol.ln();
                let mut r = 0.5;
                loop {
                    if ln_tail_rel(r) < target {
                        break r;
                    }
                    if r >= far {
                        return Err(Error::TruncationUnreachable {
                            tail: ln_tail_rel(far).exp(),
                            tol: policy.tail_tol,
                            radius: far,
                        });
                    }
                    r = (r * 1.01).min(far);
                }
            }
        };

        let (ln_core, err) = Self::log_mass(&potential, -radius, radius);
        let (v, dv, d2v) = potential.eval(radius);
        let ln_tail_one = ln_tail_bound(v, dv, d2v, radius);
        let ln_tail = std::f64::consts::LN_2 + ln_tail_one;
        let ln_z = log_sum_exp([ln_core, ln_tail]);
        let tail_mass = if ln_tail.is_finite() { (ln_tail - ln_z).exp() } else { 1.0 };
        Ok(Self {
            potential,
            x_lo: -radius,
            x_hi: radius,
            ln_z,
            z_rel_err: err,
            tail_mass,
            policy,
            outside_hypotheses: false,
        })
    }

    fn build_table(potential: Potential, range: (f64, f64), policy: TruncationPolicy) -> Result<Self> {
        // The tabulated measure lives on the table range; reflection at its ends.
        let (lo, hi) = range;
        let (ln_z, err) = Self::log_mass(&potential, lo, hi);
        Ok(Self {
            potential,
            x_lo: lo,
            x_hi: hi,
            ln_z,
            z_rel_err: err,
            tail_mass: 0.0,
            policy,
            outside_hypotheses: true,
        })
    }

    /// `ln ∫_a^b e^{-V}`, splitting at 0 so kinks at the origin sit on a
    /// panel boundary.
    fn log_mass(p: &Potential, a: f64, b: f64) -> (f64, f64) {
        let f = |x: f64| -p.v(x);
        let parts: Vec<(f64, f64)> = if a < 0.0 && b > 0.0 {
            vec![log_integrate(f, a, 0.0, 1e-13), log_integrate(f, 0.0, b, 1e-13)]
        } else {
            vec![log_integrate(f, a, b, 1e-13)]
        };
        let ln = log_sum_exp(parts.iter().map(|p| p.0));
        let err = parts.iter().map(|(l, e)| (l - ln).exp() * e).sum();
        (ln, err)
    }

    /// Parse a JSON scenario description.
    pub fn from_spec(spec: &ScenarioSpec, base_dir: Option<&Path>) -> Result<Self> {
        let potential = spec.potential(base_dir)?;
        let policy = TruncationPolicy {
            tail_tol: spec.tail_tol,
            max_radius: spec.max_radius,
            radius: spec.radius,
        };
        Self::build(potential, policy)
    }

    /// The same potential truncated at a different radius.
    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        let policy = TruncationPolicy { radius: Some(radius), ..self.policy };
        Self::build(self.potential.clone(), policy)
    }

    pub fn z(&self) -> f64 {
        self.ln_z.exp()
    }

    pub fn radius(&self) -> f64 {
        self.x_hi.max(-self.x_lo)
    }

    pub fn v(&self, x: f64) -> f64 {
        self.potential.v(x)
    }

    pub fn log_density(&self, x: f64) -> f64 {
        -self.potential.v(x) - self.ln_z
    }

    pub fn density(&self, x: f64) -> f64 {
        self.log_density(x).exp()
    }

    /// Nodes and μ-weights of the composite Simpson rule with `2m` panels.
    pub fn quadrature(&self, m: usize) -> (Vec<f64>, Vec<f64>) {
        let n = 2 * m + 1;
        let h = (self.x_hi - self.x_lo) / (2 * m) as f64;
        let nodes: Vec<f64> = (0..n).map(|j| self.x_lo + j as f64 * h).collect();
        let weights = simpson_weights(n, h)
            .into_iter()
            .zip(&nodes)
            .map(|(w, &x)| w * self.density(x))
            .collect();
        (nodes, weights)
    }

    /// `∫ g dμ` over the domain, with the gap to the half-resolution rule as
    /// error estimate.
    pub fn measure_moment<G: Fn(f64) -> f64>(&self, g: G) -> Result<Estimate> {
        const M: usize = 4096;
        let (nodes, w) = self.quadrature(M);
        let mut vals = Vec::with_capacity(nodes.len());
        for (i, &x) in nodes.iter().enumerate() {
            let v = g(x);
            if !v.is_finite() {
                return Err(Error::NonFinite { node: i, x, value: v });
            }
            vals.push(v);
        }
        let fine: f64 = w.iter().zip(&vals).map(|(w, v)| w * v).sum();
        let h2 = 2.0 * (self.x_hi - self.x_lo) / (2 * M) as f64;
        let coarse_w = simpson_weights(M + 1, h2);
        let coarse: f64 = coarse_w
            .iter()
            .zip(nodes.iter().step_by(2).zip(vals.iter().step_by(2)))
            .map(|(cw, (&x, v))| cw * self.density(x) * v)
            .sum();
        Ok(Estimate { value: fine, error: (fine - coarse).abs() / 15.0 })
    }

    /// μ of the interval `(a, b)` intersected with the domain.
    pub fn measure_of_set(&self, a: f64, b: f64) -> SetMeasure {
        let lo = a.max(self.x_lo);
        let hi = b.min(self.x_hi);
        if !(hi > lo) {
            return SetMeasure { value: 0.0, empty: true };
        }
        let f = |x: f64| self.density(x);
        let mut value = 0.0;
        let mut pts = vec![lo];
        if lo < 0.0 && hi > 0.0 {
            pts.push(0.0);
        }
        pts.push(hi);
        for w in pts.windows(2) {
            value += integrate(f, w[0], w[1], 1e-15, 1e-13).value;
        }
        SetMeasure { value: value.clamp(0.0, 1.0), empty: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SetMeasure {
    pub value: f64,
    /// Set when the interval does not meet the domain.
    pub empty: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyTag {
    Quadratic,
    Power,
    Logpower,
    Cauchy,
    Table,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    /// Two-column CSV for tabulated potentials.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<f64>>,
}

fn default_tail_tol() -> f64 {
    TruncationPolicy::default().tail_tol
}

fn default_max_radius() -> f64 {
    TruncationPolicy::default().max_radius
}

/// JSON form of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub family: FamilyTag,
    #[serde(default)]
    pub params: FamilyParams,
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
    #[serde(default = "default_max_radius")]
    pub max_radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

impl ScenarioSpec {
    pub fn new(family: FamilyTag) -> Self {
        Self {
            family,
            params: FamilyParams::default(),
            tail_tol: default_tail_tol(),
            max_radius: default_max_radius(),
            radius: None,
        }
    }

    pub fn potential(&self, base_dir: Option<&Path>) -> Result<Potential> {
        let p = &self.params;
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::InvalidParameter(format!("family {:?} requires params.{name}", self.family)))
        };
        let family = match self.family {
            FamilyTag::Quadratic => Family::Quadratic,
            FamilyTag::Power => Family::Power { alpha: need(p.alpha, "alpha")? },
            FamilyTag::Logpower => Family::LogPower { beta: need(p.beta, "beta")? },
            FamilyTag::Cauchy => Family::Cauchy { c: need(p.c, "c")? },
            FamilyTag::Table => {
                let (x, v) = match (&p.path, &p.x, &p.v) {
                    (Some(path), None, None) => {
                        let full = match base_dir {
                            Some(d) => d.join(path),
                            None => Path::new(path).to_path_buf(),
                        };
                        read_table_csv(&full)?
                    }
                    (None, Some(x), Some(v)) => (x.clone(), v.clone()),
                    _ => {
                        return Err(Error::InvalidParameter(
                            "table family needs either params.path or both params.x and params.v".into(),
                        ))
                    }
                };
                Family::Table(MonotoneSpline::new(x, v)?)
            }
        };
        Potential::new(family, p.scale.unwrap_or(1.0))
    }
}

/// Read a two-column `x,V` CSV. A non-numeric first line is treated as a
/// header.
pub fn read_table_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let mut xs = Vec::new();
    let mut vs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = (cols.len() == 2)
            .then(|| (cols[0].parse::<f64>(), cols[1].parse::<f64>()));
        match parsed {
            Some((Ok(x), Ok(v))) => {
                xs.push(x);
                vs.push(v);
            }
            _ if xs.is_empty() && lineno == 0 => continue,
            _ => {
                return Err(Error::Parse(format!("{}:{}: expected 'x,V'", path.display(), lineno + 1)))
            }
        }
    }
    Ok((xs, vs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ou() -> Scenario {
        Scenario::build(Potential::quadratic(), TruncationPolicy { radius: Some(8.0), ..Default::default() }).unwrap()
    }

    #[test]
    fn gaussian_normalization() {
        let s = ou();
        assert!((s.z() - (2.0 * PI).sqrt()).abs() < 1e-9);
        let p = Scenario::build(
            Potential::power(2.0).unwrap(),
            TruncationPolicy { radius: Some(8.0), ..Default::default() },
        )
        .unwrap();
        assert!((p.z() - PI.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn gaussian_moments() {
        let s = ou();
        assert!((s.measure_moment(|x| x * x).unwrap().value - 1.0).abs() < 1e-9);
        assert!((s.measure_moment(|x| x.powi(4)).unwrap().value - 3.0).abs() < 1e-9);
        assert!((s.measure_moment(|_| 1.0).unwrap().value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn gaussian_set_mass() {
        let s = ou();
        // erf(1/√2)
        assert!((s.measure_of_set(-1.0, 1.0).value - 0.682_689_492_137_085_9).abs() < 1e-12);
        let e = s.measure_of_set(0.5, 0.5);
        assert!(e.empty && e.value == 0.0);
    }

    #[test]
    fn non_finite_integrand_names_node() {
        let s = ou();
        let err = s.measure_moment(|x| if x == 0.0 { f64::NAN } else { 1.0 }).unwrap_err();
        match err {
            Error::NonFinite { node, x, .. } => {
                assert_eq!(node, 4096);
                assert_eq!(x, 0.0);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn default_truncation_meets_tolerance() {
        let s = Scenario::build(Potential::logpower(2.0).unwrap(), TruncationPolicy::default()).unwrap();
        assert!(s.tail_mass < 1e-10);
        let total = s.measure_moment(|_| 1.0).unwrap().value;
        assert!(total >= 1.0 - 1e-10 && total <= 1.0 + 1e-12, "total = {total}");
        let ou = Scenario::build(Potential::quadratic(), TruncationPolicy::default()).unwrap();
        assert!(ou.x_hi > 6.0 && ou.x_hi < 7.0);
    }

    #[test]
    fn cauchy_non_integrable_rejected() {
        let r = Scenario::build(Potential::cauchy(0.5).unwrap(), TruncationPolicy::default());
        assert!(matches!(r, Err(Error::NonIntegrable(_))));
        let r = Scenario::build(Potential::cauchy(1.0).unwrap(), TruncationPolicy::default());
        assert!(matches!(r, Err(Error::TruncationUnreachable { .. })));
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(Potential::power(0.5).is_err());
        assert!(Potential::logpower(0.0).is_err());
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let pots = [
            Potential::quadratic(),
            Potential::power(1.5).unwrap(),
            Potential::power(3.0).unwrap(),
            Potential::logpower(0.5).unwrap(),
            Potential::logpower(2.0).unwrap(),
            Potential::cauchy(1.0).unwrap(),
        ];
        let h = 1e-5;
        for p in &pots {
            for &x in &[-3.7, -1.2, 0.4, 0.9, 2.5, 5.0] {
                let fd = (p.v(x + h) - p.v(x - h)) / (2.0 * h);
                let dv = p.dv(x);
                assert!((fd - dv).abs() <= 1e-6 * dv.abs().max(1.0), "{} at {x}: {fd} vs {dv}", p.tag());
                let fd2 = (p.dv(x + h) - p.dv(x - h)) / (2.0 * h);
                assert!((fd2 - p.d2v(x)).abs() <= 1e-5 * fd2.abs().max(1.0), "{} V'' at {x}", p.tag());
            }
        }
    }

    #[test]
    fn log_derivative_matches_direct() {
        for p in [Potential::logpower(2.0).unwrap(), Potential::power(1.5).unwrap(), Potential::cauchy(2.0).unwrap()] {
            for &s in &[0.5, 1.0, 3.0] {
                let direct = p.dv(f64::exp(s)).ln();
                assert!((p.ln_dv_at_exp(s).unwrap() - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spline_reproduces_quadratic_table() {
        let x: Vec<f64> = (0..=80).map(|i| -4.0 + 0.1 * i as f64).collect();
        let v: Vec<f64> = x.iter().map(|x| 0.5 * x * x).collect();
        let s = MonotoneSpline::new(x, v).unwrap();
        for &t in &[-3.33, -0.05, 1.234, 3.9] {
            let (v, dv, _) = s.eval(t);
            assert!((v - 0.5 * t * t).abs() < 2e-3);
            assert!((dv - t).abs() < 5e-2);
        }
    }

    #[test]
    fn spec_parsing_rejects_unknown_keys() {
        let ok: ScenarioSpec = serde_json::from_str(r#"{"family":"power","params":{"alpha":2.0}}"#).unwrap();
        assert_eq!(ok.family, FamilyTag::Power);
        assert!(serde_json::from_str::<ScenarioSpec>(r#"{"family":"power","foo":1}"#).is_err());
        let missing = ScenarioSpec::new(FamilyTag::Logpower);
        assert!(missing.potential(None).is_err());
    }

    #[test]
    fn table_scenario_flagged() {
        let mut spec = ScenarioSpec::new(FamilyTag::Table);
        let x: Vec<f64> = (0..=60).map(|i| -6.0 + 0.2 * i as f64).collect();
        spec.params.v = Some(x.iter().map(|x| 0.5 * x * x).collect());
        spec.params.x = Some(x);
        let s = Scenario::from_spec(&spec, None).unwrap();
        assert!(s.outside_hypotheses);
        assert!((s.z() - (2.0 * PI).sqrt()).abs() < 1e-3);
    }
}
