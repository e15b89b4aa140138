//! Young functions `G(u) = u F(u)` and their Fenchel–Legendre duals
//! `G*(t) = sup_{u>0} (ut − G(u))`.
//!
//! `G*` grows very fast for the `ln₊^β` family, so everything is evaluated as
//! `ln G*` and only exponentiated on request.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::optimize::{bisect, golden_max};

/// The `F` of an F-Sobolev inequality.
#[derive(Clone)]
pub enum FKind {
    /// `F(u) = (ln max(u, 1))^β`
    LogPlusPower { beta: f64 },
    /// Caller-supplied `F`, assumed nondecreasing and bounded near 0.
    Custom { name: String, f: Arc<dyn Fn(f64) -> f64 + Send + Sync> },
}

impl fmt::Debug for FKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FKind::LogPlusPower { beta } => write!(f, "LogPlusPower {{ beta: {beta} }}"),
            FKind::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

/// F together with the constants of its inequality
/// `∫f²F(f²/μ(f²))dμ ≤ C_F E(f) + D_F μ(f²)`.
#[derive(Debug, Clone)]
pub struct FSpec {
    pub kind: FKind,
    pub c_f: f64,
    /// Defect; nonzero values are accepted as-is.
    pub d_f: f64,
}

/// `ln G*(t)`, or the flag that the supremum is infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DualValue {
    Finite(f64),
    Unbounded,
}

impl DualValue {
    pub fn ln(self) -> f64 {
        match self {
            DualValue::Finite(l) => l,
            DualValue::Unbounded => f64::INFINITY,
        }
    }

    pub fn value(self) -> f64 {
        self.ln().exp()
    }
}

const S_MIN: f64 = -40.0;
const S_MAX: f64 = 700.0;

impl FSpec {
    pub fn log_plus_power(beta: f64, c_f: f64, d_f: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::InvalidParameter(format!("ln+ power needs beta > 0, got {beta}")));
        }
        Self::check_constants(c_f, d_f)?;
        Ok(Self { kind: FKind::LogPlusPower { beta }, c_f, d_f })
    }

    pub fn custom(name: &str, f: Arc<dyn Fn(f64) -> f64 + Send + Sync>, c_f: f64, d_f: f64) -> Result<Self> {
        Self::check_constants(c_f, d_f)?;
        Ok(Self { kind: FKind::Custom { name: name.to_string(), f }, c_f, d_f })
    }

    fn check_constants(c_f: f64, d_f: f64) -> Result<()> {
        if !(c_f > 0.0) || !(d_f >= 0.0) {
            return Err(Error::InvalidParameter(format!("need C_F > 0 and D_F >= 0, got {c_f}, {d_f}")));
        }
        Ok(())
    }

    pub fn tag(&self) -> String {
        match &self.kind {
            FKind::LogPlusPower { beta } => format!("ln+^{beta}"),
            FKind::Custom { name, .. } => name.clone(),
        }
    }

    pub fn f(&self, u: f64) -> f64 {
        match &self.kind {
            FKind::LogPlusPower { beta } => {
                if u <= 1.0 {
                    0.0
                } else {
                    u.ln().powf(*beta)
                }
            }
            FKind::Custom { f, .. } => f(u),
        }
    }

    /// `F(e^s)`, exact for large `s` in the `ln₊` family.
    fn f_exp(&self, s: f64) -> f64 {
        match &self.kind {
            FKind::LogPlusPower { beta } => {
                if s <= 0.0 {
                    0.0
                } else {
                    s.powf(*beta)
                }
            }
            FKind::Custom { f, .. } => f(s.exp()),
        }
    }

    pub fn g(&self, u: f64) -> f64 {
        u * self.f(u)
    }

    /// Left end of the range on which `G` is claimed convex.
    pub fn convexity_start(&self) -> f64 {
        match &self.kind {
            FKind::LogPlusPower { beta } => (1.0 - beta).max(0.0).exp(),
            FKind::Custom { .. } => 0.0,
        }
    }

    /// `ln G*(t)`.
    ///
    /// Writing `u = e^s`, `ut − G(u) = e^s (t − F(e^s))`, so the supremum is
    /// that of `s + ln(t − F(e^s))` over the set where `F(e^s) < t`.
    pub fn ln_dual(&self, t: f64) -> DualValue {
        if t.is_nan() {
            return DualValue::Finite(f64::NAN);
        }
        // F ≥ 0 bounded near 0: nothing beats u → 0 when t ≤ F everywhere
        if t <= 0.0 {
            return DualValue::Finite(f64::NEG_INFINITY);
        }
        let psi = |s: f64| {
            let d = t - self.f_exp(s);
            if d > 0.0 {
                s + d.ln()
            } else {
                f64::NEG_INFINITY
            }
        };
        // Right end of the admissible range: first s with F(e^s) ≥ t.
        let s_hi = match &self.kind {
            FKind::LogPlusPower { beta } => t.powf(1.0 / beta),
            FKind::Custom { .. } => {
                if self.f_exp(S_MAX) < t {
                    return DualValue::Unbounded;
                }
                let mut hi = 1.0_f64;
                while self.f_exp(hi) < t {
                    hi = (2.0 * hi).min(S_MAX);
                }
                hi
            }
        };
        let lo = S_MIN;
        let n = 512;
        let step = (s_hi - lo) / n as f64;
        let mut best_i: usize = 0;
        let mut best = f64::NEG_INFINITY;
        for i in 0..n {
            let v = psi(lo + i as f64 * step);
            if v > best {
                best = v;
                best_i = i;
            }
        }
        let a = lo + best_i.saturating_sub(1) as f64 * step;
        let b = (lo + (best_i + 1) as f64 * step).min(s_hi);
        let (_, v) = golden_max(psi, a, b, 1e-15);
        DualValue::Finite(v.max(best))
    }

    pub fn dual(&self, t: f64) -> f64 {
        self.ln_dual(t).value()
    }

    /// Smallest `t ≥ 0` with `G*(t) = y`, by bisection on `ln G*`.
    pub fn dual_inverse(&self, y: f64) -> Result<f64> {
        if !(y >= 0.0) {
            return Err(Error::InvalidParameter(format!("G* inverse needs y >= G*(0) = 0, got {y}")));
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        let ly = y.ln();
        let mut hi = 1.0;
        while self.ln_dual(hi).ln() < ly {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::InvalidParameter(format!("G* does not reach {y}")));
            }
        }
        Ok(bisect(|t| self.ln_dual(t).ln() - ly, 0.0, hi, 1e-15))
    }

    /// Smallest sampled second difference of `G` on its convexity range,
    /// scaled by the local magnitude of `G`.
    pub fn convexity_defect(&self, u_max: f64, samples: usize) -> f64 {
        let a = self.convexity_start();
        let step = (u_max - a) / samples as f64;
        let mut worst = f64::INFINITY;
        for i in 1..samples {
            let u = a + i as f64 * step;
            let d2 = (self.g(u + step) - 2.0 * self.g(u) + self.g(u - step)) / (step * step);
            let scale = 1.0 + self.g(u + step).abs();
            worst = worst.min(d2 / scale);
        }
        worst
    }

    /// Largest violation of `uv ≤ G(u) + G*(v)` over a lattice; positive
    /// means Fenchel–Young fails.
    pub fn young_violation(&self, us: &[f64], vs: &[f64]) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for &v in vs {
            let gs = self.dual(v);
            for &u in us {
                worst = worst.max(u * v - self.g(u) - gs);
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_dual_closed_form() {
        let f = FSpec::log_plus_power(1.0, 1.0, 0.0).unwrap();
        for &t in &[1.0, 1.5, 3.0, 10.0, 50.0] {
            let ln = f.ln_dual(t).ln();
            assert!((ln - (t - 1.0)).abs() < 1e-12, "t = {t}: {ln}");
        }
        // below 1 the corner u = 1 wins: G*(t) = t
        assert!((f.dual(0.5) - 0.5).abs() < 1e-12);
        assert_eq!(f.dual(0.0), 0.0);
    }

    #[test]
    fn inverse_roundtrip() {
        let f = FSpec::log_plus_power(2.0 / 3.0, 1.0, 0.0).unwrap();
        for &t in &[0.3, 2.0, 7.5, 40.0] {
            let y = f.dual(t);
            let back = f.dual_inverse(y).unwrap();
            assert!((back - t).abs() < 1e-9 * (1.0 + t), "{t} -> {y} -> {back}");
        }
    }

    #[test]
    fn young_and_convexity() {
        for beta in [0.5, 1.0, 4.0 / 3.0, 2.0] {
            let f = FSpec::log_plus_power(beta, 1.0, 0.0).unwrap();
            let us: Vec<f64> = (0..40).map(|i| 0.05 * 1.25f64.powi(i)).collect();
            let vs: Vec<f64> = (0..40).map(|i| 0.1 * i as f64).collect();
            assert!(f.young_violation(&us, &vs) <= 1e-8, "beta = {beta}");
            assert!(f.convexity_defect(50.0, 2000) >= -1e-8, "beta = {beta}");
        }
    }

    #[test]
    fn bounded_custom_f_is_unbounded_above_its_sup() {
        let f = FSpec::custom("tanh", Arc::new(|u: f64| u.tanh()), 1.0, 0.0).unwrap();
        assert_eq!(f.ln_dual(2.0), DualValue::Unbounded);
        assert!(matches!(f.ln_dual(0.5), DualValue::Finite(_)));
    }
}
