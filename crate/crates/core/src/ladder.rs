//! Super-Lyapunov ladders: a family of radii `R_k` with rates
//! `λ_k = inf_{|x|>R_k} −LW/W` and the series `Σ ln w_k / λ_k` whose
//! convergence signals that the process comes down from infinity.
//!
//! Radii grow far past any truncation, so everything is evaluated in closed
//! form in `s = ln|x|`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::fit::fit_line;
use crate::scenario::{Family, Potential};

/// `W = exp(a|x|^p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpPowerW {
    pub a: f64,
    pub p: f64,
}

impl ExpPowerW {
    pub fn new(a: f64, p: f64) -> Result<Self> {
        if !(a > 0.0) || !(p >= 1.0) {
            return Err(Error::InvalidParameter(format!("W = exp(a|x|^p) needs a > 0, p >= 1; got {a}, {p}")));
        }
        Ok(Self { a, p })
    }

    pub fn tag(&self) -> String {
        format!("exp({}|x|^{})", self.a, self.p)
    }

    /// `ln(−LW/W)` at `|x| = e^s`, or `None` where `−LW/W ≤ 0`.
    ///
    /// With `g = (ln W)'`, `−LW/W = V'g − g² − g' = V'g (1 − g/V' − g'/(V'g))`.
    pub fn ln_rate(&self, v: &Potential, s: f64) -> Option<f64> {
        let ln_dv = v.ln_dv_at_exp(s)?;
        let ln_g = (self.a * self.p).ln() + (self.p - 1.0) * s;
        let r1 = (ln_g - ln_dv).exp();
        // g'/g = (p − 1)/x
        let r2 = if self.p > 1.0 { ((self.p - 1.0).ln() - s - ln_dv).exp() } else { 0.0 };
        let bracket = 1.0 - r1 - r2;
        (bracket > 0.0).then(|| ln_dv + ln_g + bracket.ln())
    }

    /// `ln ln W(e^s)`.
    pub fn ln_ln_w(&self, s: f64) -> f64 {
        self.a.ln() + self.p * s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    /// `R_k = exp(k^power)`
    ExpPower { power: f64 },
    /// `R_k = r0 · ratio^k`
    Geometric { r0: f64, ratio: f64 },
}

impl Schedule {
    /// `ln R_k`
    pub fn ln_radius(&self, k: f64) -> f64 {
        match *self {
            Schedule::ExpPower { power } => k.powf(power),
            Schedule::Geometric { r0, ratio } => r0.ln() + k * ratio.ln(),
        }
    }

    pub fn tag(&self) -> String {
        match self {
            Schedule::ExpPower { power } => format!("exp(k^{power})"),
            Schedule::Geometric { r0, ratio } => format!("{r0}*{ratio}^k"),
        }
    }
}

/// Which radius bounds `w_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WConvention {
    /// `w_k = sup W` over the annulus `(R_k, R_{k+1})`.
    Annulus,
    /// `w_k = W(R_k)`.
    Inner,
}

#[derive(Debug, Clone, Serialize)]
pub struct LadderRow {
    pub k: usize,
    pub ln_radius: f64,
    pub ln_lambda: f64,
    pub ln_ln_w: f64,
    /// `ln(ln w_k / λ_k)`
    pub ln_term: f64,
    pub term: f64,
    pub partial_sum: f64,
    /// `δ S_K` for each reported δ.
    pub ln_product: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LadderVerdict {
    Convergent,
    Divergent,
    Truncated,
}

#[derive(Debug, Clone, Serialize)]
pub struct LadderReport {
    pub potential: String,
    pub w: String,
    pub schedule: String,
    pub convention: WConvention,
    pub k0: usize,
    pub delta: [f64; 2],
    pub rows: Vec<LadderRow>,
    /// Log-log slope of `term_k` against `k` over the second half of the rows.
    pub tail_slope: Option<f64>,
    /// Largest `term_k` for `k > 40`, i.e. the largest Cauchy increment.
    pub max_increment_beyond_40: Option<f64>,
    /// `S_K` plus the integral of the fitted power-law tail.
    pub limit_estimate: Option<f64>,
    pub verdict: LadderVerdict,
    pub truncated: Option<String>,
}

/// Slope below which terms are judged summable.
pub const SUMMABLE_SLOPE: f64 = -1.1;
const SAMPLES_PER_RUNG: usize = 64;
const SAMPLE_SPAN: f64 = 8.0;

/// Infimum of `ln(−LW/W)` over `|x| > e^s`, sampled on `[s, s + 8]`.
fn ln_lambda(w: &ExpPowerW, v: &Potential, s: f64) -> Option<f64> {
    let mut best = f64::INFINITY;
    for i in 0..=SAMPLES_PER_RUNG {
        let si = s + SAMPLE_SPAN * (i as f64 / SAMPLES_PER_RUNG as f64).powi(2);
        best = best.min(w.ln_rate(v, si)?);
    }
    Some(best)
}

pub fn build_ladder(
    v: &Potential,
    w: ExpPowerW,
    schedule: Schedule,
    convention: WConvention,
    k0: usize,
    k_max: usize,
) -> Result<LadderReport> {
    if matches!(v.family, Family::Table(_)) || !v.is_symmetric() {
        return Err(Error::InvalidParameter("ladder needs a symmetric closed-form potential".into()));
    }
    if k_max <= k0 {
        return Err(Error::InvalidParameter(format!("need k_max > k0, got {k_max} <= {k0}")));
    }
    let mut rows = Vec::new();
    let mut truncated = None;
    let mut sum = 0.0;
    let mut delta = [f64::NAN; 2];
    for k in k0..=k_max {
        let s = schedule.ln_radius(k as f64);
        let s_next = schedule.ln_radius(k as f64 + 1.0);
        if !(s_next > s) {
            return Err(Error::InvalidParameter("radii must increase".into()));
        }
        let Some(ll) = ln_lambda(&w, v, s) else {
            truncated = Some(format!("no positive rate beyond R_{k} = e^{s}"));
            break;
        };
        if k == k0 {
            let l0 = ll.exp();
            delta = [l0 / 2.0, l0 / 4.0];
        }
        let ln_ln_w = match convention {
            WConvention::Annulus => w.ln_ln_w(s_next),
            WConvention::Inner => w.ln_ln_w(s),
        };
        let ln_term = ln_ln_w - ll;
        let term = ln_term.exp();
        sum += term;
        rows.push(LadderRow {
            k,
            ln_radius: s,
            ln_lambda: ll,
            ln_ln_w,
            ln_term,
            term,
            partial_sum: sum,
            ln_product: [delta[0] * sum, delta[1] * sum],
        });
    }

    let tail: Vec<&LadderRow> = rows.iter().skip(rows.len() / 2).collect();
    let fit = if tail.len() >= 3 {
        let lk: Vec<f64> = tail.iter().map(|r| (r.k as f64).ln()).collect();
        let lt: Vec<f64> = tail.iter().map(|r| r.ln_term).collect();
        fit_line(&lk, &lt)
    } else {
        None
    };
    let tail_slope = fit.map(|f| f.slope);
    let max_increment_beyond_40 =
        rows.iter().filter(|r| r.k > 40).map(|r| r.term).reduce(f64::max);
    let verdict = match (&truncated, tail_slope) {
        (Some(_), _) | (None, None) => LadderVerdict::Truncated,
        (None, Some(sl)) if sl < SUMMABLE_SLOPE && sum.is_finite() => LadderVerdict::Convergent,
        _ => LadderVerdict::Divergent,
    };
    let limit_estimate = match (verdict, fit) {
        (LadderVerdict::Convergent, Some(f)) => {
            let kk = rows.last().map(|r| r.k as f64).unwrap_or(1.0);
            // Σ_{k>K} c k^m ≈ ∫_K^∞ c k^m dk
            Some(sum + f.intercept.exp() * kk.powf(f.slope + 1.0) / (-f.slope - 1.0))
        }
        _ => None,
    };
    Ok(LadderReport {
        potential: v.tag().into(),
        w: w.tag(),
        schedule: schedule.tag(),
        convention,
        k0,
        delta,
        rows,
        tail_slope,
        max_increment_beyond_40,
        limit_estimate,
        verdict,
        truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e_k() -> Schedule {
        Schedule::ExpPower { power: 1.0 }
    }

    #[test]
    fn logpower_two_converges_like_inverse_square() {
        let v = Potential::logpower(2.0).unwrap();
        let r = build_ladder(&v, ExpPowerW::new(0.5, 2.0).unwrap(), e_k(), WConvention::Annulus, 1, 80).unwrap();
        assert_eq!(r.verdict, LadderVerdict::Convergent);
        let sl = r.tail_slope.unwrap();
        assert!((sl + 2.0).abs() < 0.4, "{sl}");
        assert!(r.max_increment_beyond_40.unwrap() < 1e-3);
        // term_k ≈ e²/(2(8k² + 8k − 1)) at large k
        let row = &r.rows[59];
        let k = row.k as f64;
        let approx = std::f64::consts::E.powi(2) / (2.0 * (8.0 * k * k + 8.0 * k - 1.0));
        assert!((row.term / approx - 1.0).abs() < 0.02, "{} vs {approx}", row.term);
    }

    #[test]
    fn quadratic_diverges() {
        // −LW/W = x²/4 − 1/2 for W = e^{x²/4}
        let v = Potential::quadratic();
        let w = ExpPowerW::new(0.25, 2.0).unwrap();
        let r = build_ladder(&v, w, e_k(), WConvention::Annulus, 1, 40).unwrap();
        assert_eq!(r.verdict, LadderVerdict::Divergent);
        let row = &r.rows[3];
        let x2 = (2.0 * row.ln_radius).exp();
        assert!((row.ln_lambda.exp() - (x2 / 4.0 - 0.5)).abs() < 1e-9 * x2);
    }

    #[test]
    fn cauchy_has_no_rate() {
        let v = Potential::cauchy(2.0).unwrap();
        let r = build_ladder(&v, ExpPowerW::new(0.5, 2.0).unwrap(), e_k(), WConvention::Annulus, 1, 10).unwrap();
        assert_eq!(r.verdict, LadderVerdict::Truncated);
        assert!(r.rows.is_empty());
    }

    #[test]
    fn logpower_half_depends_on_convention() {
        let v = Potential::logpower(0.5).unwrap();
        let w = ExpPowerW::new(0.5, 2.0).unwrap();
        let sch = Schedule::ExpPower { power: 4.0 };
        let inner = build_ladder(&v, w, sch, WConvention::Inner, 1, 60).unwrap();
        assert_eq!(inner.verdict, LadderVerdict::Convergent);
        let annulus = build_ladder(&v, w, sch, WConvention::Annulus, 1, 60).unwrap();
        assert_eq!(annulus.verdict, LadderVerdict::Divergent);
    }
}
