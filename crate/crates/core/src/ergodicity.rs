//! Convergence to equilibrium: variance, entropy and total-variation decay
//! curves, uniform ergodicity and ultraboundedness probes across truncation
//! sweeps.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::generator::DiscreteGenerator;
use crate::lyapunov::{certify_drift, Candidate, DriftCertificate, LwMode};
use crate::numerics::fit::fit_line;
use crate::scenario::Scenario;

/// Fit window on `metric / metric(0)`.
pub const FIT_WINDOW: (f64, f64) = (1e-8, 1e-2);
const FALLBACK_WINDOW: (f64, f64) = (1e-13, 1e-1);

/// Floor for negative densities produced by the stepper.
pub const CLIP_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, Serialize)]
pub struct DecayCurve {
    pub metric: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub fitted_rate: Option<f64>,
    /// Time range of the points used in the fit.
    pub window: Option<[f64; 2]>,
    pub residual: Option<f64>,
    pub warning: Option<String>,
    /// Nodes clipped to [`CLIP_FLOOR`] over the whole curve.
    pub clipped: usize,
}

impl DecayCurve {
    fn new(metric: &str, times: &[f64], values: Vec<f64>, clipped: usize) -> Self {
        let mut c = Self {
            metric: metric.into(),
            times: times.to_vec(),
            values,
            fitted_rate: None,
            window: None,
            residual: None,
            warning: None,
            clipped,
        };
        c.fit();
        c
    }

    fn select(&self, w: (f64, f64)) -> (Vec<f64>, Vec<f64>) {
        let v0 = self.values[0];
        self.times
            .iter()
            .zip(&self.values)
            .filter(|(_, v)| {
                let r = **v / v0;
                r >= w.0 && r <= w.1
            })
            .map(|(t, v)| (*t, v.ln()))
            .unzip()
    }

    fn fit(&mut self) {
        let Some(&v0) = self.values.first() else { return };
        if !(v0 > 1e-300) {
            self.warning = Some("zero curve, no fit".into());
            return;
        }
        let (mut t, mut l) = self.select(FIT_WINDOW);
        if t.len() < 3 {
            (t, l) = self.select(FALLBACK_WINDOW);
            self.warning = Some(format!(
                "fewer than 3 points with metric/metric0 in [{:e}, {:e}]; fitted on a wider window",
                FIT_WINDOW.0, FIT_WINDOW.1
            ));
        }
        if let Some(f) = fit_line(&t, &l) {
            self.fitted_rate = Some(-f.slope);
            self.window = Some([t[0], t[t.len() - 1]]);
            self.residual = Some(f.residual);
        }
    }

    /// Largest relative increase between consecutive values.
    pub fn max_increase(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| (w[1] - w[0]) / w[0].abs().max(1e-300))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `Var_μ(P_t f0)` along `times`.
pub fn variance_decay(gen: &DiscreteGenerator, f0: &[f64], times: &[f64]) -> Result<DecayCurve> {
    let states = gen.evolve(f0, times)?;
    let values = states.iter().map(|f| gen.variance(f)).collect();
    Ok(DecayCurve::new("variance", times, values, 0))
}

/// `Ent_μ(g) = Σ m g ln g` for `g` with `μ(g) = 1`, clipping negatives.
fn entropy_of(gen: &DiscreteGenerator, g: &[f64], clipped: &mut usize, clipped_mass: &mut f64) -> f64 {
    let m = gen.mass();
    let mut e = 0.0;
    for (mi, &gi) in m.iter().zip(g) {
        let v = if gi < CLIP_FLOOR {
            *clipped += 1;
            *clipped_mass = clipped_mass.max(mi * (CLIP_FLOOR - gi));
            CLIP_FLOOR
        } else {
            gi
        };
        e += mi * v * v.ln();
    }
    e.max(0.0)
}

/// `Ent_μ(P_t g0)` with `g0 = f0²` normalized to `μ(g0) = 1`.
pub fn entropy_decay(gen: &DiscreteGenerator, f0_sq: &[f64], times: &[f64]) -> Result<DecayCurve> {
    if f0_sq.iter().any(|v| *v < 0.0) {
        return Err(Error::InvalidParameter("initial density must be nonnegative".into()));
    }
    let z = gen.mean(f0_sq);
    if !(z > 0.0) {
        return Err(Error::InvalidParameter("initial density has zero mass".into()));
    }
    let g0: Vec<f64> = f0_sq.iter().map(|v| v / z).collect();
    let states = gen.evolve(&g0, times)?;
    let mut clipped = 0;
    let mut clipped_mass: f64 = 0.0;
    let values: Vec<f64> = states.iter().map(|g| entropy_of(gen, g, &mut clipped, &mut clipped_mass)).collect();
    if clipped_mass > 1e-3 {
        return Err(Error::Inconsistent(format!("stepper produced negative density carrying mass {clipped_mass:.3e}")));
    }
    Ok(DecayCurve::new("entropy", times, values, clipped))
}

/// Density of the point mass at node `i` with respect to the discrete μ.
pub fn point_mass(gen: &DiscreteGenerator, i: usize) -> Vec<f64> {
    let mut f = vec![0.0; gen.len()];
    f[i] = (-gen.log_mass()[i]).exp();
    f
}

fn tv_of(gen: &DiscreteGenerator, p: &[f64]) -> f64 {
    0.5 * gen.log_mass().iter().zip(p).map(|(l, v)| l.exp() * (v - 1.0).abs()).sum::<f64>()
}

/// `‖P_t(x0, ·) − μ‖_TV` along `times`, from the point mass at the node
/// nearest to `x0`.
pub fn tv_decay(gen: &DiscreteGenerator, x0: f64, times: &[f64]) -> Result<DecayCurve> {
    let f0 = point_mass(gen, gen.nearest(x0));
    let states = gen.evolve(&f0, times)?;
    let values = states.iter().map(|p| tv_of(gen, p)).collect();
    Ok(DecayCurve::new("tv", times, values, 0))
}

/// Entropy curve of the same point-mass start, for Pinsker checks.
pub fn point_mass_entropy(gen: &DiscreteGenerator, x0: f64, times: &[f64]) -> Result<DecayCurve> {
    let f0 = point_mass(gen, gen.nearest(x0));
    let states = gen.evolve(&f0, times)?;
    let mut clipped = 0;
    let mut cm: f64 = 0.0;
    let values = states.iter().map(|g| entropy_of(gen, g, &mut clipped, &mut cm)).collect();
    Ok(DecayCurve::new("entropy", times, values, clipped))
}

/// Start nodes for sweeps: every `stride`-th node plus both ends.
fn sweep_nodes(gen: &DiscreteGenerator, count: usize) -> Vec<usize> {
    let n = gen.len();
    let stride = (n / count.max(2)).max(1);
    let mut v: Vec<usize> = (0..n).step_by(stride).collect();
    if *v.last().unwrap() != n - 1 {
        v.push(n - 1);
    }
    v
}

#[derive(Debug, Clone, Serialize)]
pub struct Profile {
    pub x: Vec<f64>,
    pub value: Vec<f64>,
    pub sup: f64,
}

/// `x ↦ ‖P_t(x, ·) − μ‖_TV` over a subsample of start nodes.
pub fn uniform_tv_sup(gen: &DiscreteGenerator, t: f64, starts: usize) -> Result<Profile> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("t must be > 0, got {t}")));
    }
    let nodes = sweep_nodes(gen, starts);
    let value: Vec<f64> = nodes
        .par_iter()
        .map(|&i| gen.semigroup_step(&point_mass(gen, i), t).map(|p| tv_of(gen, &p)))
        .collect::<Result<_>>()?;
    let x = nodes.iter().map(|&i| gen.nodes()[i]).collect();
    let sup = value.iter().copied().fold(0.0, f64::max);
    Ok(Profile { x, value, sup })
}

/// Backward-Euler steps used by [`ultraboundedness_probe`].
pub const KERNEL_STEPS: usize = 400;

/// `x ↦ sup_y p_t(x, y)`, the kernel density with respect to μ.
///
/// Uses the monotone stepper: the kernel has to be resolved where the
/// masses are far below machine epsilon of the bulk.
pub fn ultraboundedness_probe(gen: &DiscreteGenerator, t: f64, starts: usize) -> Result<Profile> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("t must be > 0, got {t}")));
    }
    let nodes = sweep_nodes(gen, starts);
    let value: Vec<f64> = nodes
        .par_iter()
        .map(|&i| {
            gen.semigroup_step_monotone(&point_mass(gen, i), t, KERNEL_STEPS)
                .map(|p| p.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        })
        .collect::<Result<_>>()?;
    let x = nodes.iter().map(|&i| gen.nodes()[i]).collect();
    let sup = value.iter().copied().fold(0.0, f64::max);
    Ok(Profile { x, value, sup })
}

/// How a sweep of profile sups is judged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendRule {
    /// TV sups must converge to a limit below 0.9 (geometric extrapolation
    /// of the increments); saturation at 1 means non-uniform.
    TvFlattening,
    /// Kernel sups must grow by less than 50% from first to last radius,
    /// with shrinking increments.
    KernelBounded,
}

/// Sup of a profile across truncation radii, with a bounded/growing verdict.
#[derive(Debug, Clone, Serialize)]
pub struct SweepTrend {
    pub rule: TrendRule,
    pub radii: Vec<f64>,
    pub sups: Vec<f64>,
    /// `sups.last() / sups.first()`
    pub growth: f64,
    /// Ratio of the last two increments.
    pub increment_ratio: f64,
    /// Geometric extrapolation of the sups to infinite radius.
    pub extrapolated: f64,
    pub bounded: bool,
}

impl SweepTrend {
    pub fn new(rule: TrendRule, radii: &[f64], sups: Vec<f64>) -> Self {
        let k = sups.len();
        let growth = sups[k - 1] / sups[0];
        let (q, ext) = if k >= 3 {
            let d1 = sups[k - 2] - sups[k - 3];
            let d2 = sups[k - 1] - sups[k - 2];
            let q = if d1.abs() > 0.0 { d2 / d1 } else { 0.0 };
            let ext = if (0.0..1.0).contains(&q) { sups[k - 1] + d2 * q / (1.0 - q) } else if q < 0.0 { sups[k - 1] } else { f64::INFINITY };
            (q, ext)
        } else {
            (f64::NAN, f64::NAN)
        };
        let bounded = match rule {
            TrendRule::TvFlattening => q < 0.7 && ext < 0.9,
            TrendRule::KernelBounded => growth < 1.5 && q < 1.0,
        };
        Self { rule, radii: radii.to_vec(), sups, growth, increment_ratio: q, extrapolated: ext, bounded }
    }
}

pub type ProbeFn = fn(&DiscreteGenerator, f64, usize) -> Result<Profile>;

/// Run a profile probe at each radius (at least three) and judge the trend.
pub fn sweep_trend(
    scenario: &Scenario,
    n: usize,
    t: f64,
    radii: &[f64],
    starts: usize,
    rule: TrendRule,
) -> Result<(SweepTrend, Vec<Profile>)> {
    if radii.len() < 3 || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("need at least three increasing radii".into()));
    }
    let probe: ProbeFn = match rule {
        TrendRule::TvFlattening => uniform_tv_sup,
        TrendRule::KernelBounded => ultraboundedness_probe,
    };
    let mut profiles = Vec::with_capacity(radii.len());
    for &r in radii {
        let s = scenario.with_radius(r)?;
        let g = DiscreteGenerator::build(&s, n)?;
        profiles.push(probe(&g, t, starts)?);
    }
    let sups = profiles.iter().map(|p| p.sup).collect();
    Ok((SweepTrend::new(rule, radii, sups), profiles))
}

/// Check that `P_t W` is again a Lyapunov function off `U` with rate
/// `lambda`. Reported as an advisory diagnostic.
pub fn stepped_lyapunov_check(
    gen: &DiscreteGenerator,
    cand: &Candidate,
    t: f64,
    u: (f64, f64),
    lambda: f64,
) -> Result<DriftCertificate> {
    let w = cand.values(gen.nodes());
    let ptw = gen.semigroup_step(&w, t)?;
    let mask = crate::lyapunov::interval_mask(gen, u.0, u.1);
    certify_drift(
        gen,
        &Candidate::Nodes { tag: format!("P_{t} {}", cand.tag()), values: ptw },
        &vec![lambda; gen.len()],
        &mask,
        1,
        LwMode::Discrete,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Potential, TruncationPolicy};

    fn ou(n: usize) -> DiscreteGenerator {
        let s = Scenario::build(Potential::quadratic(), TruncationPolicy { radius: Some(8.0), ..Default::default() })
            .unwrap();
        DiscreteGenerator::build(&s, n).unwrap()
    }

    fn grid(t_max: f64, dt: f64) -> Vec<f64> {
        (0..=((t_max / dt).round() as usize)).map(|k| k as f64 * dt).collect()
    }

    #[test]
    fn variance_rate_first_mode() {
        let g = ou(2048);
        let x = g.nodes().to_vec();
        let c = variance_decay(&g, &x, &grid(10.0, 0.25)).unwrap();
        let r = c.fitted_rate.unwrap();
        assert!((r - 2.0).abs() < 0.04, "{r}");
        assert!(c.max_increase() <= 1e-12);
    }

    #[test]
    fn constant_initial_condition_gives_zero_curve() {
        let g = ou(256);
        let c = variance_decay(&g, &vec![1.0; g.len()], &grid(1.0, 0.5)).unwrap();
        assert!(c.fitted_rate.is_none());
        let e = entropy_decay(&g, &vec![1.0; g.len()], &grid(1.0, 0.5)).unwrap();
        assert!(e.values.iter().all(|v| *v < 1e-14));
    }

    #[test]
    fn entropy_of_tilted_gaussian() {
        // g0 ∝ e^{x/2}: Ent(P_t g0) = e^{-2t}/8
        let g = ou(2048);
        let f: Vec<f64> = g.nodes().iter().map(|x| (0.5 * x).exp()).collect();
        let c = entropy_decay(&g, &f, &grid(8.0, 0.25)).unwrap();
        assert!((c.values[0] - 0.125).abs() < 1e-4, "{}", c.values[0]);
        assert!((c.values[4] - (-2.0f64).exp() / 8.0).abs() < 1e-4);
        assert!(c.fitted_rate.unwrap() > 1.9);
    }

    #[test]
    fn tv_starts_near_one_and_decreases() {
        let g = ou(1024);
        let c = tv_decay(&g, 2.0, &grid(3.0, 0.25)).unwrap();
        let i = g.nearest(2.0);
        assert!((c.values[0] - (1.0 - g.mass()[i])).abs() < 1e-12);
        assert!(c.max_increase() <= 1e-9);
    }

    #[test]
    fn trend_rules() {
        let r = [1.0, 1.5, 2.0];
        // saturating at 1: not uniform
        assert!(!SweepTrend::new(TrendRule::TvFlattening, &r, vec![0.78, 0.94, 0.99]).bounded);
        assert!(SweepTrend::new(TrendRule::TvFlattening, &r, vec![0.062, 0.066, 0.068]).bounded);
        assert!(SweepTrend::new(TrendRule::KernelBounded, &r, vec![2.4, 2.7, 2.85]).bounded);
        assert!(!SweepTrend::new(TrendRule::KernelBounded, &r, vec![160.0, 5e4, 2e8]).bounded);
    }

    #[test]
    fn monotone_kernel_preserves_mass() {
        let g = ou(512);
        let p = g.semigroup_step_monotone(&point_mass(&g, 400), 0.5, 100).unwrap();
        assert!(p.iter().all(|v| *v >= 0.0));
        assert!((g.mean(&p) - 1.0).abs() < 1e-12);
    }
}
