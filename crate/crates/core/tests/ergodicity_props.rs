use ergolab_core::ergodicity::{entropy_decay, point_mass_entropy, tv_decay, uniform_tv_sup, variance_decay};
use ergolab_core::generator::DiscreteGenerator;
use ergolab_core::ladder::{build_ladder, ExpPowerW, LadderVerdict, Schedule, WConvention};
use ergolab_core::numerics::quadrature::integrate;
use ergolab_core::scenario::{Potential, Scenario, TruncationPolicy};

fn gen(p: Potential, n: usize) -> DiscreteGenerator {
    let s = Scenario::build(p, TruncationPolicy::default()).unwrap();
    DiscreteGenerator::build(&s, n).unwrap()
}

fn grid(t_max: f64, dt: f64) -> Vec<f64> {
    (0..=((t_max / dt).round() as usize)).map(|k| k as f64 * dt).collect()
}

/// TV between N(m, s²) and N(0, 1).
fn gaussian_tv(m: f64, s2: f64) -> f64 {
    let s = s2.sqrt();
    let f = |x: f64| {
        let p = (-(x - m).powi(2) / (2.0 * s2)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
        let q = (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        (p - q).abs()
    };
    0.5 * integrate(f, -20.0, 20.0, 1e-13, 1e-11).value
}

#[test]
fn variance_rate_matches_twice_the_gap() {
    for p in [
        Potential::quadratic(),
        Potential::power(1.5).unwrap(),
        Potential::power(3.0).unwrap(),
        Potential::logpower(2.0).unwrap(),
    ] {
        let g = gen(p.clone(), 2048);
        let l1 = g.lambda1();
        // generic start with a first-mode component: odd part plus even part
        let f0: Vec<f64> = g.nodes().iter().map(|x| x + 0.3 * x * x + (x / 3.0).sin()).collect();
        let t_end = 12.0 / l1;
        let c = variance_decay(&g, &f0, &grid(t_end, t_end / 96.0)).unwrap();
        let r = c.fitted_rate.unwrap();
        assert!((r / (2.0 * l1) - 1.0).abs() < 0.05, "{}: rate {r} vs 2λ₁ = {}", p.tag(), 2.0 * l1);
    }
}

#[test]
fn tv_matches_ou_kernel() {
    let g = gen(Potential::quadratic(), 4096);
    let times = grid(4.0, 0.25);
    let c = tv_decay(&g, 2.0, &times).unwrap();
    let x0 = g.nodes()[g.nearest(2.0)];
    for (t, v) in times.iter().zip(&c.values).skip(2) {
        let want = gaussian_tv(x0 * (-t).exp(), 1.0 - (-2.0 * t).exp());
        assert!((v - want).abs() <= 0.02 * want + 5.0 * g.h(), "t = {t}: {v} vs {want}");
    }
    assert!(c.max_increase() <= 1e-9);
}

#[test]
fn pinsker_along_point_mass_curves() {
    let g = gen(Potential::logpower(1.0).unwrap(), 2048);
    let times = grid(3.0, 0.1);
    let tv = tv_decay(&g, 1.5, &times).unwrap();
    let ent = point_mass_entropy(&g, 1.5, &times).unwrap();
    for (a, e) in tv.values.iter().zip(&ent.values) {
        assert!(a * a <= 0.5 * e * (1.0 + 1e-9) + 1e-15, "{a} vs {e}");
    }
}

#[test]
fn entropy_rate_ou() {
    let g = gen(Potential::quadratic(), 4096);
    let f: Vec<f64> = g.nodes().iter().map(|x| (0.5 * x).exp()).collect();
    let c = entropy_decay(&g, &f, &grid(10.0, 0.2)).unwrap();
    assert!(c.fitted_rate.unwrap() >= 0.95);
    assert!(c.max_increase() <= 1e-9);
}

#[test]
fn uniform_tv_nonincreasing_in_t() {
    let g = gen(Potential::logpower(2.0).unwrap(), 1024);
    let mut prev = f64::INFINITY;
    for t in [0.1, 0.3, 0.6, 1.0] {
        let s = uniform_tv_sup(&g, t, 32).unwrap().sup;
        assert!(s <= prev + 1e-9, "t = {t}");
        prev = s;
    }
}

#[test]
fn refined_ladder_stays_below_its_limit() {
    let v = Potential::logpower(2.0).unwrap();
    let w = ExpPowerW::new(0.5, 2.0).unwrap();
    for power_scale in [1.0, 0.5] {
        // R_k = exp(k^{1}) refined as R_k = exp(k/2) via a geometric schedule
        let sch = if power_scale == 1.0 {
            Schedule::ExpPower { power: 1.0 }
        } else {
            Schedule::Geometric { r0: 1.0, ratio: 0.5f64.exp() }
        };
        let r = build_ladder(&v, w, sch, WConvention::Annulus, 2, 160).unwrap();
        assert_eq!(r.verdict, LadderVerdict::Convergent);
        let lim = r.limit_estimate.unwrap();
        assert!(r.rows.iter().all(|row| row.partial_sum <= lim), "{}", r.schedule);
    }
}
