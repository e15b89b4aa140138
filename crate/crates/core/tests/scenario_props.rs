use ergolab_core::scenario::{Family, Potential, Scenario, TruncationPolicy};
use proptest::prelude::*;

fn builtins() -> Vec<Potential> {
    vec![
        Potential::quadratic(),
        Potential::power(1.5).unwrap(),
        Potential::power(2.0).unwrap(),
        Potential::power(3.0).unwrap(),
        Potential::logpower(0.5).unwrap(),
        Potential::logpower(2.0).unwrap(),
        Potential::cauchy(2.0).unwrap(),
    ]
}

#[test]
fn normalization_is_converged_for_builtins() {
    for p in builtins() {
        let s = Scenario::build(p.clone(), TruncationPolicy::default()).unwrap();
        assert!(s.z_rel_err < 1e-8, "{}: {}", p.tag(), s.z_rel_err);
        assert!(s.tail_mass < 1e-10, "{}: {}", p.tag(), s.tail_mass);
    }
}

#[test]
fn power_moments_are_log_convex() {
    let s = Scenario::build(Potential::power(3.0).unwrap(), TruncationPolicy::default()).unwrap();
    let m: Vec<f64> = (0..=10)
        .map(|n| s.measure_moment(|x: f64| x.abs().powi(2 * n)).unwrap().value.ln())
        .collect();
    for n in 1..10 {
        assert!(2.0 * m[n] <= m[n - 1] + m[n + 1] + 1e-10, "n = {n}");
    }
}

fn ou() -> Scenario {
    Scenario::build(Potential::quadratic(), TruncationPolicy::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn set_measure_monotone_and_additive(a in -5.0f64..5.0, w1 in 0.01f64..3.0, w2 in 0.01f64..3.0) {
        let s = ou();
        let m1 = s.measure_of_set(a, a + w1).value;
        let m2 = s.measure_of_set(a + w1, a + w1 + w2).value;
        let m12 = s.measure_of_set(a, a + w1 + w2).value;
        prop_assert!(m12 >= m1 - 1e-15 && m12 >= m2 - 1e-15);
        prop_assert!((m12 - m1 - m2).abs() < 1e-10);
    }

    #[test]
    fn scale_flattens_density(scale in 0.2f64..1.0) {
        // V ↦ sV with s < 1 spreads the mass: μ([−1, 1]) decreases
        let a = Scenario::build(Potential::new(Family::Power { alpha: 2.0 }, 1.0).unwrap(), TruncationPolicy::default()).unwrap();
        let b = Scenario::build(Potential::new(Family::Power { alpha: 2.0 }, scale).unwrap(), TruncationPolicy::default()).unwrap();
        prop_assert!(b.measure_of_set(-1.0, 1.0).value <= a.measure_of_set(-1.0, 1.0).value + 1e-12);
    }
}
