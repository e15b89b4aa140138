//! One-dimensional quadrature: adaptive Gauss–Kronrod for smooth integrands on
//! finite intervals, composite Simpson on uniform grids, and a log-space rule
//! for integrands whose magnitude exceeds the range of `f64`.

/// Nodes of the 15-point Kronrod rule on [-1, 1] (non-negative half).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

/// Gauss 7-point weights, paired with the odd-indexed Kronrod nodes.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let hl = 0.5 * (b - a);
    let fc = f(c);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    for j in 0..7 {
        let dx = hl * XGK[j];
        let s = f(c - dx) + f(c + dx);
        res_k += WGK[j] * s;
        if j % 2 == 1 {
            res_g += WG[j / 2] * s;
        }
    }
    (res_k * hl, ((res_k - res_g) * hl).abs())
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

/// Adaptive Gauss–Kronrod (7/15) integration of `f` over `[a, b]`.
///
/// Subdivides the interval with the largest error estimate until the summed
/// estimate falls below `max(abs_tol, rel_tol * |I|)` or the interval budget
/// is exhausted.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Integral {
    if a == b {
        return Integral { value: 0.0, error: 0.0 };
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut parts: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(64);
    let (v, e) = gk15(&f, lo, hi);
    parts.push((lo, hi, v, e));
    for _ in 0..2000 {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty partition");
        let (l, r, _, _) = parts.swap_remove(idx);
        let m = 0.5 * (l + r);
        let (v1, e1) = gk15(&f, l, m);
        let (v2, e2) = gk15(&f, m, r);
        parts.push((l, m, v1, e1));
        parts.push((m, r, v2, e2));
    }
    // Sum in ascending position order so the result does not depend on the
    // refinement history.
    parts.sort_by(|x, y| x.0.total_cmp(&y.0));
    let value: f64 = parts.iter().map(|p| p.2).sum();
    let error: f64 = parts.iter().map(|p| p.3).sum();
    Integral { value: sign * value, error }
}

/// Composite Simpson weights for `2m` uniform intervals of width `h`
/// (so `2m + 1` nodes).
pub fn simpson_weights(n_nodes: usize, h: f64) -> Vec<f64> {
    assert!(n_nodes >= 3 && n_nodes % 2 == 1, "Simpson needs an odd node count >= 3");
    let mut w = vec![0.0; n_nodes];
    for (j, wj) in w.iter_mut().enumerate() {
        *wj = if j == 0 || j == n_nodes - 1 {
            h / 3.0
        } else if j % 2 == 1 {
            4.0 * h / 3.0
        } else {
            2.0 * h / 3.0
        };
    }
    w
}

/// `ln Σ exp(a_i)`, ignoring `-inf` entries. Returns `-inf` for an empty or
/// all-`-inf` input.
pub fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let vals: Vec<f64> = values.into_iter().collect();
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = vals.iter().map(|v| (v - max).exp()).sum();
    max + s.ln()
}

/// Log-space composite Simpson integral of `exp(log_f)` over `[a, b]` with
/// `2m` panels, returning `(ln I_2m, ln I_m)` where the second value uses
/// every other node. Their gap gives a Richardson error estimate.
pub fn log_simpson<F: Fn(f64) -> f64>(log_f: &F, a: f64, b: f64, m: usize) -> (f64, f64) {
    let n = 2 * m + 1;
    let h = (b - a) / (2 * m) as f64;
    let logs: Vec<f64> = (0..n).map(|j| log_f(a + j as f64 * h)).collect();
    let fine = log_sum_exp(
        simpson_weights(n, h)
            .iter()
            .zip(&logs)
            .map(|(w, l)| w.ln() + l),
    );
    let coarse_logs: Vec<f64> = logs.iter().step_by(2).copied().collect();
    let coarse = if coarse_logs.len() >= 3 && coarse_logs.len() % 2 == 1 {
        log_sum_exp(
            simpson_weights(coarse_logs.len(), 2.0 * h)
                .iter()
                .zip(&coarse_logs)
                .map(|(w, l)| w.ln() + l),
        )
    } else {
        fine
    };
    (fine, coarse)
}

/// Adaptive log-space Simpson: doubles the panel count until the Richardson
/// estimate of the relative error drops below `rel_tol`.
///
/// Returns `(ln I, relative error estimate)`.
pub fn log_integrate<F: Fn(f64) -> f64>(log_f: F, a: f64, b: f64, rel_tol: f64) -> (f64, f64) {
    let mut m = 64;
    let mut last = (f64::NEG_INFINITY, f64::INFINITY);
    while m <= 1 << 18 {
        let (fine, coarse) = log_simpson(&log_f, a, b, m);
        if fine == f64::NEG_INFINITY {
            return (fine, 0.0);
        }
        let rel = ((coarse - fine).exp() - 1.0).abs() / 15.0;
        last = (fine, rel);
        if rel < rel_tol {
            break;
        }
        m *= 2;
    }
    last
}
