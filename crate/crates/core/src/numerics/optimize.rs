//! Scalar maximization and root bracketing.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
/// Returns `(argmax, max)`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..300 {
        if (b - a).abs() <= tol * (1.0 + c.abs().max(d.abs())) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Maximize `f` over `[a, b]` by a uniform scan of `n` points followed by a
/// golden-section polish on the bracket around the best sample.
pub fn scan_then_golden<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> (f64, f64) {
    let n = n.max(3);
    let step = (b - a) / (n - 1) as f64;
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..n {
        let v = f(a + i as f64 * step);
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    let lo = a + best.saturating_sub(1) as f64 * step;
    let hi = a + (best + 1).min(n - 1) as f64 * step;
    let (x, v) = golden_max(&f, lo, hi, 1e-14);
    if v >= best_v {
        (x, v)
    } else {
        (a + best as f64 * step, best_v)
    }
}

/// Bisection for a sign change of `f` on `[lo, hi]`; `f(lo)` and `f(hi)` must
/// differ in sign. Returns the midpoint of the final bracket.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let flo = f(lo);
    let lo_neg = flo < 0.0;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= tol * (1.0 + mid.abs()) || mid == lo || mid == hi {
            break;
        }
        if (f(mid) < 0.0) == lo_neg {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, v) = golden_max(|x| -(x - 1.3).powi(2) + 2.0, -5.0, 5.0, 1e-12);
        assert!((x - 1.3).abs() < 1e-6);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn scan_escapes_local_maximum() {
        let f = |x: f64| (3.0 * x).sin() + 0.1 * x;
        let (x, _) = scan_then_golden(f, 0.0, 10.0, 200);
        // global max near the last crest below 10
        assert!(x > 8.0, "x = {x}");
    }

    #[test]
    fn bisect_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-15);
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }
}
