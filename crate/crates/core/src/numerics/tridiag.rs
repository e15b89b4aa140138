//! Tridiagonal linear algebra: Thomas factorization and Sturm-sequence
//! bisection for symmetric tridiagonal spectra.

use crate::error::{Error, Result};

/// LU factorization of a tridiagonal matrix without pivoting.
///
/// Row `i` of the matrix is `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1]`;
/// `lower[0]` and `upper[n-1]` are ignored.
#[derive(Debug, Clone)]
pub struct TridiagLu {
    lower: Vec<f64>,
    upper: Vec<f64>,
    // modified diagonal (pivots)
    pivot: Vec<f64>,
}

impl TridiagLu {
    pub fn new(lower: &[f64], diag: &[f64], upper: &[f64]) -> Result<Self> {
        let n = diag.len();
        assert!(lower.len() == n && upper.len() == n);
        let mut pivot = vec![0.0; n];
        for i in 0..n {
            let p = if i == 0 {
                diag[0]
            } else {
                diag[i] - lower[i] * upper[i - 1] / pivot[i - 1]
            };
            if p == 0.0 || !p.is_finite() {
                return Err(Error::Singular(i));
            }
            pivot[i] = p;
        }
        Ok(Self { lower: lower.to_vec(), upper: upper.to_vec(), pivot })
    }

    pub fn len(&self) -> usize {
        self.pivot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pivot.is_empty()
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.len();
        for i in 1..n {
            rhs[i] -= self.lower[i] * rhs[i - 1] / self.pivot[i - 1];
        }
        rhs[n - 1] /= self.pivot[n - 1];
        for i in (0..n - 1).rev() {
            rhs[i] = (rhs[i] - self.upper[i] * rhs[i + 1]) / self.pivot[i];
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Number of eigenvalues strictly below `lambda` of the symmetric tridiagonal
/// matrix with diagonal `diag` and squared off-diagonal `off_sq`
/// (`off_sq[i]` couples rows `i` and `i+1`).
pub fn sturm_count(diag: &[f64], off_sq: &[f64], lambda: f64) -> usize {
    let n = diag.len();
    if n == 0 {
        return 0;
    }
    let scale = diag.iter().fold(1.0_f64, |m, d| m.max(d.abs()));
    let guard = f64::EPSILON * scale * 1e-3;
    let mut count = 0;
    let mut q = diag[0] - lambda;
    for i in 0..n {
        if i > 0 {
            let prev = if q.abs() < guard { guard.copysign(q) } else { q };
            q = diag[i] - lambda - off_sq[i - 1] / prev;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Gershgorin enclosure `[lo, hi]` of the spectrum.
pub fn gershgorin(diag: &[f64], off_sq: &[f64]) -> (f64, f64) {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let l = if i > 0 { off_sq[i - 1].sqrt() } else { 0.0 };
        let r = if i + 1 < n { off_sq[i].sqrt() } else { 0.0 };
        lo = lo.min(diag[i] - l - r);
        hi = hi.max(diag[i] + l + r);
    }
    (lo, hi)
}

/// The `k`-th smallest eigenvalue (0-based) by Sturm bisection.
pub fn kth_eigenvalue(diag: &[f64], off_sq: &[f64], k: usize) -> f64 {
    assert!(k < diag.len(), "eigenvalue index out of range");
    let (mut lo, mut hi) = gershgorin(diag, off_sq);
    let pad = 1e-12 * (hi - lo).abs().max(1.0);
    lo -= pad;
    hi += pad;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 4.0 * f64::EPSILON * mid.abs() || mid == lo || mid == hi {
            break;
        }
        if sturm_count(diag, off_sq, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_solves_diagonally_dominant_system() {
        let n = 50;
        let lower = vec![-1.0; n];
        let upper = vec![-1.0; n];
        let diag = vec![3.0; n];
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            rhs[i] = diag[i] * x_true[i];
            if i > 0 {
                rhs[i] += lower[i] * x_true[i - 1];
            }
            if i + 1 < n {
                rhs[i] += upper[i] * x_true[i + 1];
            }
        }
        let lu = TridiagLu::new(&lower, &diag, &upper).unwrap();
        let x = lu.solve(&rhs);
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_pivot_is_reported() {
        let r = TridiagLu::new(&[0.0, 1.0], &[0.0, 1.0], &[1.0, 0.0]);
        assert!(matches!(r, Err(Error::Singular(0))));
    }

    #[test]
    fn discrete_laplacian_spectrum() {
        // Dirichlet Laplacian tridiag(-1, 2, -1): eigenvalues 2 - 2cos(kπ/(n+1)).
        let n = 40;
        let d = vec![2.0; n];
        let e2 = vec![1.0; n - 1];
        for k in 0..n {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((kth_eigenvalue(&d, &e2, k) - exact).abs() < 1e-12);
        }
        assert_eq!(sturm_count(&d, &e2, 0.0), 0);
        assert_eq!(sturm_count(&d, &e2, 4.0), n);
    }
}
