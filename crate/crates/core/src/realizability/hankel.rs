//! Exact realizability of monomial moments on `[-1, 1]` via Hankel matrices.

use nalgebra::DVector;

use crate::linalg::cholesky;

fn positive_definite(n: usize, entry: impl Fn(usize, usize) -> f64) -> bool {
    let mut a: Vec<f64> = (0..n * n).map(|k| entry(k / n, k % n)).collect();
    cholesky(&mut a, n)
}

/// Strict membership of `(u_0, ..., u_N)` in the interior of the realizable set.
///
/// Even `N = 2n`: `[u_{i+j}]_{i,j<=n}` and `[u_{i+j} - u_{i+j+2}]_{i,j<n}` positive definite.
/// Odd `N = 2n+1`: `[u_{i+j} + u_{i+j+1}]` and `[u_{i+j} - u_{i+j+1}]`, `i,j <= n`.
pub fn hankel_realizable(u: &DVector<f64>) -> bool {
    if u.is_empty() || u.iter().any(|x| !x.is_finite()) {
        return false;
    }
    let big_n = u.len() - 1;
    if big_n == 0 {
        return u[0] > 0.0;
    }
    let n = big_n / 2;
    if big_n.is_multiple_of(2) {
        positive_definite(n + 1, |i, j| u[i + j])
            && positive_definite(n, |i, j| u[i + j] - u[i + j + 2])
    } else {
        positive_definite(n + 1, |i, j| u[i + j] + u[i + j + 1])
            && positive_definite(n + 1, |i, j| u[i + j] - u[i + j + 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_vec(x.to_vec())
    }

    #[test]
    fn examples() {
        assert!(hankel_realizable(&v(&[1.0, 0.0, 1.0 / 3.0])));
        assert!(!hankel_realizable(&v(&[1.0, 1.0, 1.0])));
        assert!(!hankel_realizable(&v(&[1.0, 0.0, 1.01])));
        assert!(hankel_realizable(&v(&[1.0, 0.5])));
        assert!(!hankel_realizable(&v(&[1.0, 1.5])));
        assert!(!hankel_realizable(&v(&[1.0, 1.0])));
        // Isotropic N = 3 and N = 4.
        assert!(hankel_realizable(&v(&[1.0, 0.0, 1.0 / 3.0, 0.0])));
        assert!(hankel_realizable(&v(&[1.0, 0.0, 1.0 / 3.0, 0.0, 0.2])));
        // Two-atom measure is on the boundary for N = 4.
        let m = |p: i32| 0.5 * (0.5f64.powi(p) + (-0.5f64).powi(p));
        assert!(!hankel_realizable(&v(&[m(0), m(1), m(2), m(3), m(4)])));
    }
}
