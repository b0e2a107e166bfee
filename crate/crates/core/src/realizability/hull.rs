//! Brute-force convex hull by enumeration of `d`-subsets, used as a test oracle.

use nalgebra::{DMatrix, DVector};

use super::Facet;
use crate::{Error, Result};

/// Facets of the convex hull of `points` in `R^d`.
///
/// Every `d`-subset spans a candidate hyperplane; it is kept when all points
/// lie on one side. Cost is `O(C(n, d) n d)`, fine for the small oracle cases.
pub fn brute_force_hull(points: &[DVector<f64>]) -> Result<Vec<Facet>> {
    let d = points
        .first()
        .map(|p| p.len())
        .ok_or_else(|| Error::Construction("no points".into()))?;
    if points.len() <= d {
        return Err(Error::Construction(format!(
            "{} points cannot span dimension {d}",
            points.len()
        )));
    }
    let scale = points.iter().map(|p| p.amax()).fold(1.0, f64::max);
    let tol = 1e-10 * scale;
    let mut facets: Vec<Facet> = Vec::new();
    let mut idx: Vec<usize> = (0..d).collect();
    loop {
        if let Some(a) = normal_through(points, &idx) {
            let b = a.dot(&points[idx[0]]);
            let res: Vec<f64> = points.iter().map(|p| a.dot(p) - b).collect();
            let candidate = if res.iter().all(|&r| r <= tol) {
                Some(Facet::new(a, b)?)
            } else if res.iter().all(|&r| r >= -tol) {
                Some(Facet::new(-a, -b)?)
            } else {
                None
            };
            if let Some(f) = candidate {
                let dup = facets
                    .iter()
                    .any(|g| (&g.normal - &f.normal).amax() < 1e-9 && (g.offset - f.offset).abs() < 1e-9);
                if !dup {
                    facets.push(f);
                }
            }
        }
        if !next_combination(&mut idx, points.len()) {
            break;
        }
    }
    if facets.len() < d + 1 {
        return Err(Error::Construction("points are affinely dependent".into()));
    }
    Ok(facets)
}

fn normal_through(points: &[DVector<f64>], idx: &[usize]) -> Option<DVector<f64>> {
    let d = idx.len();
    if d == 1 {
        return Some(DVector::from_element(1, 1.0));
    }
    let p0 = &points[idx[0]];
    let diffs = DMatrix::from_fn(d - 1, d, |r, c| points[idx[r + 1]][c] - p0[c]);
    // Generalised cross product by cofactor expansion.
    let a = DVector::from_fn(d, |k, _| {
        let minor = diffs.clone().remove_column(k);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sign * minor.determinant()
    });
    let scale = diffs.amax().max(1e-300).powi(d as i32 - 1);
    (a.norm() > 1e-12 * scale).then_some(a)
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
