//! The numerically realizable set: a convex polytope on the `u_0 = 1` slice,
//! its membership test and the linear-scaling realizability limiter.

mod hankel;
mod hull;
mod polytope;

use nalgebra::{DMatrix, DVector};

pub use hankel::hankel_realizable;
pub use hull::brute_force_hull;
pub use polytope::{compose_mixed_halfspaces, cyclic_polytope_facets, gale_subsets};

use crate::basis::{BasisFamily, MomentBasis, MomentVector};
use crate::quadrature::{AngularQuadrature, QuadratureRule};
use crate::{Error, Result};

/// The half space `normal . x <= offset`, with `|normal| = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub normal: DVector<f64>,
    pub offset: f64,
}

impl Facet {
    /// Normalises `a . x <= b` to a unit normal.
    pub fn new(a: DVector<f64>, b: f64) -> Result<Self> {
        let nrm = a.norm();
        if !(nrm > 0.0) || !nrm.is_finite() || !b.is_finite() {
            return Err(Error::Construction("degenerate facet normal".into()));
        }
        Ok(Facet {
            normal: a / nrm,
            offset: b / nrm,
        })
    }

    pub fn residual(&self, x: &[f64]) -> f64 {
        self.normal.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() - self.offset
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    Interior,
    Boundary,
    Exterior,
}

/// Half-space form of the quadrature-realizable moments.
///
/// `facets` describe the slice `u_0 = 1` in the coordinates `u_1 = (u_1, ..., u_{n-1})`.
/// The lifted rows describe the truncated cone `u_0 <= 1`:
/// `u_0 <= 1` and `(-b_i, a_i) . u <= 0` for every slice facet.
#[derive(Debug, Clone)]
pub struct RealizablePolytope {
    basis: MomentBasis,
    vertices: Vec<DVector<f64>>,
    facets: Vec<Facet>,
    lifted: Vec<f64>,
    lifted_rhs: Vec<f64>,
}

const DUPLICATE_NODE: f64 = 1e-14;

fn distinct(nodes: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for x in nodes {
        if out.last().is_none_or(|&y| (x - y).abs() > DUPLICATE_NODE) {
            out.push(x);
        }
    }
    out
}

pub fn build_polytope(basis: &MomentBasis, quad: &AngularQuadrature) -> Result<RealizablePolytope> {
    let order = basis.order();
    let nodes = distinct(quad.nodes().iter().copied());
    let facets = match basis.family() {
        BasisFamily::Monomial => cyclic_polytope_facets(&nodes, order)?,
        BasisFamily::Legendre => {
            polytope::legendre_facets(&cyclic_polytope_facets(&nodes, order)?, order)?
        }
        BasisFamily::Mixed => {
            let pos: Vec<f64> = nodes.iter().copied().filter(|&x| x >= 0.0).collect();
            let neg: Vec<f64> = nodes.iter().map(|&x| -x).filter(|&x| x >= 0.0).rev().collect();
            let pos_f = cyclic_polytope_facets(&pos, order)?;
            // The negative half uses mu- = -x, so odd powers flip sign.
            let neg_f = cyclic_polytope_facets(&neg, order)?
                .into_iter()
                .map(|f| {
                    let a = DVector::from_fn(order, |k, _| {
                        if k % 2 == 0 {
                            -f.normal[k]
                        } else {
                            f.normal[k]
                        }
                    });
                    Facet::new(a, f.offset)
                })
                .collect::<Result<Vec<_>>>()?;
            compose_mixed_halfspaces(&pos_f, &neg_f)?
        }
    };
    let vertices = nodes
        .iter()
        .map(|&mu| {
            let b = basis.eval(mu)?;
            Ok(b.rows(1, b.len() - 1).into_owned())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RealizablePolytope::from_parts(*basis, vertices, facets))
}

impl RealizablePolytope {
    fn from_parts(basis: MomentBasis, vertices: Vec<DVector<f64>>, facets: Vec<Facet>) -> Self {
        let n = basis.n_mom();
        let mut lifted = Vec::with_capacity((facets.len() + 1) * n);
        let mut lifted_rhs = Vec::with_capacity(facets.len() + 1);
        lifted.push(1.0);
        lifted.extend(std::iter::repeat_n(0.0, n - 1));
        lifted_rhs.push(1.0);
        for f in &facets {
            lifted.push(-f.offset);
            lifted.extend(f.normal.iter());
            lifted_rhs.push(0.0);
        }
        RealizablePolytope {
            basis,
            vertices,
            facets,
            lifted,
            lifted_rhs,
        }
    }

    pub fn basis(&self) -> &MomentBasis {
        &self.basis
    }

    /// Dimension of the slice, `n_mom - 1`.
    pub fn dim(&self) -> usize {
        self.basis.n_mom() - 1
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    /// Distinct slice vertices `b_1(mu_j)`.
    pub fn vertices(&self) -> &[DVector<f64>] {
        &self.vertices
    }

    /// Rows `(c, rhs)` of the lifted representation `c . u <= rhs`.
    pub fn lifted_facets(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.lifted
            .chunks(self.basis.n_mom())
            .zip(self.lifted_rhs.iter().copied())
    }

    /// Largest slice residual `max_i (a_i . u_1/u_0 - b_i)`; `+inf` for `u_0 <= 0`.
    pub fn max_residual(&self, u: &[f64]) -> f64 {
        let u0 = u[0];
        if !(u0 >= VACUUM) {
            return f64::INFINITY;
        }
        let n = u.len();
        let mut worst = f64::NEG_INFINITY;
        for f in &self.facets {
            let mut s = 0.0;
            for k in 1..n {
                s += f.normal[k - 1] * u[k];
            }
            worst = worst.max(s / u0 - f.offset);
        }
        worst
    }

    /// Classifies `u`; `Boundary` means within `tol` of a facet on the slice.
    pub fn membership(&self, u: &MomentVector, tol: f64) -> Membership {
        self.classify(u.as_slice(), tol)
    }

    pub fn classify(&self, u: &[f64], tol: f64) -> Membership {
        let r = self.max_residual(u);
        if r > tol {
            Membership::Exterior
        } else if r >= -tol {
            Membership::Boundary
        } else {
            Membership::Interior
        }
    }
}

/// Zeroth moments below this are treated as vacuum, i.e. not realizable.
const VACUUM: f64 = 1e-300;

/// Scaling parameter moving `u_q` toward the cell mean `u_bar` until it is realizable.
///
/// Both vectors are scaled so that `max(u_bar_0, u_q_0) = 1/2` before the
/// lifted facets are intersected with the segment.
pub fn limiter_theta(u_bar: &[f64], u_q: &[f64], poly: &RealizablePolytope, eps: f64) -> f64 {
    let s = 0.5 / u_bar[0].max(u_q[0]);
    let mut best = f64::NEG_INFINITY;
    for (c, rhs) in poly.lifted_facets() {
        let mut cq = 0.0;
        let mut cb = 0.0;
        for k in 0..c.len() {
            cq += c[k] * u_q[k];
            cb += c[k] * u_bar[k];
        }
        let (cq, cb) = (s * cq, s * cb);
        let denom = cb - cq;
        if denom == 0.0 {
            continue;
        }
        let theta = (rhs - cq) / denom;
        if theta >= -eps && theta <= 1.0 && theta > best {
            best = theta;
        }
    }
    if best == f64::NEG_INFINITY {
        0.0
    } else {
        (eps + best).min(1.0)
    }
}

/// Scaled Legendre polynomial `P_i(2y)` on the reference cell `[-1/2, 1/2]`.
pub(crate) fn cell_basis(i: usize, y: f64) -> f64 {
    crate::quadrature::legendre_with_derivative(i, 2.0 * y).0
}

/// Realizability limiter for one cell.
///
/// Returns the limited coefficients and the cell's `theta`, the maximum over
/// the spatial quadrature nodes. Row 0 is never modified.
pub fn limit_cell(
    coeffs: &DMatrix<f64>,
    poly: &RealizablePolytope,
    spatial_rule: &QuadratureRule,
    eps: f64,
) -> Result<(DMatrix<f64>, f64)> {
    let n = coeffs.ncols();
    let mean: Vec<f64> = coeffs.row(0).iter().copied().collect();
    if poly.classify(&mean, 0.0) == Membership::Exterior {
        return Err(Error::NonRealizableMean);
    }
    let mut theta: f64 = 0.0;
    let mut uq = vec![0.0; n];
    for &y in spatial_rule.nodes() {
        uq.fill(0.0);
        for i in 0..coeffs.nrows() {
            let p = cell_basis(i, y);
            for l in 0..n {
                uq[l] += p * coeffs[(i, l)];
            }
        }
        theta = theta.max(limiter_theta(&mean, &uq, poly, eps));
    }
    let mut out = coeffs.clone();
    if theta > 0.0 {
        for i in 1..out.nrows() {
            for l in 0..n {
                out[(i, l)] *= 1.0 - theta;
            }
        }
    }
    Ok((out, theta))
}

/// Number of facets of the cyclic polytope with `n` vertices in dimension `big_n`.
pub fn facet_count_formula(big_n: usize, n: usize) -> Result<u128> {
    if !(n > big_n && big_n > 1) {
        return Err(Error::InvalidArgument(format!(
            "facet count needs n > N > 1, got N = {big_n}, n = {n}"
        )));
    }
    let m = n - big_n;
    Ok(binomial(n - big_n.div_ceil(2), m) + binomial(n - (big_n + 2) / 2, m))
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}
