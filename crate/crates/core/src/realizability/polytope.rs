//! Half-space representations of the numerically realizable slice `u_0 = 1`.

use nalgebra::{DMatrix, DVector};

use super::Facet;
use crate::{Error, Result};

/// Facets of the cyclic polytope spanned by `(x, x^2, ..., x^d)` over the
/// strictly increasing `nodes`, enumerated with Gale's evenness condition.
pub fn cyclic_polytope_facets(nodes: &[f64], d: usize) -> Result<Vec<Facet>> {
    if d == 0 {
        return Err(Error::InvalidArgument("cyclic polytope needs d >= 1".into()));
    }
    if nodes.len() <= d {
        return Err(Error::Construction(format!(
            "{} distinct vertices cannot span dimension {d}",
            nodes.len()
        )));
    }
    if nodes.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Construction("nodes must be strictly increasing".into()));
    }
    let mut subsets = Vec::new();
    gale_subsets(nodes.len(), d, 0, &mut Vec::new(), &mut subsets);
    subsets
        .iter()
        .map(|s| moment_curve_facet(nodes, s))
        .collect()
}

/// All `d`-subsets of `0..n` satisfying Gale's evenness condition: every
/// maximal run of chosen indices not touching either end has even length.
pub fn gale_subsets(n: usize, d: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    let remaining = d - cur.len();
    if remaining == 0 {
        out.push(cur.clone());
        return;
    }
    for s in start..n {
        for len in 1..=remaining {
            let end = s + len;
            if end > n {
                break;
            }
            let at_end = end == n;
            if s != 0 && !at_end && len % 2 == 1 {
                continue;
            }
            if at_end && len != remaining {
                continue;
            }
            cur.extend(s..end);
            gale_subsets(n, d, end + 1, cur, out);
            cur.truncate(cur.len() - len);
        }
    }
}

/// The hyperplane through the moment-curve points indexed by `subset`.
///
/// With `p(x) = prod_{i in S} (x - x_i) = sum_k c_k x^k`, every node satisfies
/// `sign * p(x) <= 0` for the right sign, which is the facet inequality
/// `sign * (c_1, ..., c_d) . m <= -sign * c_0`.
fn moment_curve_facet(nodes: &[f64], subset: &[usize]) -> Result<Facet> {
    let d = subset.len();
    let mut c = vec![0.0; d + 1];
    c[0] = 1.0;
    for (deg, &i) in subset.iter().enumerate() {
        let r = nodes[i];
        for k in (1..=deg + 1).rev() {
            c[k] = c[k - 1] - r * c[k];
        }
        c[0] *= -r;
    }
    let eval = |x: f64| c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck);
    let probe = (0..nodes.len())
        .find(|i| !subset.contains(i))
        .ok_or_else(|| Error::Construction("facet uses every vertex".into()))?;
    let sign = if eval(nodes[probe]) > 0.0 { -1.0 } else { 1.0 };
    let a = DVector::from_iterator(d, c[1..].iter().map(|&ck| sign * ck));
    Facet::new(a, -sign * c[0])
}

/// Joins the half-interval polytopes into the mixed-moment slice.
///
/// `pos` lives on `(mu+, mu+^2, ...)` and `neg` on `(mu-, mu-^2, ...)`; both
/// must contain the origin. The result is laid out as
/// `(mu+, mu-, mu+^2, mu-^2, ...)` and keeps redundant coupled rows.
pub fn compose_mixed_halfspaces(pos: &[Facet], neg: &[Facet]) -> Result<Vec<Facet>> {
    let d = pos
        .first()
        .map(|f| f.normal.len())
        .ok_or_else(|| Error::Construction("empty half polytope".into()))?;
    if neg.iter().chain(pos).any(|f| f.normal.len() != d) {
        return Err(Error::Construction("half polytopes differ in dimension".into()));
    }
    if neg.iter().chain(pos).any(|f| f.offset < -ZERO_OFFSET) {
        return Err(Error::Construction(
            "half polytope does not contain the origin (negative offset)".into(),
        ));
    }
    let lift = |a: &DVector<f64>, parity: usize, scale: f64, out: &mut DVector<f64>| {
        for k in 0..d {
            out[2 * k + parity] += scale * a[k];
        }
    };
    let mut out = Vec::with_capacity(pos.len() + neg.len() + pos.len() * neg.len());
    for (half, parity) in [(pos, 0), (neg, 1)] {
        for f in half {
            let mut a = DVector::zeros(2 * d);
            lift(&f.normal, parity, 1.0, &mut a);
            out.push(Facet::new(a, f.offset.max(0.0))?);
        }
    }
    for p in pos.iter().filter(|f| f.offset > ZERO_OFFSET) {
        for q in neg.iter().filter(|f| f.offset > ZERO_OFFSET) {
            let mut a = DVector::zeros(2 * d);
            lift(&p.normal, 0, 1.0 / p.offset, &mut a);
            lift(&q.normal, 1, 1.0 / q.offset, &mut a);
            out.push(Facet::new(a, 1.0)?);
        }
    }
    Ok(out)
}

/// Offsets below this are treated as facets through the origin.
const ZERO_OFFSET: f64 = 1e-12;

/// Monomial coefficients of the Legendre polynomials, row `i` = `P_i`.
pub(crate) fn legendre_to_monomial(order: usize) -> DMatrix<f64> {
    let n = order + 1;
    let mut t = DMatrix::zeros(n, n);
    t[(0, 0)] = 1.0;
    if n > 1 {
        t[(1, 1)] = 1.0;
    }
    for k in 2..n {
        let kf = k as f64;
        for j in 0..=k {
            let shifted = if j > 0 { t[(k - 1, j - 1)] } else { 0.0 };
            t[(k, j)] = ((2.0 * kf - 1.0) * shifted - (kf - 1.0) * t[(k - 2, j)]) / kf;
        }
    }
    t
}

/// Maps monomial slice facets to Legendre slice facets through `P = T m`.
pub(crate) fn legendre_facets(monomial: &[Facet], order: usize) -> Result<Vec<Facet>> {
    let t = legendre_to_monomial(order);
    let d = order;
    let t11 = t.view((1, 1), (d, d)).into_owned();
    let t10 = t.view((1, 0), (d, 1)).into_owned();
    let inv_t = t11
        .transpose()
        .try_inverse()
        .ok_or_else(|| Error::Construction("singular Legendre transform".into()))?;
    monomial
        .iter()
        .map(|f| {
            let a = &inv_t * &f.normal;
            let b = f.offset + a.dot(&t10.column(0));
            Facet::new(a, b)
        })
        .collect()
}
