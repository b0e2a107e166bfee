//! Gauss-Lobatto rules and the composite half-interval angular rule.

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// `sum_i w_i f(x_i)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        integrate(self, f)
    }

    fn mapped(reference: &[(f64, f64)], a: f64, b: f64) -> Self {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let (nodes, weights) = reference
            .iter()
            .map(|&(x, w)| (mid + half * x, half * w))
            .unzip();
        QuadratureRule { nodes, weights }
    }
}

pub fn integrate(rule: &QuadratureRule, f: impl Fn(f64) -> f64) -> f64 {
    rule.iter().map(|(x, w)| w * f(x)).sum()
}

/// Legendre polynomial `P_n(x)` and its derivative.
pub(crate) fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = if (1.0 - x * x).abs() < 1e-300 {
        // P_n'(±1) = (±1)^{n+1} n(n+1)/2
        let s = if x > 0.0 || n % 2 == 1 { 1.0 } else { -1.0 };
        s * nf * (nf + 1.0) / 2.0
    } else {
        nf * (p0 - x * p1) / (1.0 - x * x)
    };
    (p1, dp)
}

/// The `n`-point Gauss-Lobatto rule on `[a, b]`.
pub fn gauss_lobatto(n: usize, a: f64, b: f64) -> Result<QuadratureRule> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "Gauss-Lobatto needs at least 2 points, got {n}"
        )));
    }
    if !(a < b) {
        return Err(Error::InvalidArgument(format!("empty interval [{a}, {b}]")));
    }
    let deg = n - 1;
    let df = deg as f64;
    let mut reference = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = -(std::f64::consts::PI * i as f64 / df).cos();
        if i != 0 && i != deg {
            for _ in 0..100 {
                let (p, dp) = legendre_with_derivative(deg, x);
                let dx = (1.0 - x * x) * dp / (df * (df + 1.0) * p);
                x += dx;
                if dx.abs() < 1e-14 {
                    break;
                }
            }
        }
        let (p, _) = legendre_with_derivative(deg, x);
        reference.push((x, 2.0 / (df * (df + 1.0) * p * p)));
    }
    // Exact symmetry about the midpoint.
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (reference[j].0 - reference[i].0);
        let w = 0.5 * (reference[i].1 + reference[j].1);
        reference[i] = (-x, w);
        reference[j] = (x, w);
    }
    if n % 2 == 1 {
        reference[n / 2].0 = 0.0;
    }
    let mut rule = QuadratureRule::mapped(&reference, a, b);
    rule.nodes[0] = a;
    rule.nodes[n - 1] = b;
    Ok(rule)
}

/// The `n`-point Gauss-Legendre rule on `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<QuadratureRule> {
    if n < 1 {
        return Err(Error::InvalidArgument("Gauss-Legendre needs n >= 1".into()));
    }
    if !(a < b) {
        return Err(Error::InvalidArgument(format!("empty interval [{a}, {b}]")));
    }
    let nf = n as f64;
    let mut reference = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        reference.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    Ok(QuadratureRule::mapped(&reference, a, b))
}

/// Composite angular rule: Gauss-Lobatto on `[-1, 0]` followed by
/// Gauss-Lobatto on `[0, 1]`. The node `mu = 0` appears once per half.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularQuadrature {
    rule: QuadratureRule,
    half_count: usize,
}

impl AngularQuadrature {
    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn half_count(&self) -> usize {
        self.half_count
    }

    pub fn nodes(&self) -> &[f64] {
        self.rule.nodes()
    }

    pub fn weights(&self) -> &[f64] {
        self.rule.weights()
    }

    pub fn len(&self) -> usize {
        self.rule.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rule.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        integrate(&self.rule, f)
    }

    /// Nodes with the duplicated `mu = 0` entry merged, in increasing order.
    pub fn distinct_nodes(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::with_capacity(self.len());
        for &x in self.nodes() {
            if out.last().is_none_or(|&y| (x - y).abs() > 1e-14) {
                out.push(x);
            }
        }
        out
    }

    /// The node closest to `target`.
    pub fn nearest_node(&self, target: f64) -> f64 {
        self.nodes()
            .iter()
            .copied()
            .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
            .unwrap_or(target)
    }
}

pub fn angular_quadrature(n_q: usize) -> Result<AngularQuadrature> {
    if n_q < 4 || !n_q.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "angular quadrature size must be even and >= 4, got {n_q}"
        )));
    }
    let half = n_q / 2;
    let left = gauss_lobatto(half, -1.0, 0.0)?;
    let right = gauss_lobatto(half, 0.0, 1.0)?;
    let mut nodes = left.nodes;
    let mut weights = left.weights;
    nodes.extend(right.nodes);
    weights.extend(right.weights);
    // Endpoints of the mapped halves are exact.
    nodes[half - 1] = 0.0;
    nodes[half] = 0.0;
    Ok(AngularQuadrature {
        rule: QuadratureRule { nodes, weights },
        half_count: half,
    })
}

/// Spatial Gauss-Lobatto rule on the reference cell `[-1/2, 1/2]`, weights summing to one.
pub fn reference_cell_rule(q: usize) -> Result<QuadratureRule> {
    gauss_lobatto(q, -0.5, 0.5)
}
