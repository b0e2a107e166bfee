//! Moment bases: full monomial moments, mixed half moments and Legendre polynomials.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::quadrature::AngularQuadrature;
use crate::{Error, Result};

pub type MomentVector = DVector<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisFamily {
    Monomial,
    Mixed,
    Legendre,
}

impl FromStr for BasisFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "monomial" => Ok(BasisFamily::Monomial),
            "mixed" => Ok(BasisFamily::Mixed),
            "legendre" => Ok(BasisFamily::Legendre),
            _ => Err(Error::InvalidArgument(format!("unknown basis family `{s}`"))),
        }
    }
}

impl fmt::Display for BasisFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BasisFamily::Monomial => "monomial",
            BasisFamily::Mixed => "mixed",
            BasisFamily::Legendre => "legendre",
        })
    }
}

/// A basis family together with its order `N`.
///
/// The mixed basis is laid out as `(1, mu+, mu-, mu+^2, mu-^2, ...)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MomentBasis {
    family: BasisFamily,
    order: usize,
}

impl MomentBasis {
    pub fn new(family: BasisFamily, order: usize) -> Result<Self> {
        if order < 1 {
            return Err(Error::InvalidArgument("basis order must be >= 1".into()));
        }
        Ok(MomentBasis { family, order })
    }

    pub fn monomial(order: usize) -> Result<Self> {
        Self::new(BasisFamily::Monomial, order)
    }

    pub fn mixed(order: usize) -> Result<Self> {
        Self::new(BasisFamily::Mixed, order)
    }

    pub fn legendre(order: usize) -> Result<Self> {
        Self::new(BasisFamily::Legendre, order)
    }

    pub fn family(&self) -> BasisFamily {
        self.family
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_mom(&self) -> usize {
        match self.family {
            BasisFamily::Mixed => 2 * self.order + 1,
            _ => self.order + 1,
        }
    }

    /// `b(mu)`; fails for `|mu| > 1`.
    pub fn eval(&self, mu: f64) -> Result<MomentVector> {
        if !(mu.abs() <= 1.0) {
            return Err(Error::InvalidArgument(format!("angle {mu} outside [-1, 1]")));
        }
        let mut out = DVector::zeros(self.n_mom());
        self.eval_into(mu, out.as_mut_slice());
        Ok(out)
    }

    /// Writes `b(mu)` into `out` without range checks.
    pub fn eval_into(&self, mu: f64, out: &mut [f64]) {
        out[0] = 1.0;
        match self.family {
            BasisFamily::Monomial => {
                for i in 1..=self.order {
                    out[i] = out[i - 1] * mu;
                }
            }
            BasisFamily::Mixed => {
                let (p, m) = (mu.max(0.0), mu.min(0.0));
                let (mut pp, mut mm) = (1.0, 1.0);
                for i in 1..=self.order {
                    pp *= p;
                    mm *= m;
                    out[2 * i - 1] = pp;
                    out[2 * i] = mm;
                }
            }
            BasisFamily::Legendre => {
                if self.order >= 1 {
                    out[1] = mu;
                }
                for k in 2..=self.order {
                    let kf = k as f64;
                    out[k] = ((2.0 * kf - 1.0) * mu * out[k - 1] - (kf - 1.0) * out[k - 2]) / kf;
                }
            }
        }
    }

    /// Row-major table of `b(mu_j)` over the quadrature nodes, `len() x n_mom()`.
    pub fn table(&self, quad: &AngularQuadrature) -> Vec<f64> {
        let n = self.n_mom();
        let mut t = vec![0.0; quad.len() * n];
        for (j, &mu) in quad.nodes().iter().enumerate() {
            self.eval_into(mu, &mut t[j * n..(j + 1) * n]);
        }
        t
    }
}

impl fmt::Display for MomentBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.family, self.order)
    }
}

/// `u_i = sum_j w_j b_i(mu_j) f(mu_j)`.
pub fn moments_of_density(
    basis: &MomentBasis,
    quad: &AngularQuadrature,
    f: impl Fn(f64) -> f64,
) -> MomentVector {
    let n = basis.n_mom();
    let mut u = DVector::zeros(n);
    let mut b = vec![0.0; n];
    for (mu, w) in quad.rule().iter() {
        let fw = w * f(mu);
        basis.eval_into(mu, &mut b);
        for i in 0..n {
            u[i] += fw * b[i];
        }
    }
    u
}

/// Moments of the isotropic density `1/2`, i.e. `<b>/2`.
pub fn isotropic_moments(basis: &MomentBasis, quad: &AngularQuadrature) -> MomentVector {
    moments_of_density(basis, quad, |_| 0.5)
}
