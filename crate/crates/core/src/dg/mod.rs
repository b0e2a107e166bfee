//! Discontinuous Galerkin discretisation in space with SSP(3,3) in time.
//!
//! Each cell carries a `(k+1) x n_mom` coefficient matrix for the scaled
//! Legendre basis `phi_i(y) = P_i(2y)` on the reference cell `[-1/2, 1/2]`,
//! so row 0 is the cell mean.

mod scheme;
mod ssp;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use scheme::{Diagnostics, Discretization, LimiterEvent, MassRate, RegularizationEvent};
pub use ssp::{ssp33_step, StageOperator, StageVector, SSP33_NODES, SSP33_WEIGHTS};

use crate::basis::MomentVector;
use crate::quadrature::{gauss_legendre, legendre_with_derivative, QuadratureRule};
use crate::{Error, Result};

pub type DgCellCoeffs = DMatrix<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    x_left: f64,
    x_right: f64,
    cells: usize,
}

impl Mesh {
    pub fn new(x_left: f64, x_right: f64, cells: usize) -> Result<Self> {
        if !(x_left < x_right) || cells == 0 {
            return Err(Error::InvalidArgument(format!(
                "mesh needs x_L < x_R and J > 0, got [{x_left}, {x_right}], J = {cells}"
            )));
        }
        Ok(Mesh {
            x_left,
            x_right,
            cells,
        })
    }

    pub fn x_left(&self) -> f64 {
        self.x_left
    }

    pub fn x_right(&self) -> f64 {
        self.x_right
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn dx(&self) -> f64 {
        (self.x_right - self.x_left) / self.cells as f64
    }

    pub fn center(&self, j: usize) -> f64 {
        self.x_left + (j as f64 + 0.5) * self.dx()
    }

    /// Physical position of reference coordinate `y` in cell `j`.
    pub fn position(&self, j: usize, y: f64) -> f64 {
        self.center(j) + y * self.dx()
    }

    pub fn length(&self) -> f64 {
        self.x_right - self.x_left
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Periodic,
    Dirichlet,
}

impl FromStr for BoundaryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "periodic" => Ok(BoundaryKind::Periodic),
            "dirichlet" => Ok(BoundaryKind::Dirichlet),
            _ => Err(Error::InvalidArgument(format!("unknown boundary kind `{s}`"))),
        }
    }
}

impl fmt::Display for BoundaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryKind::Periodic => "periodic",
            BoundaryKind::Dirichlet => "dirichlet",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Boundary and source data of a problem, as moment vectors.
pub trait Forcing {
    /// `<b psi_L>` or `<b psi_R>` at time `t`; required for Dirichlet boundaries.
    fn inflow(&self, side: Side, t: f64) -> Option<MomentVector>;

    /// `<b S(t, x, .)>`, or `None` without a source.
    fn source(&self, _t: f64, _x: f64) -> Option<MomentVector> {
        None
    }
}

/// Forcing with no source and no inflow, for periodic problems.
pub struct NoForcing;

impl Forcing for NoForcing {
    fn inflow(&self, _side: Side, _t: f64) -> Option<MomentVector> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemidiscreteConfig {
    pub k: usize,
    pub q: usize,
    pub sigma_a: f64,
    pub sigma_s: f64,
    pub lf_constant: f64,
    pub tvb_m: f64,
    pub kappa_jac: f64,
    pub epsilon_limiter: f64,
    pub boundary: BoundaryKind,
    /// Apply the slope limiter in characteristic variables.
    pub characteristic: bool,
    /// Disable the slope limiter entirely.
    pub slope_limiter: bool,
}

impl Default for SemidiscreteConfig {
    fn default() -> Self {
        SemidiscreteConfig {
            k: 2,
            q: 4,
            sigma_a: 0.0,
            sigma_s: 0.0,
            lf_constant: 1.0,
            tvb_m: 50.0,
            kappa_jac: 1e5,
            epsilon_limiter: 1e-14,
            boundary: BoundaryKind::Periodic,
            characteristic: true,
            slope_limiter: true,
        }
    }
}

impl SemidiscreteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.q < 2 || 2 * self.q < 3 + self.k {
            return Err(Error::InvalidArgument(format!(
                "spatial rule with Q = {} cannot support degree k = {} (need 2Q - 3 >= k)",
                self.q, self.k
            )));
        }
        if !(self.lf_constant >= 1.0) {
            return Err(Error::InvalidArgument("Lax-Friedrichs constant must be >= 1".into()));
        }
        if !(self.sigma_a >= 0.0 && self.sigma_s >= 0.0) {
            return Err(Error::InvalidArgument("interaction coefficients must be >= 0".into()));
        }
        if !(self.tvb_m >= 0.0 && self.kappa_jac > 0.0 && self.epsilon_limiter >= 0.0) {
            return Err(Error::InvalidArgument("limiter parameters must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn sigma_t(&self) -> f64 {
        self.sigma_a + self.sigma_s
    }
}

/// Cell coefficients for the whole mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct DgState {
    cells: Vec<DgCellCoeffs>,
}

impl DgState {
    pub fn zeros(cells: usize, k: usize, n_mom: usize) -> Self {
        DgState {
            cells: vec![DMatrix::zeros(k + 1, n_mom); cells],
        }
    }

    pub fn from_cells(cells: Vec<DgCellCoeffs>) -> Self {
        DgState { cells }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.cells.first().map_or(0, |c| c.nrows() - 1)
    }

    pub fn n_mom(&self) -> usize {
        self.cells.first().map_or(0, |c| c.ncols())
    }

    pub fn cell(&self, j: usize) -> &DgCellCoeffs {
        &self.cells[j]
    }

    pub fn cell_mut(&mut self, j: usize) -> &mut DgCellCoeffs {
        &mut self.cells[j]
    }

    pub fn cells(&self) -> &[DgCellCoeffs] {
        &self.cells
    }

    pub fn mean(&self, j: usize) -> MomentVector {
        self.cells[j].row(0).transpose()
    }

    /// `u_h` at reference coordinate `y` of cell `j`.
    pub fn eval(&self, j: usize, y: f64) -> MomentVector {
        let c = &self.cells[j];
        let mut u = DVector::zeros(c.ncols());
        for i in 0..c.nrows() {
            u += c.row(i).transpose() * scaled_legendre(i, y);
        }
        u
    }

    /// `sum_j dx u_bar_{j,0}`.
    pub fn total_mass(&self, dx: f64) -> f64 {
        self.cells.iter().map(|c| c[(0, 0)]).sum::<f64>() * dx
    }
}

impl StageVector for DgState {
    fn axpy(&mut self, a: f64, x: &Self) {
        for (s, x) in self.cells.iter_mut().zip(&x.cells) {
            *s += x * a;
        }
    }

    fn scale(&mut self, a: f64) {
        for s in &mut self.cells {
            *s *= a;
        }
    }
}

/// `phi_i(y) = P_i(2y)`.
pub fn scaled_legendre(i: usize, y: f64) -> f64 {
    legendre_with_derivative(i, 2.0 * y).0
}

/// `phi_i'(y) = 2 P_i'(2y)`.
pub fn scaled_legendre_derivative(i: usize, y: f64) -> f64 {
    2.0 * legendre_with_derivative(i, 2.0 * y).1
}

/// Global Lax-Friedrichs flux `(f(v) + f(w) - C (w - v)) / 2`.
pub fn lax_friedrichs(
    f_left: &MomentVector,
    f_right: &MomentVector,
    v: &MomentVector,
    w: &MomentVector,
    c: f64,
) -> MomentVector {
    (f_left + f_right - (w - v) * c) * 0.5
}

/// Time step meeting the realizability CFL condition with equality:
/// `dt / dx = w_Q (1 - sigma_t dt)`.
pub fn cfl_dt(dx: f64, sigma_t: f64, w_q: f64) -> f64 {
    w_q * dx / (1.0 + w_q * dx * sigma_t)
}

pub fn minmod(a1: f64, a2: f64, a3: f64) -> f64 {
    let s = a1.signum();
    if a1 != 0.0 && s == a2.signum() && s == a3.signum() && a2 != 0.0 && a3 != 0.0 {
        s * a1.abs().min(a2.abs()).min(a3.abs())
    } else {
        0.0
    }
}

/// `L^2` projection onto degree-`k` polynomials per cell using a 16-point
/// Gauss-Legendre rule.
pub fn project_initial(f: impl Fn(f64) -> MomentVector, mesh: &Mesh, k: usize) -> Result<DgState> {
    project_with_rule(f, mesh, k, &gauss_legendre(16, -0.5, 0.5)?)
}

/// `L^2` projection with the integrals replaced by `rule` on the reference cell.
pub fn project_with_rule(
    f: impl Fn(f64) -> MomentVector,
    mesh: &Mesh,
    k: usize,
    rule: &QuadratureRule,
) -> Result<DgState> {
    let mut cells = Vec::with_capacity(mesh.cells());
    for j in 0..mesh.cells() {
        let mut c: Option<DMatrix<f64>> = None;
        for (y, w) in rule.iter() {
            let u = f(mesh.position(j, y));
            let c = c.get_or_insert_with(|| DMatrix::zeros(k + 1, u.len()));
            for i in 0..=k {
                let s = (2 * i + 1) as f64 * w * scaled_legendre(i, y);
                for l in 0..u.len() {
                    c[(i, l)] += s * u[l];
                }
            }
        }
        cells.push(c.unwrap_or_else(|| DMatrix::zeros(k + 1, 0)));
    }
    Ok(DgState { cells })
}
