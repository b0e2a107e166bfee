//! The dual entropy-minimisation problem and the closure quantities built on it.
//!
//! For the Maxwell-Boltzmann entropy the dual is solved on the normalised
//! moments `u / u_0`; the zeroth multiplier is shifted by `ln u_0` afterwards.
//! The gradient tolerance `tau` therefore applies to the normalised problem.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::basis::{isotropic_moments, MomentBasis, MomentVector};
use crate::linalg::{cholesky, cholesky_solve, dot, norm2};
use crate::quadrature::AngularQuadrature;
use crate::{Error, Result};

pub type Multipliers = DVector<f64>;

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Entropy {
    MaxwellBoltzmann,
    Quadratic,
}

impl FromStr for Entropy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "maxwell_boltzmann" => Ok(Entropy::MaxwellBoltzmann),
            "quadratic" => Ok(Entropy::Quadratic),
            _ => Err(Error::InvalidArgument(format!("unknown entropy `{s}`"))),
        }
    }
}

impl fmt::Display for Entropy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Entropy::MaxwellBoltzmann => "maxwell_boltzmann",
            Entropy::Quadratic => "quadratic",
        })
    }
}

impl Entropy {
    /// `eta_*'(y)`.
    pub fn ansatz(self, y: f64) -> f64 {
        match self {
            Entropy::MaxwellBoltzmann => y.exp(),
            Entropy::Quadratic => y,
        }
    }

    /// `eta_*(y)`.
    pub fn dual(self, y: f64) -> f64 {
        match self {
            Entropy::MaxwellBoltzmann => y.exp(),
            Entropy::Quadratic => 0.5 * y * y,
        }
    }

    /// `eta_*''(y)`.
    pub fn curvature(self, y: f64) -> f64 {
        match self {
            Entropy::MaxwellBoltzmann => y.exp(),
            Entropy::Quadratic => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub tau: f64,
    pub r_schedule: Vec<f64>,
    pub k_r: usize,
    pub entropy: Entropy,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tau: 1e-9,
            r_schedule: vec![0.0, 1e-8, 1e-6, 1e-4, 1e-3],
            k_r: 50,
            entropy: Entropy::MaxwellBoltzmann,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::InvalidArgument("tau must be positive".into()));
        }
        let r = &self.r_schedule;
        if r.first() != Some(&0.0) {
            return Err(Error::InvalidArgument("r_schedule must start at 0".into()));
        }
        if r.windows(2).any(|w| !(w[0] < w[1])) || r.last().is_some_and(|&x| x > 1.0) {
            return Err(Error::InvalidArgument(
                "r_schedule must be strictly increasing and end at most 1".into(),
            ));
        }
        if self.k_r == 0 {
            return Err(Error::InvalidArgument("k_r must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub multipliers: Multipliers,
    pub r_used: f64,
    pub iterations: usize,
    pub regularized_moments: MomentVector,
}

/// Outcome of a slice-level solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub r_used: f64,
    pub iterations: usize,
}

/// Scratch buffers for [`Closure::solve_with_flux`].
#[derive(Debug, Clone)]
pub struct Workspace {
    psi: Vec<f64>,
    z: Vec<f64>,
    g: Vec<f64>,
    h: Vec<f64>,
    d: Vec<f64>,
    v: Vec<f64>,
    alpha: Vec<f64>,
}

impl Workspace {
    fn new(n: usize, nq: usize) -> Self {
        Workspace {
            psi: vec![0.0; nq],
            z: vec![0.0; nq],
            g: vec![0.0; n],
            h: vec![0.0; n * n],
            d: vec![0.0; n],
            v: vec![0.0; n],
            alpha: vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone)]
struct LinearClosure {
    h_chol: Vec<f64>,
    flux_matrix: DMatrix<f64>,
}

enum Newton {
    Converged(usize),
    Failed(usize),
}

/// Basis, angular quadrature and optimiser settings bundled with precomputed tables.
#[derive(Debug, Clone)]
pub struct Closure {
    basis: MomentBasis,
    quad: AngularQuadrature,
    settings: SolverSettings,
    n: usize,
    table: Vec<f64>,
    u_iso: MomentVector,
    linear: Option<LinearClosure>,
}

impl Closure {
    pub fn new(basis: MomentBasis, quad: AngularQuadrature, settings: SolverSettings) -> Result<Self> {
        settings.validate()?;
        let n = basis.n_mom();
        let table = basis.table(&quad);
        let u_iso = isotropic_moments(&basis, &quad);
        let mut c = Closure {
            basis,
            quad,
            settings,
            n,
            table,
            u_iso,
            linear: None,
        };
        if c.settings.entropy == Entropy::Quadratic {
            let h = c.dual_hessian(&DVector::zeros(n));
            let j = c.weighted_outer(|mu, _| mu, &DVector::zeros(n));
            let mut h_chol = h.transpose().as_slice().to_vec();
            if !cholesky(&mut h_chol, n) {
                return Err(Error::Conditioning(
                    "quadrature too coarse for the linear closure: <b b^T> is singular".into(),
                ));
            }
            let hinv = h
                .cholesky()
                .ok_or_else(|| Error::Conditioning("<b b^T> not positive definite".into()))?
                .inverse();
            c.linear = Some(LinearClosure {
                h_chol,
                flux_matrix: j * hinv,
            });
        }
        Ok(c)
    }

    pub fn basis(&self) -> &MomentBasis {
        &self.basis
    }

    pub fn quadrature(&self) -> &AngularQuadrature {
        &self.quad
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }

    pub fn entropy(&self) -> Entropy {
        self.settings.entropy
    }

    pub fn n_mom(&self) -> usize {
        self.n
    }

    pub fn isotropic(&self) -> &MomentVector {
        &self.u_iso
    }

    pub fn workspace(&self) -> Workspace {
        Workspace::new(self.n, self.quad.len())
    }

    fn row(&self, j: usize) -> &[f64] {
        &self.table[j * self.n..(j + 1) * self.n]
    }

    fn check_len(&self, v: &DVector<f64>, what: &str) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::InvalidArgument(format!(
                "{what} has length {}, basis needs {}",
                v.len(),
                self.n
            )));
        }
        Ok(())
    }

    /// `psi(mu) = eta_*'(b(mu)^T alpha)`.
    pub fn ansatz(&self, alpha: &Multipliers, mu: f64) -> Result<f64> {
        self.check_len(alpha, "multipliers")?;
        Ok(self.entropy().ansatz(self.basis.eval(mu)?.dot(alpha)))
    }

    /// `<eta_*(b^T alpha)> - u^T alpha`.
    pub fn dual_objective(&self, alpha: &Multipliers, u: &MomentVector) -> Result<f64> {
        self.check_len(alpha, "multipliers")?;
        self.check_len(u, "moments")?;
        let e = self.entropy();
        let mut s = 0.0;
        for (j, &w) in self.quad.weights().iter().enumerate() {
            s += w * e.dual(dot(self.row(j), alpha.as_slice()));
        }
        let f = s - u.dot(alpha);
        if f.is_finite() {
            Ok(f)
        } else {
            Err(Error::NonfiniteObjective)
        }
    }

    /// Moments of the ansatz, `<b eta_*'(b^T alpha)>`.
    pub fn ansatz_moments(&self, alpha: &Multipliers) -> Result<MomentVector> {
        self.weighted_sum(|_, y| y, alpha)
    }

    /// `<b eta_*'(b^T alpha)> - u`.
    pub fn dual_gradient(&self, alpha: &Multipliers, u: &MomentVector) -> Result<DVector<f64>> {
        self.check_len(u, "moments")?;
        Ok(self.ansatz_moments(alpha)? - u)
    }

    /// `<b b^T eta_*''(b^T alpha)>`.
    pub fn dual_hessian(&self, alpha: &Multipliers) -> DMatrix<f64> {
        self.weighted_outer(|_, _| 1.0, alpha)
    }

    fn weighted_sum(&self, f: impl Fn(f64, f64) -> f64, alpha: &Multipliers) -> Result<DVector<f64>> {
        self.check_len(alpha, "multipliers")?;
        let e = self.entropy();
        let mut out: DVector<f64> = DVector::zeros(self.n);
        for (j, (mu, w)) in self.quad.rule().iter().enumerate() {
            let b = self.row(j);
            let c = w * f(mu, e.ansatz(dot(b, alpha.as_slice())));
            for i in 0..self.n {
                out[i] += c * b[i];
            }
        }
        if out.iter().all(|x| x.is_finite()) {
            Ok(out)
        } else {
            Err(Error::NonfiniteObjective)
        }
    }

    fn weighted_outer(&self, f: impl Fn(f64, f64) -> f64, alpha: &Multipliers) -> DMatrix<f64> {
        let e = self.entropy();
        let n = self.n;
        let mut out = DMatrix::zeros(n, n);
        for (j, (mu, w)) in self.quad.rule().iter().enumerate() {
            let b = self.row(j);
            let y = dot(b, alpha.as_slice());
            let c = w * f(mu, y) * e.curvature(y);
            for r in 0..n {
                for s in 0..=r {
                    out[(r, s)] += c * b[r] * b[s];
                }
            }
        }
        for r in 0..n {
            for s in 0..r {
                out[(s, r)] = out[(r, s)];
            }
        }
        out
    }

    /// `v(u, r) = (1 - r) u + r u_0 u_iso`.
    pub fn regularize(&self, u: &MomentVector, r: f64) -> MomentVector {
        let mut v = u * (1.0 - r) + &self.u_iso * (r * u[0]);
        v[0] = u[0];
        v
    }

    /// `u_0 u_iso - u`.
    pub fn collision_moments(&self, u: &MomentVector) -> MomentVector {
        let mut r = &self.u_iso * u[0] - u;
        r[0] = 0.0;
        r
    }

    /// Multipliers of the isotropic density with zeroth moment `u0`.
    pub fn isotropic_multipliers(&self, u0: f64) -> Multipliers {
        let mut a = DVector::zeros(self.n);
        match self.entropy() {
            Entropy::MaxwellBoltzmann => a[0] = (0.5 * u0).ln(),
            Entropy::Quadratic => a[0] = 0.5 * u0,
        }
        a
    }

    /// Solves the dual problem for `u`, warm-started from `alpha_init`
    /// (isotropic multipliers when `None`).
    pub fn solve(&self, u: &MomentVector, alpha_init: Option<&Multipliers>) -> Result<SolveReport> {
        self.check_len(u, "moments")?;
        let mut alpha = match alpha_init {
            Some(a) => {
                self.check_len(a, "initial multipliers")?;
                a.as_slice().to_vec()
            }
            None => vec![f64::NAN; self.n],
        };
        let mut ws = self.workspace();
        let mut flux = vec![0.0; self.n];
        let stats = self.solve_with_flux(u.as_slice(), &mut alpha, &mut ws, &mut flux)?;
        Ok(SolveReport {
            multipliers: DVector::from_vec(alpha),
            r_used: stats.r_used,
            iterations: stats.iterations,
            regularized_moments: self.regularize(u, stats.r_used),
        })
    }

    /// Slice-level solve used by the spatial discretisation.
    ///
    /// `alpha` holds the warm start on entry (a NaN first entry selects the
    /// isotropic start) and the multipliers on exit. `flux` receives `f(u)`.
    pub fn solve_with_flux(
        &self,
        u: &[f64],
        alpha: &mut [f64],
        ws: &mut Workspace,
        flux: &mut [f64],
    ) -> Result<SolveStats> {
        let n = self.n;
        if let Some(lin) = &self.linear {
            alpha.copy_from_slice(u);
            cholesky_solve(&lin.h_chol, n, alpha);
            for i in 0..n {
                flux[i] = (0..n).map(|k| lin.flux_matrix[(i, k)] * u[k]).sum();
            }
            return Ok(SolveStats {
                r_used: 0.0,
                iterations: 0,
            });
        }
        let u0 = u[0];
        if !(u0 > 0.0) || !u0.is_finite() || u.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "dual problem needs finite moments with u_0 > 0, got u_0 = {u0}"
            )));
        }
        let shift = u0.ln();
        let warm = if alpha[0].is_finite() && alpha.iter().all(|a| a.is_finite()) {
            let mut a = alpha.to_vec();
            a[0] -= shift;
            Some(a)
        } else {
            None
        };
        let iso = 0.5f64.ln();
        let mut total = 0;
        for (m, &r) in self.settings.r_schedule.iter().enumerate() {
            for i in 0..n {
                ws.v[i] = (1.0 - r) * u[i] / u0 + r * self.u_iso[i];
            }
            ws.v[0] = 1.0;
            match (m, &warm) {
                (0, Some(a)) => ws.alpha.copy_from_slice(a),
                _ => {
                    ws.alpha.fill(0.0);
                    ws.alpha[0] = iso;
                }
            }
            match self.newton(ws) {
                Newton::Converged(it) => {
                    total += it;
                    alpha.copy_from_slice(&ws.alpha);
                    alpha[0] += shift;
                    flux.fill(0.0);
                    for (j, (mu, w)) in self.quad.rule().iter().enumerate() {
                        let c = u0 * w * mu * ws.psi[j];
                        let b = self.row(j);
                        for i in 0..n {
                            flux[i] += c * b[i];
                        }
                    }
                    return Ok(SolveStats {
                        r_used: r,
                        iterations: total,
                    });
                }
                Newton::Failed(it) => total += it,
            }
        }
        let mut last = ws.alpha.clone();
        last[0] += shift;
        Err(Error::OptimizerFailure {
            last_iterate: last,
            r_last: *self.settings.r_schedule.last().unwrap_or(&0.0),
        })
    }

    /// Evaluates `psi` at the nodes and the gradient at `ws.alpha`; false on overflow.
    fn eval_psi_gradient(&self, ws: &mut Workspace) -> bool {
        let n = self.n;
        ws.g.iter_mut().zip(&ws.v).for_each(|(g, v)| *g = -v);
        for (j, &w) in self.quad.weights().iter().enumerate() {
            let b = self.row(j);
            let p = dot(b, &ws.alpha).exp();
            ws.psi[j] = p;
            let c = w * p;
            for i in 0..n {
                ws.g[i] += c * b[i];
            }
        }
        ws.g.iter().all(|x| x.is_finite())
    }

    fn newton(&self, ws: &mut Workspace) -> Newton {
        let n = self.n;
        let weights = self.quad.weights();
        let tau = self.settings.tau;
        for it in 0..=self.settings.k_r {
            if !self.eval_psi_gradient(ws) {
                return Newton::Failed(it);
            }
            if norm2(&ws.g) < tau {
                return Newton::Converged(it);
            }
            if it == self.settings.k_r {
                return Newton::Failed(it);
            }
            ws.h.fill(0.0);
            for (j, &w) in weights.iter().enumerate() {
                let b = self.row(j);
                let c = w * ws.psi[j];
                for r in 0..n {
                    let cb = c * b[r];
                    for s in 0..=r {
                        ws.h[r * n + s] += cb * b[s];
                    }
                }
            }
            if !cholesky(&mut ws.h, n) {
                return Newton::Failed(it);
            }
            for i in 0..n {
                ws.d[i] = -ws.g[i];
            }
            cholesky_solve(&ws.h, n, &mut ws.d);
            let slope = dot(&ws.g, &ws.d);
            if !(slope < 0.0) {
                return Newton::Failed(it);
            }
            let vd = dot(&ws.v, &ws.d);
            let vd_abs: f64 = ws.v.iter().zip(&ws.d).map(|(v, d)| (v * d).abs()).sum();
            for j in 0..weights.len() {
                ws.z[j] = dot(self.row(j), &ws.d);
            }
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..=MAX_HALVINGS {
                // Objective change, formed with expm1 to avoid cancellation.
                let mut s = 0.0;
                let mut scale = 0.0;
                for j in 0..weights.len() {
                    let e = weights[j] * ws.psi[j] * (t * ws.z[j]).exp_m1();
                    s += e;
                    scale += e.abs();
                }
                let df = s - t * vd;
                if df.is_finite() {
                    let noise = 8.0 * f64::EPSILON * (scale + t * vd_abs);
                    if df <= ARMIJO_C * t * slope || (t == 1.0 && df <= noise) {
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !accepted {
                return Newton::Failed(it);
            }
            for i in 0..n {
                ws.alpha[i] += t * ws.d[i];
            }
        }
        Newton::Failed(self.settings.k_r)
    }

    /// `f = <mu b eta_*'(b^T alpha)>` for the solved multipliers.
    pub fn closure_flux(&self, report: &SolveReport) -> Result<MomentVector> {
        self.weighted_sum(|mu, y| mu * y, &report.multipliers)
    }

    /// Solves from the isotropic start and returns `f(u)`.
    pub fn flux(&self, u: &MomentVector) -> Result<MomentVector> {
        let report = self.solve(u, None)?;
        self.closure_flux(&report)
    }

    fn hessian_and_jacobian(&self, alpha: &Multipliers) -> (DMatrix<f64>, DMatrix<f64>) {
        (
            self.weighted_outer(|_, _| 1.0, alpha),
            self.weighted_outer(|mu, _| mu, alpha),
        )
    }

    /// `df/du = J H^{-1}` with `J = <mu b b^T eta_*''>`.
    pub fn flux_jacobian(&self, report: &SolveReport) -> Result<DMatrix<f64>> {
        self.check_len(&report.multipliers, "multipliers")?;
        if let Some(lin) = &self.linear {
            return Ok(lin.flux_matrix.clone());
        }
        let (h, j) = self.hessian_and_jacobian(&report.multipliers);
        let chol = h
            .cholesky()
            .ok_or_else(|| Error::Conditioning("Hessian is not positive definite".into()))?;
        // (H^{-1} J)^T = J H^{-1} since both are symmetric.
        Ok(chol.solve(&j).transpose())
    }

    /// Real eigenvalues and unit-length right eigenvectors (columns) of the flux Jacobian.
    ///
    /// Uses `H = L L^T`: the Jacobian is similar to the symmetric matrix
    /// `L^{-1} J L^{-T}`, whose orthonormal eigenvectors `Y` give `V = L Y`.
    pub fn characteristic_decomposition(
        &self,
        report: &SolveReport,
    ) -> Result<(DVector<f64>, DMatrix<f64>)> {
        self.check_len(&report.multipliers, "multipliers")?;
        let (h, j) = self.hessian_and_jacobian(&report.multipliers);
        let l = h
            .cholesky()
            .ok_or_else(|| Error::Conditioning("Hessian is not positive definite".into()))?
            .unpack();
        let lj = l
            .solve_lower_triangular(&j)
            .ok_or_else(|| Error::Conditioning("singular Cholesky factor".into()))?;
        let s = l
            .solve_lower_triangular(&lj.transpose())
            .ok_or_else(|| Error::Conditioning("singular Cholesky factor".into()))?;
        let s = (&s + s.transpose()) * 0.5;
        let eig = SymmetricEigen::try_new(s, f64::EPSILON, 1000)
            .ok_or_else(|| Error::Conditioning("symmetric eigensolver did not converge".into()))?;
        let mut v = l * eig.eigenvectors;
        for mut c in v.column_iter_mut() {
            let nrm = c.norm();
            c /= nrm;
        }
        Ok((eig.eigenvalues, v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::moments_of_density;
    use crate::quadrature::angular_quadrature;
    use approx::assert_relative_eq;

    fn closure(basis: MomentBasis) -> Closure {
        Closure::new(basis, angular_quadrature(40).unwrap(), SolverSettings::default()).unwrap()
    }

    #[test]
    fn objective_examples() {
        let c = closure(MomentBasis::monomial(1).unwrap());
        let f = c
            .dual_objective(&DVector::zeros(2), &DVector::from_vec(vec![2.0, 0.0]))
            .unwrap();
        assert_relative_eq!(f, 2.0, epsilon = 1e-13);
        let a = DVector::from_vec(vec![0.5f64.ln(), 0.0]);
        let f = c.dual_objective(&a, &DVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert_relative_eq!(f, 1.0 - 0.5f64.ln(), epsilon = 1e-13);
        let g = c
            .dual_gradient(&DVector::zeros(2), &DVector::from_vec(vec![1.0, 0.0]))
            .unwrap();
        assert_relative_eq!(g[0], 1.0, epsilon = 1e-13);
        assert!(g[1].abs() < 1e-14);
        let big = DVector::from_vec(vec![800.0, 0.0]);
        assert!(matches!(
            c.dual_objective(&big, &DVector::from_vec(vec![1.0, 0.0])),
            Err(Error::NonfiniteObjective)
        ));
    }

    #[test]
    fn hessian_at_zero() {
        let c = closure(MomentBasis::monomial(1).unwrap());
        let h = c.dual_hessian(&DVector::zeros(2));
        assert_relative_eq!(h[(0, 0)], 2.0, epsilon = 1e-13);
        assert_relative_eq!(h[(1, 1)], 2.0 / 3.0, epsilon = 1e-13);
        assert!(h[(0, 1)].abs() < 1e-14);
    }

    #[test]
    fn quadratic_entropy_is_linear() {
        let settings = SolverSettings {
            entropy: Entropy::Quadratic,
            ..SolverSettings::default()
        };
        let q = angular_quadrature(40).unwrap();
        let c = Closure::new(MomentBasis::legendre(5).unwrap(), q, settings).unwrap();
        let u = DVector::from_vec(vec![1.0, 0.3, -0.1, 0.05, 0.0, 0.01]);
        assert_eq!(c.dual_objective(&DVector::zeros(6), &u).unwrap(), 0.0);
        let rep = c.solve(&u, None).unwrap();
        let back = c.ansatz_moments(&rep.multipliers).unwrap();
        assert!((back - &u).norm() < 1e-13);
        let j1 = c.flux_jacobian(&rep).unwrap();
        let rep2 = c.solve(&(u * 3.0), None).unwrap();
        assert_eq!(j1, c.flux_jacobian(&rep2).unwrap());
        let h = c.dual_hessian(&rep.multipliers);
        assert_eq!(h, c.dual_hessian(&DVector::zeros(6)));
    }

    #[test]
    fn regularize_examples() {
        let c = closure(MomentBasis::monomial(1).unwrap());
        let u = DVector::from_vec(vec![1.0, 0.9]);
        assert_eq!(c.regularize(&u, 0.0), u);
        let v = c.regularize(&u, 1.0);
        assert_eq!(v[0], 1.0);
        assert!(v[1].abs() < 1e-15);
        let u = DVector::from_vec(vec![1.0, 0.98]);
        assert_relative_eq!(c.regularize(&u, 1e-4)[1], 0.98 * (1.0 - 1e-4), epsilon = 1e-15);
    }

    #[test]
    fn collision_examples() {
        let c = closure(MomentBasis::monomial(1).unwrap());
        let r = c.collision_moments(&DVector::from_vec(vec![1.0, 0.3]));
        assert_eq!(r[0], 0.0);
        assert_relative_eq!(r[1], -0.3, epsilon = 1e-15);
        let c2 = closure(MomentBasis::monomial(2).unwrap());
        let r = c2.collision_moments(&DVector::from_vec(vec![2.0, 0.0, 1.0]));
        assert_relative_eq!(r[2], 2.0 / 3.0 - 1.0, epsilon = 1e-13);
        let r = c2.collision_moments(&(c2.isotropic() * 3.5));
        assert!(r.norm() < 1e-15);
    }

    #[test]
    fn isotropic_solves() {
        let c = closure(MomentBasis::monomial(1).unwrap());
        let rep = c
            .solve(&DVector::from_vec(vec![2.0, 0.0]), Some(&DVector::from_vec(vec![3.0, -1.0])))
            .unwrap();
        assert!(rep.multipliers.norm() < 1e-9);
        assert_eq!(rep.r_used, 0.0);
        let rep = c.solve(&DVector::from_vec(vec![1.0, 0.0]), None).unwrap();
        assert_relative_eq!(rep.multipliers[0], 0.5f64.ln(), epsilon = 1e-12);
        assert!(rep.multipliers[1].abs() < 1e-12);
        let f = c.closure_flux(&rep).unwrap();
        assert!(f[0].abs() < 1e-14);
        assert_relative_eq!(f[1], 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn vertex_moment_is_a_boundary_point() {
        // At a loose tolerance a sharply peaked ansatz passes the stopping test.
        let c = closure(MomentBasis::monomial(2).unwrap());
        let mu = c.quadrature().nodes()[30];
        let u = c.basis().eval(mu).unwrap();
        let rep = c.solve(&u, None).unwrap();
        let back = c.ansatz_moments(&rep.multipliers).unwrap();
        assert!((back - &rep.regularized_moments).norm() < 1e-9);
        let peak = c.ansatz(&rep.multipliers, mu).unwrap();
        let off = c.ansatz(&rep.multipliers, c.quadrature().nodes()[28]).unwrap();
        assert!(off < 1e-6 * peak);

        // At a tight tolerance only a regularized problem is solvable.
        let tight = SolverSettings {
            tau: 1e-14,
            ..SolverSettings::default()
        };
        let c = Closure::new(c.basis, c.quad.clone(), tight).unwrap();
        let rep = c.solve(&u, None).unwrap();
        assert!(rep.r_used > 0.0);
    }

    #[test]
    fn mixed_isotropic_flux() {
        let c = closure(MomentBasis::mixed(1).unwrap());
        let u = c.isotropic().clone();
        let f = c.flux(&u).unwrap();
        assert!(f[0].abs() < 1e-12);
        assert_relative_eq!(f[0], u[1] + u[2], epsilon = 1e-12);
    }

    #[test]
    fn reconstruction_and_flux_identity() {
        let c = closure(MomentBasis::monomial(3).unwrap());
        let u = moments_of_density(c.basis(), c.quadrature(), |m| (2.0 * m).exp() + 0.1);
        let rep = c.solve(&u, None).unwrap();
        assert_eq!(rep.r_used, 0.0);
        let back = c.ansatz_moments(&rep.multipliers).unwrap();
        assert!((back - &u).norm() < 1e-9 * u[0]);
        let f = c.closure_flux(&rep).unwrap();
        assert_relative_eq!(f[0], u[1], epsilon = 1e-9);
    }

    #[test]
    fn jacobian_matches_flux_differences() {
        let c = closure(MomentBasis::monomial(3).unwrap());
        let u = moments_of_density(c.basis(), c.quadrature(), |m| (1.5 * m - m * m).exp());
        let rep = c.solve(&u, None).unwrap();
        let jac = c.flux_jacobian(&rep).unwrap();
        let h = 1e-6;
        for k in 0..4 {
            let mut up = u.clone();
            let mut um = u.clone();
            up[k] += h;
            um[k] -= h;
            let fp = c.closure_flux(&c.solve(&up, Some(&rep.multipliers)).unwrap()).unwrap();
            let fm = c.closure_flux(&c.solve(&um, Some(&rep.multipliers)).unwrap()).unwrap();
            let col = (fp - fm) / (2.0 * h);
            for i in 0..4 {
                assert!((col[i] - jac[(i, k)]).abs() < 1e-5, "{i},{k}: {} vs {}", col[i], jac[(i, k)]);
            }
        }
    }

    #[test]
    fn characteristic_vectors_diagonalise_jacobian() {
        let c = closure(MomentBasis::mixed(2).unwrap());
        let u = moments_of_density(c.basis(), c.quadrature(), |m| (0.8 * m).exp());
        let rep = c.solve(&u, None).unwrap();
        let a = c.flux_jacobian(&rep).unwrap();
        let (lam, v) = c.characteristic_decomposition(&rep).unwrap();
        for k in 0..lam.len() {
            let r = &a * v.column(k) - v.column(k) * lam[k];
            assert!(r.norm() < 1e-10);
            assert!(lam[k].abs() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn settings_validation() {
        let mut s = SolverSettings::default();
        assert!(s.validate().is_ok());
        s.r_schedule = vec![1e-8, 1e-6];
        assert!(s.validate().is_err());
        s.r_schedule = vec![0.0, 1e-4, 1e-6];
        assert!(s.validate().is_err());
        s.r_schedule = vec![0.0, 2.0];
        assert!(s.validate().is_err());
    }
}
