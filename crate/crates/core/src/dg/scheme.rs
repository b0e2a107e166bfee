use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{
    scaled_legendre, scaled_legendre_derivative, ssp33_step, BoundaryKind, DgState, Forcing, Mesh,
    SemidiscreteConfig, Side, StageOperator,
};
use crate::basis::MomentVector;
use crate::entropy_solver::{Closure, Entropy, SolveReport, Workspace};
use crate::quadrature::{reference_cell_rule, QuadratureRule};
use crate::realizability::{build_polytope, limit_cell, Membership, RealizablePolytope};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularizationEvent {
    pub t: f64,
    pub x: f64,
    pub r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimiterEvent {
    pub stage: usize,
    pub t: f64,
    pub x: f64,
    pub theta: f64,
}

/// Rate of change of the total zeroth moment during one right-hand-side evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MassRate {
    /// Net inflow `f_hat_0` at the left edge minus the right edge.
    pub boundary: f64,
    /// `integral of <S> - sigma_a u_0 dx` under the spatial rule.
    pub source: f64,
}

impl MassRate {
    pub fn total(&self) -> f64 {
        self.boundary + self.source
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Diagnostics {
    pub regularizations: Vec<RegularizationEvent>,
    pub limiter_events: Vec<LimiterEvent>,
    /// Forward-Euler substep cell means not strictly inside the polytope.
    pub mean_violations: usize,
    pub euler_checks: usize,
    pub scalar_fallbacks: usize,
    pub solves: usize,
    pub newton_iterations: usize,
    pub stages: usize,
    #[serde(skip)]
    pub stage_rates: Vec<MassRate>,
}

/// The semidiscrete operator together with its limiters and warm-start caches.
pub struct Discretization {
    mesh: Mesh,
    cfg: SemidiscreteConfig,
    closure: Closure,
    polytope: Option<RealizablePolytope>,
    forcing: Box<dyn Forcing>,
    rule: QuadratureRule,
    phi: Vec<f64>,
    dphi: Vec<f64>,
    warm_nodes: Vec<f64>,
    warm_means: Vec<f64>,
    warm_ghost: [Vec<f64>; 2],
    ws: Workspace,
    check_means: bool,
    pub diagnostics: Diagnostics,
}

impl Discretization {
    pub fn new(mesh: Mesh, cfg: SemidiscreteConfig, closure: Closure, forcing: Box<dyn Forcing>) -> Result<Self> {
        cfg.validate()?;
        let polytope = match closure.entropy() {
            Entropy::MaxwellBoltzmann => Some(build_polytope(closure.basis(), closure.quadrature())?),
            Entropy::Quadratic => None,
        };
        if cfg.boundary == BoundaryKind::Dirichlet
            && (forcing.inflow(Side::Left, 0.0).is_none() || forcing.inflow(Side::Right, 0.0).is_none())
        {
            return Err(Error::InvalidArgument("Dirichlet boundaries need inflow data".into()));
        }
        let rule = reference_cell_rule(cfg.q)?;
        let kp1 = cfg.k + 1;
        let mut phi = Vec::with_capacity(cfg.q * kp1);
        let mut dphi = Vec::with_capacity(cfg.q * kp1);
        for &y in rule.nodes() {
            for i in 0..kp1 {
                phi.push(scaled_legendre(i, y));
                dphi.push(scaled_legendre_derivative(i, y));
            }
        }
        let n = closure.n_mom();
        let j = mesh.cells();
        Ok(Discretization {
            warm_nodes: vec![f64::NAN; j * cfg.q * n],
            warm_means: vec![f64::NAN; j * n],
            warm_ghost: [vec![f64::NAN; n], vec![f64::NAN; n]],
            ws: closure.workspace(),
            mesh,
            cfg,
            closure,
            polytope,
            forcing,
            rule,
            phi,
            dphi,
            check_means: true,
            diagnostics: Diagnostics::default(),
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn config(&self) -> &SemidiscreteConfig {
        &self.cfg
    }

    pub fn closure(&self) -> &Closure {
        &self.closure
    }

    pub fn polytope(&self) -> Option<&RealizablePolytope> {
        self.polytope.as_ref()
    }

    pub fn spatial_rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// Last weight of the reference-cell rule, the CFL weight `w_Q`.
    pub fn w_q(&self) -> f64 {
        *self.rule.weights().last().unwrap_or(&0.0)
    }

    pub fn stable_dt(&self) -> f64 {
        super::cfl_dt(self.mesh.dx(), self.cfg.sigma_t(), self.w_q())
    }

    /// Enables or disables the cell-mean membership check on Euler substeps.
    pub fn set_mean_checks(&mut self, on: bool) {
        self.check_means = on;
    }

    fn ghost(&self, side: Side, t: f64) -> Result<MomentVector> {
        self.forcing
            .inflow(side, t)
            .ok_or_else(|| Error::InvalidArgument("missing inflow data".into()))
    }

    fn solve(&mut self, u: &[f64], slot: Slot, t: f64, x: f64, flux: &mut [f64]) -> Result<()> {
        let n = self.closure.n_mom();
        let alpha = match slot {
            Slot::Node(idx) => &mut self.warm_nodes[idx * n..(idx + 1) * n],
            Slot::Mean(j) => &mut self.warm_means[j * n..(j + 1) * n],
            Slot::Ghost(s) => &mut self.warm_ghost[s][..],
        };
        let stats = self
            .closure
            .solve_with_flux(u, alpha, &mut self.ws, flux)
            .map_err(|e| e.at(format!("dual solve at t = {t}, x = {x}")))?;
        self.diagnostics.solves += 1;
        self.diagnostics.newton_iterations += stats.iterations;
        if stats.r_used > 0.0 {
            self.diagnostics
                .regularizations
                .push(RegularizationEvent { t, x, r: stats.r_used });
        }
        Ok(())
    }

    /// The semidiscrete right-hand side `M^{-1}(-F + V + S)` per cell, and the mass rate.
    pub fn rhs(&mut self, state: &DgState, t: f64) -> Result<(DgState, MassRate)> {
        let n = self.closure.n_mom();
        let jn = self.mesh.cells();
        let q = self.cfg.q;
        let kp1 = self.cfg.k + 1;
        let dx = self.mesh.dx();
        if state.len() != jn || state.degree() + 1 != kp1 || state.n_mom() != n {
            return Err(Error::InvalidArgument("state shape does not match the discretisation".into()));
        }

        let mut nodes_u = vec![0.0; jn * q * n];
        let mut nodes_f = vec![0.0; jn * q * n];
        for j in 0..jn {
            let c = state.cell(j);
            for qq in 0..q {
                let idx = j * q + qq;
                let u = &mut nodes_u[idx * n..(idx + 1) * n];
                for i in 0..kp1 {
                    let p = self.phi[qq * kp1 + i];
                    for l in 0..n {
                        u[l] += p * c[(i, l)];
                    }
                }
            }
        }
        for idx in 0..jn * q {
            let (j, qq) = (idx / q, idx % q);
            let x = self.mesh.position(j, self.rule.nodes()[qq]);
            let u = nodes_u[idx * n..(idx + 1) * n].to_vec();
            let mut f = vec![0.0; n];
            self.solve(&u, Slot::Node(idx), t, x, &mut f)
                .map_err(|e| e.at(format!("cell {j}, node {qq}")))?;
            nodes_f[idx * n..(idx + 1) * n].copy_from_slice(&f);
        }

        let ghosts = match self.cfg.boundary {
            BoundaryKind::Periodic => None,
            BoundaryKind::Dirichlet => {
                let mut out = Vec::with_capacity(2);
                for (s, side, x) in [(0, Side::Left, self.mesh.x_left()), (1, Side::Right, self.mesh.x_right())] {
                    let g = self.ghost(side, t)?;
                    let mut f = vec![0.0; n];
                    self.solve(g.as_slice(), Slot::Ghost(s), t, x, &mut f)
                        .map_err(|e| e.at("boundary ghost state"))?;
                    out.push((g.as_slice().to_vec(), f));
                }
                Some(out)
            }
        };

        let c_lf = self.cfg.lf_constant;
        let mut fhat = vec![0.0; (jn + 1) * n];
        for p in 0..=jn {
            let (ul, fl): (&[f64], &[f64]) = if p == 0 {
                match &ghosts {
                    Some(g) => (&g[0].0, &g[0].1),
                    None => node_pair(&nodes_u, &nodes_f, (jn - 1) * q + q - 1, n),
                }
            } else {
                node_pair(&nodes_u, &nodes_f, (p - 1) * q + q - 1, n)
            };
            let (ur, fr): (&[f64], &[f64]) = if p == jn {
                match &ghosts {
                    Some(g) => (&g[1].0, &g[1].1),
                    None => node_pair(&nodes_u, &nodes_f, 0, n),
                }
            } else {
                node_pair(&nodes_u, &nodes_f, p * q, n)
            };
            for l in 0..n {
                fhat[p * n + l] = 0.5 * (fl[l] + fr[l] - c_lf * (ur[l] - ul[l]));
            }
        }

        let (sa, ss) = (self.cfg.sigma_a, self.cfg.sigma_s);
        let iso = self.closure.isotropic().clone();
        let w = self.rule.weights().to_vec();
        let mut out = DgState::zeros(jn, self.cfg.k, n);
        let mut source_rate = 0.0;
        let mut s = vec![0.0; n];
        for j in 0..jn {
            let d = out.cell_mut(j);
            for qq in 0..q {
                let idx = j * q + qq;
                let u = &nodes_u[idx * n..(idx + 1) * n];
                let f = &nodes_f[idx * n..(idx + 1) * n];
                for l in 0..n {
                    s[l] = ss * (u[0] * iso[l] - u[l]) - sa * u[l];
                }
                s[0] = -sa * u[0];
                if let Some(src) = self.forcing.source(t, self.mesh.position(j, self.rule.nodes()[qq])) {
                    for l in 0..n {
                        s[l] += src[l];
                    }
                }
                source_rate += dx * w[qq] * s[0];
                for i in 0..kp1 {
                    let vf = w[qq] * self.dphi[qq * kp1 + i] / dx;
                    let vs = w[qq] * self.phi[qq * kp1 + i];
                    for l in 0..n {
                        d[(i, l)] += vf * f[l] + vs * s[l];
                    }
                }
            }
            for i in 0..kp1 {
                let right = 1.0;
                let left = if i % 2 == 0 { 1.0 } else { -1.0 };
                let m = (2 * i + 1) as f64;
                for l in 0..n {
                    let edge = fhat[(j + 1) * n + l] * right - fhat[j * n + l] * left;
                    d[(i, l)] = m * (d[(i, l)] - edge / dx);
                }
            }
        }
        let boundary = match self.cfg.boundary {
            BoundaryKind::Periodic => 0.0,
            BoundaryKind::Dirichlet => fhat[0] - fhat[jn * n],
        };
        Ok((
            out,
            MassRate {
                boundary,
                source: source_rate,
            },
        ))
    }

    /// Means of cell `j`'s neighbours, with ghost states or periodic wrap at the ends.
    fn neighbour_means(&self, state: &DgState, j: usize, t: f64) -> Result<(MomentVector, MomentVector)> {
        let jn = self.mesh.cells();
        let left = if j > 0 {
            state.mean(j - 1)
        } else {
            match self.cfg.boundary {
                BoundaryKind::Periodic => state.mean(jn - 1),
                BoundaryKind::Dirichlet => self.ghost(Side::Left, t)?,
            }
        };
        let right = if j + 1 < jn {
            state.mean(j + 1)
        } else {
            match self.cfg.boundary {
                BoundaryKind::Periodic => state.mean(0),
                BoundaryKind::Dirichlet => self.ghost(Side::Right, t)?,
            }
        };
        Ok((left, right))
    }

    /// TVBM minmod slope limiter, in characteristic variables where well conditioned.
    pub fn slope_limit(&mut self, state: &mut DgState, t: f64) -> Result<()> {
        if self.cfg.k == 0 || !self.cfg.slope_limiter {
            return Ok(());
        }
        let n = self.closure.n_mom();
        let jn = self.mesh.cells();
        let threshold = self.cfg.tvb_m * self.mesh.dx() * self.mesh.dx();
        let before = state.clone();
        for j in 0..jn {
            let (ml, mr) = self.neighbour_means(&before, j, t)?;
            let mean = before.mean(j);
            let transform = if self.cfg.characteristic {
                self.characteristic_transform(&mean, j, t)?
            } else {
                None
            };
            let c = before.cell(j);
            let to_char = |v: MomentVector| match &transform {
                Some((_, vinv)) => vinv * v,
                None => v,
            };
            let slope = to_char(c.row(1).transpose());
            let fwd = to_char(&mr - &mean);
            let bwd = to_char(&mean - &ml);
            let mut new_slope = slope.clone();
            let mut changed = vec![false; n];
            for l in 0..n {
                if slope[l].abs() < threshold {
                    continue;
                }
                let m = super::minmod(slope[l], fwd[l], bwd[l]);
                if m != slope[l] {
                    new_slope[l] = m;
                    changed[l] = true;
                }
            }
            if !changed.iter().any(|&c| c) {
                continue;
            }
            let target = state.cell_mut(j);
            for i in 1..=self.cfg.k {
                let mut row = to_char(c.row(i).transpose());
                for l in 0..n {
                    if i == 1 {
                        row[l] = new_slope[l];
                    } else if changed[l] {
                        row[l] = 0.0;
                    }
                }
                let back = match &transform {
                    Some((v, _)) => v * row,
                    None => row,
                };
                for l in 0..n {
                    target[(i, l)] = back[l];
                }
            }
        }
        Ok(())
    }

    /// `(V, V^{-1})` from the flux Jacobian at the cell mean, or `None` when
    /// `V` is too ill-conditioned or the eigenproblem fails.
    fn characteristic_transform(
        &mut self,
        mean: &MomentVector,
        j: usize,
        t: f64,
    ) -> Result<Option<(DMatrix<f64>, DMatrix<f64>)>> {
        let n = self.closure.n_mom();
        let mut f = vec![0.0; n];
        self.solve(mean.as_slice(), Slot::Mean(j), t, self.mesh.center(j), &mut f)
            .map_err(|e| e.at(format!("cell mean {j}")))?;
        let report = SolveReport {
            multipliers: DVector::from_column_slice(&self.warm_means[j * n..(j + 1) * n]),
            r_used: 0.0,
            iterations: 0,
            regularized_moments: mean.clone(),
        };
        let v = match self.closure.characteristic_decomposition(&report) {
            Ok((_, v)) => v,
            Err(_) => {
                self.diagnostics.scalar_fallbacks += 1;
                return Ok(None);
            }
        };
        let sv = v.clone().svd(false, false).singular_values;
        let cond = sv.max() / sv.min();
        if !(cond <= self.cfg.kappa_jac) {
            self.diagnostics.scalar_fallbacks += 1;
            return Ok(None);
        }
        match v.clone().try_inverse() {
            Some(vinv) => Ok(Some((v, vinv))),
            None => {
                self.diagnostics.scalar_fallbacks += 1;
                Ok(None)
            }
        }
    }

    /// Realizability limiter on every cell; logs each nonzero `theta`.
    pub fn realizability_limit(&mut self, state: &mut DgState, t: f64) -> Result<()> {
        let Some(poly) = &self.polytope else {
            return Ok(());
        };
        let stage = self.diagnostics.stages;
        for j in 0..state.len() {
            let (limited, theta) = limit_cell(state.cell(j), poly, &self.rule, self.cfg.epsilon_limiter)
                .map_err(|e| e.at(format!("realizability limiter, cell {j}, t = {t}")))?;
            if theta > 0.0 {
                *state.cell_mut(j) = limited;
                self.diagnostics.limiter_events.push(LimiterEvent {
                    stage,
                    t,
                    x: self.mesh.center(j),
                    theta,
                });
            }
        }
        Ok(())
    }

    /// Slope limiter followed by the realizability limiter.
    pub fn apply_limiters(&mut self, state: &mut DgState, t: f64) -> Result<()> {
        self.slope_limit(state, t)?;
        self.realizability_limit(state, t)
    }

    /// Number of cell means not strictly inside the realizable polytope.
    pub fn count_mean_violations(&self, state: &DgState) -> usize {
        let Some(poly) = &self.polytope else {
            return 0;
        };
        (0..state.len())
            .filter(|&j| poly.classify(state.cell(j).row(0).transpose().as_slice(), 0.0) != Membership::Interior)
            .count()
    }

    /// One SSP(3,3) step; returns the new state and the predicted mass change.
    pub fn step(&mut self, state: &DgState, t: f64, dt: f64) -> Result<(DgState, f64)> {
        self.diagnostics.stage_rates.clear();
        let next = ssp33_step(state, t, dt, self)?;
        let rates = &self.diagnostics.stage_rates;
        let dm = dt
            * rates
                .iter()
                .zip(super::SSP33_WEIGHTS)
                .map(|(r, b)| b * r.total())
                .sum::<f64>();
        Ok((next, dm))
    }
}

impl StageOperator<DgState> for Discretization {
    fn rhs(&mut self, u: &DgState, t: f64) -> Result<DgState> {
        let (d, rate) = Discretization::rhs(self, u, t)?;
        self.diagnostics.stage_rates.push(rate);
        Ok(d)
    }

    fn after_euler(&mut self, euler: &DgState, _t: f64) -> Result<()> {
        if self.check_means {
            self.diagnostics.euler_checks += 1;
            self.diagnostics.mean_violations += self.count_mean_violations(euler);
        }
        Ok(())
    }

    fn limit(&mut self, u: &mut DgState, t: f64) -> Result<()> {
        self.diagnostics.stages += 1;
        self.apply_limiters(u, t)
    }
}

#[derive(Clone, Copy)]
enum Slot {
    Node(usize),
    Mean(usize),
    Ghost(usize),
}

fn node_pair<'a>(u: &'a [f64], f: &'a [f64], idx: usize, n: usize) -> (&'a [f64], &'a [f64]) {
    (&u[idx * n..(idx + 1) * n], &f[idx * n..(idx + 1) * n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::MomentBasis;
    use crate::dg::{NoForcing, project_initial};
    use crate::entropy_solver::SolverSettings;
    use crate::quadrature::angular_quadrature;
    use approx::assert_relative_eq;

    fn closure(n: usize) -> Closure {
        Closure::new(
            MomentBasis::monomial(n).unwrap(),
            angular_quadrature(20).unwrap(),
            SolverSettings::default(),
        )
        .unwrap()
    }

    struct Constant(MomentVector);

    impl Forcing for Constant {
        fn inflow(&self, _side: Side, _t: f64) -> Option<MomentVector> {
            Some(self.0.clone())
        }
    }

    #[test]
    fn isotropic_equilibrium_has_zero_rhs() {
        let c = closure(2);
        let iso = c.isotropic().clone();
        let mesh = Mesh::new(0.0, 1.0, 6).unwrap();
        let cfg = SemidiscreteConfig {
            sigma_s: 1.0,
            ..SemidiscreteConfig::default()
        };
        let state = project_initial(|_| iso.clone(), &mesh, 2).unwrap();
        let mut d = Discretization::new(mesh, cfg, c, Box::new(NoForcing)).unwrap();
        let (r, rate) = d.rhs(&state, 0.0).unwrap();
        for j in 0..6 {
            assert!(r.cell(j).amax() < 1e-12);
        }
        assert_eq!(rate.boundary, 0.0);
    }

    #[test]
    fn pure_absorption_rhs() {
        let c = closure(1);
        let u = DVector::from_vec(vec![1.0, 0.3]);
        let mesh = Mesh::new(0.0, 1.0, 5).unwrap();
        let cfg = SemidiscreteConfig {
            sigma_a: 2.0,
            boundary: BoundaryKind::Dirichlet,
            ..SemidiscreteConfig::default()
        };
        let state = project_initial(|_| u.clone(), &mesh, 2).unwrap();
        let mut d = Discretization::new(mesh, cfg, c, Box::new(Constant(u.clone()))).unwrap();
        let (r, rate) = d.rhs(&state, 0.0).unwrap();
        for j in 0..5 {
            assert_relative_eq!(r.cell(j)[(0, 0)], -2.0, epsilon = 1e-10);
            assert_relative_eq!(r.cell(j)[(0, 1)], -0.6, epsilon = 1e-10);
        }
        assert!(rate.boundary.abs() < 1e-12);
        assert_relative_eq!(rate.source, -2.0, epsilon = 1e-12);
    }

    #[test]
    fn slope_limiter_examples() {
        let c = closure(1);
        let mesh = Mesh::new(0.0, 1.0, 8).unwrap();
        let cfg = SemidiscreteConfig {
            tvb_m: 0.0,
            characteristic: false,
            ..SemidiscreteConfig::default()
        };
        let mut d = Discretization::new(mesh, cfg.clone(), c.clone(), Box::new(NoForcing)).unwrap();
        // Linear data: minmod returns the slope itself (interior cells, periodic ends aside).
        let lin = project_initial(|x| DVector::from_vec(vec![1.0 + 0.1 * x, 0.05 * x]), &mesh, 2).unwrap();
        let mut s = lin.clone();
        d.slope_limit(&mut s, 0.0).unwrap();
        for j in 1..7 {
            assert_eq!(s.cell(j), lin.cell(j));
        }
        // Local extremum in the means: quadratic row zeroed, slope flattened.
        let mut bump = DgState::zeros(8, 2, 2);
        for j in 0..8 {
            bump.cell_mut(j)[(0, 0)] = 1.0;
        }
        bump.cell_mut(4)[(0, 0)] = 1.2;
        bump.cell_mut(4)[(1, 0)] = 0.05;
        bump.cell_mut(4)[(2, 0)] = -0.03;
        let mut s = bump.clone();
        d.slope_limit(&mut s, 0.0).unwrap();
        assert_eq!(s.cell(4)[(1, 0)], 0.0);
        assert_eq!(s.cell(4)[(2, 0)], 0.0);
        assert_eq!(s.cell(4).row(0), bump.cell(4).row(0));
        // Idempotent on the scalar path.
        let mut again = s.clone();
        d.slope_limit(&mut again, 0.0).unwrap();
        assert_eq!(again, s);
        // TVB bypass for small slopes.
        let big_m = SemidiscreteConfig {
            tvb_m: 1e6,
            ..cfg
        };
        let mut d = Discretization::new(mesh, big_m, c, Box::new(NoForcing)).unwrap();
        let mut s = bump.clone();
        d.slope_limit(&mut s, 0.0).unwrap();
        assert_eq!(s, bump);
    }

    #[test]
    fn characteristic_limiter_on_smooth_data_is_identity() {
        let c = closure(2);
        let mesh = Mesh::new(0.0, 1.0, 10).unwrap();
        let cfg = SemidiscreteConfig {
            tvb_m: 0.0,
            ..SemidiscreteConfig::default()
        };
        let iso = c.isotropic().clone();
        let mut d = Discretization::new(mesh, cfg, c, Box::new(NoForcing)).unwrap();
        let state = project_initial(|x| &iso * (1.0 + 0.1 * (6.0 * x).sin()), &mesh, 2).unwrap();
        let mut s = state.clone();
        d.slope_limit(&mut s, 0.0).unwrap();
        // Away from the extrema the slope is consistent with the neighbour differences.
        assert_eq!(s.cell(5), state.cell(5));
    }

    #[test]
    fn lf_flux_is_consistent() {
        let c = closure(1);
        let u = DVector::from_vec(vec![1.0, 0.0]);
        let f = c.flux(&u).unwrap();
        let fh = crate::dg::lax_friedrichs(&f, &f, &u, &u, 1.0);
        assert_eq!(fh, f);
        assert_relative_eq!(f[1], 1.0 / 3.0, epsilon = 1e-12);
    }
}
