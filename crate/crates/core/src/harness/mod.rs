//! Run orchestration: setup, time loop, error norms and convergence tables.

mod config;
pub mod output;

use std::time::Instant;

use serde::Serialize;

pub use config::{Config, ProblemKind};

use crate::basis::MomentBasis;
use crate::dg::{project_initial, DgState, Discretization, LimiterEvent, Mesh, RegularizationEvent};
use crate::entropy_solver::Closure;
use crate::problems::{
    limiter_test_curve, manufactured_setup, plane_source_setup, two_beams_setup, LimiterTestParams, Manufactured,
    ManufacturedParams, ProblemSetup,
};
use crate::quadrature::{angular_quadrature, gauss_lobatto, AngularQuadrature};
use crate::realizability::{build_polytope, limit_cell};
use crate::{Error, Result};

/// Nodes per cell of the Gauss-Lobatto rule used for error norms.
pub const ERROR_NODES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassSample {
    pub t: f64,
    pub mass: f64,
    /// Mass change over the step predicted from boundary fluxes and sources.
    pub predicted_change: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: Config,
    pub x_left: f64,
    pub x_right: f64,
    pub t_final: f64,
    pub steps: usize,
    pub dt: f64,
    #[serde(skip)]
    pub state: DgState,
    pub mass: Vec<MassSample>,
    /// Largest `|actual - predicted|` mass change over all steps.
    pub mass_balance_error: f64,
    pub theta_log: Vec<LimiterEvent>,
    pub regularization_log: Vec<RegularizationEvent>,
    pub mean_violations: usize,
    pub euler_checks: usize,
    pub scalar_fallbacks: usize,
    pub solves: usize,
    pub newton_iterations: usize,
    /// `(E1, Einf)` of the zeroth moment where an exact solution is known.
    pub errors: Option<(f64, f64)>,
    pub theta_max: f64,
    pub wall_time_s: f64,
}

impl RunReport {
    pub fn mesh(&self) -> Mesh {
        Mesh::new(self.x_left, self.x_right, self.state.len()).expect("mesh of a finished run")
    }
}

fn closure_for(cfg: &Config) -> Result<(MomentBasis, AngularQuadrature, Closure)> {
    let basis = cfg.moment_basis()?;
    let quad = angular_quadrature(cfg.n_q)?;
    let closure = Closure::new(basis, quad.clone(), cfg.solver_settings())?;
    Ok((basis, quad, closure))
}

/// Builds the problem setup for `cfg` on `cells` cells.
pub fn setup(cfg: &Config, cells: usize) -> Result<ProblemSetup> {
    let basis = cfg.moment_basis()?;
    let quad = angular_quadrature(cfg.n_q)?;
    match cfg.problem {
        ProblemKind::Manufactured => {
            let p = ManufacturedParams::new(cfg.k_peak, cfg.final_time())?;
            manufactured_setup(cells, cfg.k, p, &basis, &quad)
        }
        ProblemKind::PlaneSource => plane_source_setup(cells, cfg.k, &cfg.benchmark().unwrap(), &basis, &quad),
        ProblemKind::TwoBeams => two_beams_setup(cells, cfg.k, &cfg.benchmark().unwrap(), &basis, &quad),
        ProblemKind::LimiterTest => Err(Error::Config(
            "the limiter test has no time evolution; use the convergence study".into(),
        )),
    }
}

/// Runs `cfg` on its own `J`.
pub fn run(cfg: &Config) -> Result<RunReport> {
    run_with_cells(cfg, cfg.cells)
}

pub fn run_with_cells(cfg: &Config, cells: usize) -> Result<RunReport> {
    cfg.validate()?;
    let start = Instant::now();
    if cfg.problem == ProblemKind::LimiterTest {
        return limiter_test_run(cfg, cells, start);
    }
    let (basis, quad, closure) = closure_for(cfg)?;
    let problem = setup(cfg, cells)?;
    let t_final = problem.t_final;
    let mesh = problem.mesh;
    let mut sd = cfg.semidiscrete();
    sd.sigma_a = problem.sigma_a;
    sd.sigma_s = problem.sigma_s;
    sd.boundary = problem.boundary;
    let mut disc = Discretization::new(mesh, sd, closure, problem.forcing)?;

    let mut state = problem.initial;
    let dx = mesh.dx();
    let dt = disc.stable_dt();
    let mut t = 0.0;
    let mut mass = vec![MassSample {
        t,
        mass: state.total_mass(dx),
        predicted_change: 0.0,
    }];
    let mut balance = 0.0f64;
    let mut steps = 0;
    while t_final - t > 1e-14 * t_final.max(1.0) {
        // Final step clipped to land on t_final.
        let h = dt.min(t_final - t);
        let (next, dm) = disc.step(&state, t, h).map_err(|e| e.at(format!("step {steps} at t = {t}")))?;
        state = next;
        t = if h < dt { t_final } else { t + h };
        steps += 1;
        let m = state.total_mass(dx);
        let prev = mass.last().map_or(m, |s| s.mass);
        balance = balance.max(((m - prev) - dm).abs());
        mass.push(MassSample {
            t,
            mass: m,
            predicted_change: dm,
        });
    }

    let errors = match cfg.problem {
        ProblemKind::Manufactured => {
            let p = ManufacturedParams::new(cfg.k_peak, t_final)?;
            let exact = Manufactured::new(p, basis, quad);
            Some(error_norms(&state, &mesh, 0, |x| exact.quadrature_u0(t_final, x)))
        }
        _ => None,
    };
    let d = std::mem::take(&mut disc.diagnostics);
    let theta_max = d.limiter_events.iter().map(|e| e.theta).fold(0.0, f64::max);
    Ok(RunReport {
        config: cfg.clone(),
        x_left: mesh.x_left(),
        x_right: mesh.x_right(),
        t_final,
        steps,
        dt,
        state,
        mass,
        mass_balance_error: balance,
        theta_log: d.limiter_events,
        regularization_log: d.regularizations,
        mean_violations: d.mean_violations,
        euler_checks: d.euler_checks,
        scalar_fallbacks: d.scalar_fallbacks,
        solves: d.solves,
        newton_iterations: d.newton_iterations,
        errors,
        theta_max,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Projection of the limiter-test curve followed by the realizability limiter.
pub fn limited_reconstruction(cfg: &Config, cells: usize) -> Result<(DgState, Mesh, Vec<LimiterEvent>)> {
    let quad = angular_quadrature(cfg.n_q)?;
    let basis = MomentBasis::monomial(cfg.order)?;
    let params = LimiterTestParams::new(cfg.gamma, cfg.order, &quad)?;
    let (a, b) = LimiterTestParams::domain();
    let mesh = Mesh::new(a, b, cells)?;
    let poly = build_polytope(&basis, &quad)?;
    let rule = crate::quadrature::reference_cell_rule(cfg.q)?;
    let mut state = project_initial(|x| limiter_test_curve(&params, x), &mesh, cfg.k)?;
    let mut events = Vec::new();
    for j in 0..cells {
        let (limited, theta) = limit_cell(state.cell(j), &poly, &rule, cfg.epsilon_limiter)
            .map_err(|e| e.at(format!("limiter test, cell {j}")))?;
        if theta > 0.0 {
            *state.cell_mut(j) = limited;
            events.push(LimiterEvent {
                stage: 0,
                t: 0.0,
                x: mesh.center(j),
                theta,
            });
        }
    }
    Ok((state, mesh, events))
}

fn limiter_test_run(cfg: &Config, cells: usize, start: Instant) -> Result<RunReport> {
    let quad = angular_quadrature(cfg.n_q)?;
    let params = LimiterTestParams::new(cfg.gamma, cfg.order, &quad)?;
    let (state, mesh, events) = limited_reconstruction(cfg, cells)?;
    let errors = Some(error_norms(&state, &mesh, 0, |x| limiter_test_curve(&params, x)[0]));
    let theta_max = events.iter().map(|e| e.theta).fold(0.0, f64::max);
    Ok(RunReport {
        config: cfg.clone(),
        x_left: mesh.x_left(),
        x_right: mesh.x_right(),
        t_final: 0.0,
        steps: 0,
        dt: 0.0,
        mass: vec![MassSample {
            t: 0.0,
            mass: state.total_mass(mesh.dx()),
            predicted_change: 0.0,
        }],
        state,
        mass_balance_error: 0.0,
        theta_log: events,
        regularization_log: Vec::new(),
        mean_violations: 0,
        euler_checks: 0,
        scalar_fallbacks: 0,
        solves: 0,
        newton_iterations: 0,
        errors,
        theta_max,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// `(E1, Einf)` of component `comp` against `exact`, with a 100-point
/// Gauss-Lobatto rule on every cell of `mesh`.
pub fn error_norms(state: &DgState, mesh: &Mesh, comp: usize, exact: impl Fn(f64) -> f64) -> (f64, f64) {
    error_norms_on(state, mesh, mesh, comp, exact)
}

/// As [`error_norms`], but integrating over the cells of `grid`, which must
/// nest inside the cells of `mesh`.
pub fn error_norms_on(
    state: &DgState,
    mesh: &Mesh,
    grid: &Mesh,
    comp: usize,
    exact: impl Fn(f64) -> f64,
) -> (f64, f64) {
    let rule = gauss_lobatto(ERROR_NODES, -0.5, 0.5).expect("fixed rule size");
    let (mut e1, mut einf) = (0.0, 0.0f64);
    let h = grid.dx();
    for g in 0..grid.cells() {
        let xc = grid.center(g);
        let j = (((xc - mesh.x_left()) / mesh.dx()).floor() as usize).min(mesh.cells() - 1);
        for (y, w) in rule.iter() {
            let x = xc + y * h;
            let yj = (x - mesh.center(j)) / mesh.dx();
            let err = (exact(x) - state.eval(j, yj)[comp]).abs();
            e1 += h * w * err;
            einf = einf.max(err);
        }
    }
    (e1, einf)
}

/// `log(E_c / E_f) / log(dx_c / dx_f)`, or `None` if either error is not positive.
pub fn observed_order(e_coarse: f64, e_fine: f64, dx_coarse: f64, dx_fine: f64) -> Option<f64> {
    if !(e_coarse > 0.0 && e_fine > 0.0 && dx_coarse > 0.0 && dx_fine > 0.0) || dx_coarse == dx_fine {
        return None;
    }
    Some((e_coarse / e_fine).ln() / (dx_coarse / dx_fine).ln())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentErrors {
    pub component: usize,
    pub e1: f64,
    pub nu1: Option<f64>,
    pub einf: f64,
    pub nuinf: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub cells: usize,
    pub errors: Vec<ComponentErrors>,
    pub theta_max: Option<f64>,
    pub regularizations: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub problem: ProblemKind,
    pub k: usize,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    pub fn column(&self, comp: usize) -> impl Iterator<Item = &ComponentErrors> {
        self.rows.iter().filter_map(move |r| r.errors.iter().find(|e| e.component == comp))
    }
}

/// Runs every `J` in `cells` and tabulates errors with orders between consecutive rows.
///
/// Manufactured runs report the zeroth moment at `t_f`. The limiter test
/// reports the first two components measured on the finest grid of the list.
pub fn convergence_study(cfg: &Config, cells: &[usize]) -> Result<ConvergenceReport> {
    if cells.is_empty() || cells.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("cell counts must be nonempty and increasing".into()));
    }
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(cells.len());
    let mut dxs: Vec<f64> = Vec::with_capacity(cells.len());
    for &j in cells {
        let start = Instant::now();
        let (errors, theta_max, regs, dx) = match cfg.problem {
            ProblemKind::Manufactured => {
                let r = run_with_cells(cfg, j)?;
                let (e1, einf) = r.errors.expect("manufactured errors");
                (vec![(0, e1, einf)], None, r.regularization_log.len(), r.mesh().dx())
            }
            ProblemKind::LimiterTest => {
                let finest = *cells.last().unwrap();
                if !finest.is_multiple_of(j) {
                    return Err(Error::InvalidArgument(format!(
                        "limiter test grids must nest in the finest grid ({j} does not divide {finest})"
                    )));
                }
                let quad = angular_quadrature(cfg.n_q)?;
                let params = LimiterTestParams::new(cfg.gamma, cfg.order, &quad)?;
                let (state, mesh, events) = limited_reconstruction(cfg, j)?;
                let grid = Mesh::new(mesh.x_left(), mesh.x_right(), finest)?;
                let errs = (0..2.min(cfg.order + 1))
                    .map(|c| {
                        let (e1, einf) = error_norms_on(&state, &mesh, &grid, c, |x| limiter_test_curve(&params, x)[c]);
                        (c, e1, einf)
                    })
                    .collect();
                let theta = events.iter().map(|e| e.theta).fold(0.0, f64::max);
                (errs, Some(theta), 0, mesh.dx())
            }
            _ => {
                return Err(Error::Config(format!(
                    "no reference solution for {}; convergence needs manufactured or limiter_test",
                    cfg.problem
                )))
            }
        };
        let prev = rows.last();
        let errors = errors
            .into_iter()
            .map(|(c, e1, einf)| {
                let p = prev.and_then(|r| r.errors.iter().find(|e| e.component == c));
                let dxp = dxs.last().copied();
                ComponentErrors {
                    component: c,
                    e1,
                    nu1: p.zip(dxp).and_then(|(p, dxp)| observed_order(p.e1, e1, dxp, dx)),
                    einf,
                    nuinf: p.zip(dxp).and_then(|(p, dxp)| observed_order(p.einf, einf, dxp, dx)),
                }
            })
            .collect();
        rows.push(ConvergenceRow {
            cells: j,
            errors,
            theta_max,
            regularizations: regs,
            wall_time_s: start.elapsed().as_secs_f64(),
        });
        dxs.push(dx);
    }
    Ok(ConvergenceReport {
        problem: cfg.problem,
        k: cfg.k,
        rows,
    })
}
