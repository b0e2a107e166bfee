//! Experiment setups: manufactured solution, limiter reconstruction test,
//! plane source and two beams.

use std::f64::consts::PI;

use crate::basis::{isotropic_moments, moments_of_density, MomentBasis, MomentVector};
use crate::dg::{project_initial, BoundaryKind, DgState, Forcing, Mesh, Side};
use crate::quadrature::AngularQuadrature;
use crate::{Error, Result};

/// Vacuum floor density.
pub const PSI_FLOOR: f64 = 0.5e-8;
/// Beam width in the two-beam inflow.
pub const BEAM_WIDTH: f64 = 50.0;
/// Nominal node of the angular rule used as the peak of the limiter-test curve.
pub const LIMITER_TEST_MU0: f64 = 0.5403;

/// A fully specified initial-boundary value problem on a mesh.
pub struct ProblemSetup {
    pub mesh: Mesh,
    pub sigma_a: f64,
    pub sigma_s: f64,
    pub boundary: BoundaryKind,
    pub t_final: f64,
    pub initial: DgState,
    pub forcing: Box<dyn Forcing>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedParams {
    pub k_peak: f64,
    pub c0: f64,
    pub c1: f64,
    pub t_final: f64,
}

impl ManufacturedParams {
    /// `c0 = 4` and `c1` chosen so that `max <phi> = 1` over `[0, t_f] x X`.
    pub fn new(k_peak: f64, t_final: f64) -> Result<Self> {
        Self::with_c0(k_peak, 4.0, t_final)
    }

    pub fn with_c0(k_peak: f64, c0: f64, t_final: f64) -> Result<Self> {
        if !(k_peak >= 1.0) || !c0.is_finite() || !(t_final >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "manufactured solution needs K >= 1 and t_f >= 0 (K = {k_peak}, t_f = {t_final})"
            )));
        }
        let a = k_peak - 1.0;
        // log(a / (2 sinh a)), evaluated without overflow.
        let log_ratio = if a == 0.0 {
            0.0
        } else {
            a.ln() - a - (-(-2.0 * a).exp()).ln_1p()
        };
        let c1 = c0 * t_final - k_peak + 1.0 - log_ratio;
        Ok(ManufacturedParams {
            k_peak,
            c0,
            c1,
            t_final,
        })
    }

    pub fn domain() -> (f64, f64) {
        (-PI, PI)
    }

    /// `(alpha_0, alpha_1)` at `(t, x)`.
    pub fn multipliers(&self, t: f64, x: f64) -> (f64, f64) {
        let s = (x - t).sin();
        (-self.k_peak - s + self.c0 * t - self.c1, self.k_peak + s)
    }
}

pub fn manufactured_density(p: &ManufacturedParams, t: f64, x: f64, mu: f64) -> f64 {
    let (a0, a1) = p.multipliers(t, x);
    (a0 + a1 * mu).exp()
}

/// `S = d_t phi + mu d_x phi = phi (c0 + cos(x - t) (1 - mu)^2)`.
pub fn manufactured_source(p: &ManufacturedParams, t: f64, x: f64, mu: f64) -> f64 {
    let d = 1.0 - mu;
    manufactured_density(p, t, x, mu) * (p.c0 + (x - t).cos() * d * d)
}

/// `<phi(t, x, .)> = exp(alpha_0) 2 sinh(alpha_1) / alpha_1`.
pub fn manufactured_exact_u0(p: &ManufacturedParams, t: f64, x: f64) -> f64 {
    let (a0, a1) = p.multipliers(t, x);
    if a1 == 0.0 {
        return 2.0 * a0.exp();
    }
    let m = a1.abs();
    (a0 + m).exp() * -(-2.0 * m).exp_m1() / m
}

/// Manufactured-solution forcing; the source moments use the angular rule.
pub struct Manufactured {
    params: ManufacturedParams,
    basis: MomentBasis,
    quad: AngularQuadrature,
}

impl Manufactured {
    pub fn new(params: ManufacturedParams, basis: MomentBasis, quad: AngularQuadrature) -> Self {
        Manufactured { params, basis, quad }
    }

    pub fn params(&self) -> &ManufacturedParams {
        &self.params
    }

    /// `<b phi(t, x, .)>` under the angular rule.
    pub fn moments(&self, t: f64, x: f64) -> MomentVector {
        moments_of_density(&self.basis, &self.quad, |mu| manufactured_density(&self.params, t, x, mu))
    }

    /// Zeroth moment consistent with the angular rule used by the scheme.
    pub fn quadrature_u0(&self, t: f64, x: f64) -> f64 {
        self.quad
            .integrate(|mu| manufactured_density(&self.params, t, x, mu))
    }
}

impl Forcing for Manufactured {
    fn inflow(&self, _side: Side, _t: f64) -> Option<MomentVector> {
        None
    }

    fn source(&self, t: f64, x: f64) -> Option<MomentVector> {
        Some(moments_of_density(&self.basis, &self.quad, |mu| {
            manufactured_source(&self.params, t, x, mu)
        }))
    }
}

/// Periodic manufactured problem on `(-pi, pi)` with `sigma_a = sigma_s = 0`.
pub fn manufactured_setup(
    cells: usize,
    k: usize,
    params: ManufacturedParams,
    basis: &MomentBasis,
    quad: &AngularQuadrature,
) -> Result<ProblemSetup> {
    let (a, b) = ManufacturedParams::domain();
    let mesh = Mesh::new(a, b, cells)?;
    let forcing = Manufactured::new(params, *basis, quad.clone());
    let initial = project_initial(|x| forcing.moments(0.0, x), &mesh, k)?;
    Ok(ProblemSetup {
        mesh,
        sigma_a: 0.0,
        sigma_s: 0.0,
        boundary: BoundaryKind::Periodic,
        t_final: params.t_final,
        initial,
        forcing: Box::new(forcing),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimiterTestParams {
    pub gamma: f64,
    pub order: usize,
    pub mu0: f64,
    u_iso: MomentVector,
}

impl LimiterTestParams {
    /// `mu0` is the node of `quad` nearest 0.5403.
    pub fn new(gamma: f64, order: usize, quad: &AngularQuadrature) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidArgument(format!("gamma must lie in (0, 1], got {gamma}")));
        }
        let basis = MomentBasis::monomial(order)?;
        Ok(LimiterTestParams {
            gamma,
            order,
            mu0: quad.nearest_node(LIMITER_TEST_MU0),
            u_iso: isotropic_moments(&basis, quad),
        })
    }

    pub fn domain() -> (f64, f64) {
        (-1.0, 1.0)
    }

    fn endpoint(&self, mu: f64, scale: f64) -> MomentVector {
        let m = MomentVector::from_iterator(self.order + 1, (0..=self.order).map(|i| mu.powi(i as i32)));
        (m * (1.0 - self.gamma) + &self.u_iso * self.gamma) * scale
    }

    /// The two endpoint vectors of the curve.
    pub fn endpoints(&self) -> (MomentVector, MomentVector) {
        (self.endpoint(self.mu0, 1.0), self.endpoint(-1.0, 1e-8))
    }
}

/// `(1 - lambda(x)) u_0 + lambda(x) u_1` with `lambda(x) = (cos(pi x) + 1) / 2`.
pub fn limiter_test_curve(p: &LimiterTestParams, x: f64) -> MomentVector {
    let lambda = 0.5 * ((PI * x).cos() + 1.0);
    let (u0, u1) = p.endpoints();
    u0 * (1.0 - lambda) + u1 * lambda
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkParams {
    pub psi_floor: f64,
    pub beam_width: f64,
    pub sigma_a: f64,
    pub sigma_s: f64,
    pub x_left: f64,
    pub x_right: f64,
    pub t_final: f64,
}

impl BenchmarkParams {
    pub fn plane_source() -> Self {
        BenchmarkParams {
            psi_floor: PSI_FLOOR,
            beam_width: BEAM_WIDTH,
            sigma_a: 0.0,
            sigma_s: 1.0,
            x_left: -1.2,
            x_right: 1.2,
            t_final: 1.0,
        }
    }

    pub fn two_beams() -> Self {
        BenchmarkParams {
            psi_floor: PSI_FLOOR,
            beam_width: BEAM_WIDTH,
            sigma_a: 2.0,
            sigma_s: 0.0,
            x_left: -0.5,
            x_right: 0.5,
            t_final: 0.8,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.psi_floor > 0.0) || !(self.beam_width > 0.0) || !(self.x_left < self.x_right) {
            return Err(Error::InvalidArgument(
                "benchmark needs psi_floor > 0, beam width > 0 and a nonempty domain".into(),
            ));
        }
        Ok(())
    }
}

/// Time-independent inflow moments on both sides.
pub struct ConstantInflow {
    pub left: MomentVector,
    pub right: MomentVector,
}

impl Forcing for ConstantInflow {
    fn inflow(&self, side: Side, _t: f64) -> Option<MomentVector> {
        Some(match side {
            Side::Left => self.left.clone(),
            Side::Right => self.right.clone(),
        })
    }
}

/// Isotropic unit mass split over the two central cells on a `psi_floor` background.
pub fn plane_source_setup(
    cells: usize,
    k: usize,
    params: &BenchmarkParams,
    basis: &MomentBasis,
    quad: &AngularQuadrature,
) -> Result<ProblemSetup> {
    params.validate()?;
    if cells == 0 || cells % 2 == 1 {
        return Err(Error::InvalidArgument(format!(
            "plane source needs an even number of cells, got {cells}"
        )));
    }
    let mesh = Mesh::new(params.x_left, params.x_right, cells)?;
    let iso = isotropic_moments(basis, quad);
    let floor = &iso * (2.0 * params.psi_floor);
    let mut initial = project_initial(|_| floor.clone(), &mesh, k)?;
    let bump = &iso * (0.5 / mesh.dx());
    for j in [cells / 2 - 1, cells / 2] {
        let mut row = initial.cell_mut(j).row_mut(0);
        row += bump.transpose();
    }
    Ok(ProblemSetup {
        mesh,
        sigma_a: params.sigma_a,
        sigma_s: params.sigma_s,
        boundary: BoundaryKind::Dirichlet,
        t_final: params.t_final,
        initial,
        forcing: Box::new(ConstantInflow {
            left: floor.clone(),
            right: floor,
        }),
    })
}

/// `psi_L(mu) = exp(-(mu - 1)^2 / (2 Sigma^2)) / Sigma`, and its mirror image.
pub fn beam_density(params: &BenchmarkParams, side: Side, mu: f64) -> f64 {
    let s = params.beam_width;
    let c = match side {
        Side::Left => 1.0,
        Side::Right => -1.0,
    };
    (-(mu - c).powi(2) / (2.0 * s * s)).exp() / s
}

pub fn two_beams_setup(
    cells: usize,
    k: usize,
    params: &BenchmarkParams,
    basis: &MomentBasis,
    quad: &AngularQuadrature,
) -> Result<ProblemSetup> {
    params.validate()?;
    let mesh = Mesh::new(params.x_left, params.x_right, cells)?;
    let floor = isotropic_moments(basis, quad) * (2.0 * params.psi_floor);
    let initial = project_initial(|_| floor.clone(), &mesh, k)?;
    let left = moments_of_density(basis, quad, |mu| beam_density(params, Side::Left, mu));
    let right = moments_of_density(basis, quad, |mu| beam_density(params, Side::Right, mu));
    Ok(ProblemSetup {
        mesh,
        sigma_a: params.sigma_a,
        sigma_s: params.sigma_s,
        boundary: BoundaryKind::Dirichlet,
        t_final: params.t_final,
        initial,
        forcing: Box::new(ConstantInflow { left, right }),
    })
}
