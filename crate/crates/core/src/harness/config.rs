use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::basis::{BasisFamily, MomentBasis};
use crate::dg::{BoundaryKind, SemidiscreteConfig};
use crate::entropy_solver::{Entropy, SolverSettings};
use crate::problems::BenchmarkParams;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Manufactured,
    PlaneSource,
    TwoBeams,
    LimiterTest,
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "manufactured" => Ok(ProblemKind::Manufactured),
            "plane_source" => Ok(ProblemKind::PlaneSource),
            "two_beams" => Ok(ProblemKind::TwoBeams),
            "limiter_test" => Ok(ProblemKind::LimiterTest),
            _ => Err(Error::Config(format!("unknown problem {s:?}"))),
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemKind::Manufactured => "manufactured",
            ProblemKind::PlaneSource => "plane_source",
            ProblemKind::TwoBeams => "two_beams",
            ProblemKind::LimiterTest => "limiter_test",
        })
    }
}

/// Flat run configuration. Unset optional keys take the problem's defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub problem: ProblemKind,
    pub basis: BasisFamily,
    pub order: usize,
    pub n_q: usize,

    pub tau: f64,
    pub r_schedule: Vec<f64>,
    pub k_r: usize,
    pub entropy: Entropy,

    pub epsilon_limiter: f64,
    pub k: usize,
    #[serde(rename = "Q")]
    pub q: usize,
    pub sigma_a: Option<f64>,
    pub sigma_s: Option<f64>,
    pub lf_constant: f64,
    #[serde(rename = "tvb_M")]
    pub tvb_m: f64,
    pub kappa_jac: f64,
    pub characteristic_limiting: bool,
    pub slope_limiter: bool,
    pub boundary: Option<BoundaryKind>,

    #[serde(rename = "K")]
    pub k_peak: f64,
    pub gamma: f64,
    #[serde(rename = "J")]
    pub cells: usize,
    pub t_final: Option<f64>,
    pub psi_floor: Option<f64>,
}

impl Default for Config {
    fn default() -> Self {
        let s = SolverSettings::default();
        let d = SemidiscreteConfig::default();
        Config {
            problem: ProblemKind::Manufactured,
            basis: BasisFamily::Monomial,
            order: 3,
            n_q: 40,
            tau: s.tau,
            r_schedule: s.r_schedule,
            k_r: s.k_r,
            entropy: s.entropy,
            epsilon_limiter: d.epsilon_limiter,
            k: d.k,
            q: d.q,
            sigma_a: None,
            sigma_s: None,
            lf_constant: d.lf_constant,
            tvb_m: d.tvb_m,
            kappa_jac: d.kappa_jac,
            characteristic_limiting: d.characteristic,
            slope_limiter: d.slope_limiter,
            boundary: None,
            k_peak: 55.0,
            gamma: 1e-10,
            cells: 80,
            t_final: None,
            psi_floor: None,
        }
    }
}

impl Config {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: Config = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| e.at(format!("reading {}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        self.solver_settings().validate()?;
        self.semidiscrete().validate()?;
        self.moment_basis()?;
        if self.n_q < 4 || self.n_q % 2 == 1 {
            return Err(Error::Config(format!("n_q must be even and >= 4, got {}", self.n_q)));
        }
        if self.cells == 0 {
            return Err(Error::Config("J must be positive".into()));
        }
        if self.t_final.is_some_and(|t| !(t >= 0.0)) {
            return Err(Error::Config("t_final must be nonnegative".into()));
        }
        if self.problem == ProblemKind::LimiterTest && self.basis != BasisFamily::Monomial {
            return Err(Error::Config("the limiter test uses the monomial basis".into()));
        }
        if let Some(b) = self.boundary {
            if b != self.natural_boundary() {
                return Err(Error::Config(format!(
                    "problem {} needs {} boundaries",
                    self.problem,
                    self.natural_boundary()
                )));
            }
        }
        Ok(())
    }

    pub fn natural_boundary(&self) -> BoundaryKind {
        match self.problem {
            ProblemKind::Manufactured | ProblemKind::LimiterTest => BoundaryKind::Periodic,
            ProblemKind::PlaneSource | ProblemKind::TwoBeams => BoundaryKind::Dirichlet,
        }
    }

    pub fn moment_basis(&self) -> Result<MomentBasis> {
        MomentBasis::new(self.basis, self.order)
    }

    pub fn solver_settings(&self) -> SolverSettings {
        SolverSettings {
            tau: self.tau,
            r_schedule: self.r_schedule.clone(),
            k_r: self.k_r,
            entropy: self.entropy,
        }
    }

    pub fn benchmark(&self) -> Option<BenchmarkParams> {
        let mut b = match self.problem {
            ProblemKind::PlaneSource => BenchmarkParams::plane_source(),
            ProblemKind::TwoBeams => BenchmarkParams::two_beams(),
            _ => return None,
        };
        if let Some(v) = self.sigma_a {
            b.sigma_a = v;
        }
        if let Some(v) = self.sigma_s {
            b.sigma_s = v;
        }
        if let Some(v) = self.t_final {
            b.t_final = v;
        }
        if let Some(v) = self.psi_floor {
            b.psi_floor = v;
        }
        Some(b)
    }

    pub fn final_time(&self) -> f64 {
        match self.problem {
            ProblemKind::Manufactured => self.t_final.unwrap_or(PI / 5.0),
            ProblemKind::LimiterTest => 0.0,
            _ => self.benchmark().map_or(0.0, |b| b.t_final),
        }
    }

    pub fn semidiscrete(&self) -> SemidiscreteConfig {
        let (sa, ss) = match self.benchmark() {
            Some(b) => (b.sigma_a, b.sigma_s),
            None => (self.sigma_a.unwrap_or(0.0), self.sigma_s.unwrap_or(0.0)),
        };
        SemidiscreteConfig {
            k: self.k,
            q: self.q,
            sigma_a: sa,
            sigma_s: ss,
            lf_constant: self.lf_constant,
            tvb_m: self.tvb_m,
            kappa_jac: self.kappa_jac,
            epsilon_limiter: self.epsilon_limiter,
            boundary: self.natural_boundary(),
            characteristic: self.characteristic_limiting,
            slope_limiter: self.slope_limiter,
        }
    }
}
