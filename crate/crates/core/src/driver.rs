//! Glue that runs a registry case through the NMGM solver.

use crate::cases::{Case1d, Case2d};
use crate::error::Result;
use crate::jacobian::JacobianVariant;
use crate::mesh::{Mesh1D, Mesh2D};
use crate::model::{Model1d, ShallowWater2d, State, DEFAULT_GRAVITY};
use crate::newton::{nmgm, LevelProblem, LinearSolver, NmgmResult, SolverConfig};
use crate::residual::{FvScheme1d, FvScheme2d};

/// Per-run replacements for the case's default solver settings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub alpha: Option<f64>,
    pub tau: Option<f64>,
    pub omega_sor: Option<f64>,
    pub nu_pre: Option<usize>,
    pub nu_post: Option<usize>,
    pub n_mg: Option<usize>,
    pub max_newton: Option<usize>,
    pub tol_abs: Option<f64>,
    pub tol_rel: Option<f64>,
    pub epsilon: Option<f64>,
    pub stagnation_window: Option<usize>,
    pub jacobian: Option<JacobianVariant>,
    pub linear_solver: Option<LinearSolver>,
    pub characteristic: Option<bool>,
    pub record_iterates: Option<bool>,
}

impl ConfigOverrides {
    pub fn apply(&self, config: &mut SolverConfig) {
        macro_rules! set {
            ($($f:ident),*) => {
                $(if let Some(v) = self.$f {
                    config.$f = v;
                })*
            };
        }
        set!(alpha, tau, omega_sor, nu_pre, nu_post, n_mg, max_newton, tol_abs, tol_rel, stagnation_window, jacobian, linear_solver, record_iterates);
        if self.epsilon.is_some() {
            config.epsilon = self.epsilon;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub gravity: f64,
    /// Coarsest level size per direction; `None` uses 12 in 1D and 4 in 2D.
    pub min_cells: Option<usize>,
    pub overrides: ConfigOverrides,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            gravity: DEFAULT_GRAVITY,
            min_cells: None,
            overrides: ConfigOverrides::default(),
        }
    }
}

/// Solver settings for one 1D level before overrides.
pub fn default_config_1d() -> SolverConfig {
    SolverConfig {
        jacobian: JacobianVariant::J3,
        ..SolverConfig::default_1d()
    }
}

/// Solver settings for one 2D level before overrides.
pub fn default_config_2d(nx: usize) -> SolverConfig {
    SolverConfig::default_2d(nx)
}

pub struct Problem1d<'a> {
    pub case: &'a Case1d,
    pub mesh: Mesh1D,
    pub options: RunOptions,
}

impl Problem1d<'_> {
    fn model(&self) -> Model1d {
        let mut m = self.case.model(self.options.gravity);
        if let Some(c) = self.options.overrides.characteristic {
            m.set_characteristic(c);
        }
        m
    }
}

impl LevelProblem<2> for Problem1d<'_> {
    type Mesh = Mesh1D;
    type Residual = FvScheme1d<2, Model1d>;

    fn finest_mesh(&self) -> &Mesh1D {
        &self.mesh
    }

    fn min_cells(&self) -> usize {
        self.options.min_cells.unwrap_or(12)
    }

    fn residual_for(&self, mesh: &Mesh1D) -> Result<Self::Residual> {
        FvScheme1d::new(self.model(), *mesh, self.case.boundary(), &|x| self.case.geometry(x))
    }

    fn initial_field(&self, mesh: &Mesh1D) -> Vec<State<2>> {
        self.case.initial_field(mesh)
    }

    fn config_for(&self, _mesh: &Mesh1D) -> SolverConfig {
        let mut c = default_config_1d();
        self.options.overrides.apply(&mut c);
        c
    }
}

pub struct Problem2d<'a> {
    pub case: &'a Case2d,
    pub mesh: Mesh2D,
    pub options: RunOptions,
}

impl LevelProblem<3> for Problem2d<'_> {
    type Mesh = Mesh2D;
    type Residual = FvScheme2d<3, ShallowWater2d>;

    fn finest_mesh(&self) -> &Mesh2D {
        &self.mesh
    }

    fn min_cells(&self) -> usize {
        self.options.min_cells.unwrap_or(4)
    }

    fn residual_for(&self, mesh: &Mesh2D) -> Result<Self::Residual> {
        let mut model = self.case.model(self.options.gravity);
        if let Some(c) = self.options.overrides.characteristic {
            model.characteristic = c;
        }
        FvScheme2d::new(model, *mesh, self.case.boundary, &|x, y| self.case.geometry(x, y))
    }

    fn initial_field(&self, mesh: &Mesh2D) -> Vec<State<3>> {
        self.case.initial_field(mesh)
    }

    fn config_for(&self, mesh: &Mesh2D) -> SolverConfig {
        let mut c = default_config_2d(mesh.nx);
        if let Some(w) = self.case.omega_sor {
            c.omega_sor = w;
        }
        self.options.overrides.apply(&mut c);
        c
    }
}

/// Runs NMGM for a 1D case on `n_cells` cells.
pub fn solve_1d(case: &Case1d, n_cells: usize, options: &RunOptions) -> Result<(Mesh1D, NmgmResult<2>)> {
    let mesh = case.mesh(n_cells)?;
    let problem = Problem1d {
        case,
        mesh,
        options: options.clone(),
    };
    Ok((mesh, nmgm(&problem)?))
}

/// Runs NMGM for a 2D case on an `nx × ny` grid.
pub fn solve_2d(case: &Case2d, nx: usize, ny: usize, options: &RunOptions) -> Result<(Mesh2D, NmgmResult<3>)> {
    let mesh = case.mesh(nx, ny)?;
    let problem = Problem2d {
        case,
        mesh,
        options: options.clone(),
    };
    Ok((mesh, nmgm(&problem)?))
}
