//! Relaxed Newton iteration with multigrid linear solves, and the
//! coarse-to-fine NMGM driver that seeds each level from the one below.

use std::io::Write;
use std::time::Instant;

use crate::error::{Result, SolverError};
use crate::jacobian::{fd_jacobian, regularize, FdConfig, JacobianVariant};
use crate::mesh::{build_hierarchy, Aggregation, GridShape, UniformMesh};
use crate::model::State;
use crate::multigrid::{Multigrid, SmootherConfig, SorSolver};
use crate::residual::{residual_l1, LocalResidual};

/// Linear solver used inside each Newton step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearSolver {
    /// `N_mg` V-cycles.
    Multigrid,
    /// `N_mg · (ν₁ + ν₂)` smoother applications on the finest level only.
    SorOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub alpha: f64,
    pub tau: f64,
    pub omega_sor: f64,
    pub nu_pre: usize,
    pub nu_post: usize,
    pub n_mg: usize,
    pub max_newton: usize,
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub stagnation_window: usize,
    pub jacobian: JacobianVariant,
    /// Finite-difference perturbation; `None` applies [`epsilon_for_mesh`].
    pub epsilon: Option<f64>,
    pub linear_solver: LinearSolver,
    /// Halvings of `τ` tried when an update leaves the admissible set.
    pub max_tau_halvings: usize,
    /// Tenfold increases of `α` tried when the linear solve fails to reduce
    /// the linearized residual.
    pub max_alpha_boosts: usize,
    /// An update whose residual exceeds this multiple of the current one is
    /// rejected like an inadmissible one.
    pub max_residual_growth: f64,
    /// Keep every iterate in the history.
    pub record_iterates: bool,
}

impl SolverConfig {
    /// `(N_mg, α, ω, τ) = (2, 3, 1.0, 0.6)`, `ν₁ = ν₂ = 2`.
    pub fn default_1d() -> Self {
        Self {
            alpha: 3.0,
            tau: 0.6,
            omega_sor: 1.0,
            nu_pre: 2,
            nu_post: 2,
            n_mg: 2,
            max_newton: 500,
            tol_abs: 1e-10,
            tol_rel: 1e-7,
            stagnation_window: 50,
            jacobian: JacobianVariant::J5,
            epsilon: None,
            linear_solver: LinearSolver::Multigrid,
            max_tau_halvings: 5,
            max_alpha_boosts: 4,
            max_residual_growth: 10.0,
            record_iterates: false,
        }
    }

    /// `(N_mg, α, ω, τ) = (3, 3, 0.1, 0.6)` with sweep counts keyed to `nx`.
    pub fn default_2d(nx: usize) -> Self {
        let nu = smoothing_sweeps_2d(nx);
        Self {
            omega_sor: 0.1,
            nu_pre: nu,
            nu_post: nu,
            n_mg: 3,
            jacobian: JacobianVariant::J9,
            ..Self::default_1d()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(SolverError::InconsistentSpec(what.to_string()));
        if !(self.alpha >= 0.0) {
            return bad("alpha must be nonnegative");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if !(self.omega_sor > 0.0 && self.omega_sor < 2.0) {
            return bad("omega_sor must lie in (0, 2)");
        }
        if self.n_mg == 0 {
            return bad("n_mg must be at least 1");
        }
        if !(self.tol_abs > 0.0 && self.tol_rel > 0.0) {
            return bad("tolerances must be positive");
        }
        if let Some(e) = self.epsilon {
            FdConfig::new(e)?;
        }
        Ok(())
    }

    fn smoother(&self) -> SmootherConfig {
        SmootherConfig {
            omega: self.omega_sor,
            nu_pre: self.nu_pre,
            nu_post: self.nu_post,
        }
    }
}

/// `ν₁ = ν₂` for a 2D level with `nx` columns: 10 at 16, 15 at 32, 20 at
/// 64, never below 10.
pub fn smoothing_sweeps_2d(nx: usize) -> usize {
    let extra = 5.0 * (nx as f64 / 16.0).log2();
    (10.0 + extra.max(0.0)).round() as usize
}

/// Finite-difference perturbation for a mesh: in 1D `0.2 − 0.05·log₂(n/96)`
/// up to 768 cells and `0.05·768/n` beyond, in 2D `1e−6`. The fixed floor of
/// 0.05 swamps the residual once the cell width shrinks further.
pub fn epsilon_for_mesh(n_cells: usize, dim: usize) -> f64 {
    if dim >= 2 {
        1e-6
    } else {
        let n = n_cells as f64;
        if n <= 768.0 {
            0.2 - 0.05 * (n / 96.0).log2()
        } else {
            0.05 * 768.0 / n
        }
    }
}

/// `Ū + τ δU`.
pub fn update_state<const D: usize>(field: &[State<D>], correction: &[State<D>], tau: f64) -> Result<Vec<State<D>>> {
    if field.len() != correction.len() {
        return Err(SolverError::ShapeMismatch {
            expected: field.len(),
            found: correction.len(),
        });
    }
    Ok(field.iter().zip(correction).map(|(u, d)| u + d * tau).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Converged,
    /// No 1% improvement of the best residual within the stagnation window.
    Stalled,
    MaxIterations,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Converged => "converged",
            Outcome::Stalled => "stalled",
            Outcome::MaxIterations => "max-iterations",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry {
    pub step: usize,
    pub residual_l1: f64,
    pub wall_seconds: f64,
    pub jacobian_seconds: f64,
}

/// Per-step residuals and timings; step 0 is the initial field.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceHistory {
    pub entries: Vec<HistoryEntry>,
    /// Iterates matching `entries`, when requested.
    pub iterates: Vec<Vec<f64>>,
}

impl ConvergenceHistory {
    pub fn steps(&self) -> usize {
        self.entries.last().map_or(0, |e| e.step)
    }

    pub fn initial_residual(&self) -> f64 {
        self.entries.first().map_or(0.0, |e| e.residual_l1)
    }

    pub fn final_residual(&self) -> f64 {
        self.entries.last().map_or(0.0, |e| e.residual_l1)
    }

    pub fn jacobian_seconds(&self) -> f64 {
        self.entries.iter().map(|e| e.jacobian_seconds).sum()
    }

    pub fn wall_seconds(&self) -> f64 {
        self.entries.last().map_or(0.0, |e| e.wall_seconds)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "step,residual_l1,wall_seconds,jacobian_seconds")?;
        for e in &self.entries {
            writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e}",
                e.step, e.residual_l1, e.wall_seconds, e.jacobian_seconds
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct NewtonResult<const D: usize> {
    /// Final field when converged, otherwise the best iterate seen.
    pub field: Vec<State<D>>,
    pub history: ConvergenceHistory,
    pub outcome: Outcome,
}

impl<const D: usize> NewtonResult<D> {
    pub fn steps(&self) -> usize {
        self.history.steps()
    }
}

fn flatten<const D: usize>(field: &[State<D>]) -> Vec<f64> {
    field.iter().flat_map(|s| s.iter().copied()).collect()
}

/// Unflattens a stored iterate.
pub fn unflatten<const D: usize>(values: &[f64]) -> Vec<State<D>> {
    values.chunks(D).map(State::<D>::from_column_slice).collect()
}

fn is_depth_error(e: &SolverError) -> bool {
    matches!(
        e,
        SolverError::NonpositiveDepth { .. } | SolverError::SingularEigenbasis { .. } | SolverError::DegenerateSpeeds { .. }
    )
}

/// Relaxed Newton iteration on `residual(Ū) = 0`.
///
/// `aggregations` link the residual's grid to the coarser multigrid
/// levels (finest first) and may be empty.
pub fn newton_solve<const D: usize, L: LocalResidual<D>>(
    residual: &L,
    aggregations: &[Aggregation],
    field0: &[State<D>],
    config: &SolverConfig,
) -> Result<NewtonResult<D>> {
    config.validate()?;
    let start = Instant::now();
    let shape = residual.shape();
    if field0.len() != shape.len() {
        return Err(SolverError::ShapeMismatch {
            expected: shape.len(),
            found: field0.len(),
        });
    }
    residual.check_admissible(field0)?;
    let dim = if shape.ny == 1 { 1 } else { 2 };
    let fd = FdConfig::new(config.epsilon.unwrap_or_else(|| epsilon_for_mesh(shape.len(), dim)))?;
    let pattern = config.jacobian.pattern();

    let mut field = field0.to_vec();
    let mut r = residual.residual(&field)?;
    let mut r_norm = residual_l1(&r);
    let r0 = r_norm;
    let mut history = ConvergenceHistory::default();
    history.entries.push(HistoryEntry {
        step: 0,
        residual_l1: r_norm,
        wall_seconds: start.elapsed().as_secs_f64(),
        jacobian_seconds: 0.0,
    });
    if config.record_iterates {
        history.iterates.push(flatten(&field));
    }

    let mut best_field = field.clone();
    let mut best_norm = r_norm;
    // reference for the stagnation test: last residual that improved by 1%
    let mut progress_norm = r_norm;
    let mut progress_step = 0;
    let converged = |n: f64| n < config.tol_abs || n < config.tol_rel * r0;

    let mut step = 0;
    let outcome = loop {
        if converged(r_norm) {
            break Outcome::Converged;
        }
        if step >= config.max_newton {
            break Outcome::MaxIterations;
        }
        if step - progress_step >= config.stagnation_window {
            break Outcome::Stalled;
        }
        step += 1;

        let jac = match fd_jacobian(residual, &field, &pattern, fd) {
            Ok(j) => j,
            Err(e @ SolverError::PerturbedNonpositiveDepth { .. }) => {
                log::warn!("step {step}: Jacobian perturbation left the admissible set ({e}), stopping");
                break Outcome::Stalled;
            }
            Err(e) => return Err(e),
        };
        let jacobian_seconds = jac.stats.seconds;
        let rhs: Vec<State<D>> = r.iter().map(|v| -v).collect();
        let mut alpha = config.alpha;
        let mut attempt = 0;
        let du = loop {
            let mut matrix = jac.matrix.clone();
            regularize(&mut matrix, &r, alpha)?;
            let check = matrix.clone();
            let du = match config.linear_solver {
                LinearSolver::Multigrid => Multigrid::new(matrix, aggregations, config.smoother())?.solve(&rhs, config.n_mg)?,
                LinearSolver::SorOnly => {
                    SorSolver::new(matrix, config.omega_sor)?.solve(&rhs, config.n_mg * (config.nu_pre + config.nu_post))?
                }
            };
            let lin: f64 = check.matvec(&du)?.iter().zip(&r).map(|(a, b)| (a + b).abs().sum()).sum();
            log::trace!("step {step}: linear residual ratio {:.3e}", lin / r_norm);
            if lin < r_norm || attempt >= config.max_alpha_boosts {
                break du;
            }
            // the inner solve diverged: damp the system and retry
            attempt += 1;
            alpha *= 10.0;
            log::debug!("step {step}: linear residual {lin:.3e} above {r_norm:.3e}, alpha raised to {alpha}");
        };

        let mut tau = config.tau;
        let mut accepted = None;
        let mut last_err = None;
        for _ in 0..=config.max_tau_halvings {
            let candidate = update_state(&field, &du, tau)?;
            let attempt = residual.check_admissible(&candidate).and_then(|_| residual.residual(&candidate));
            match attempt {
                Ok(res) if residual_l1(&res) <= config.max_residual_growth * r_norm => {
                    accepted = Some((candidate, res));
                    break;
                }
                Ok(res) => {
                    let grown = residual_l1(&res);
                    log::debug!("step {step}: residual would grow to {grown:.3e}, halving tau to {}", tau / 2.0);
                    last_err = Some(format!("residual grew to {grown:.3e}"));
                    tau *= 0.5;
                }
                Err(e) if is_depth_error(&e) => {
                    log::debug!("step {step}: update rejected ({e}), halving tau to {}", tau / 2.0);
                    last_err = Some(e.to_string());
                    tau *= 0.5;
                }
                Err(e) => return Err(e),
            }
        }
        let (next, res) = match accepted {
            Some(v) => v,
            None => {
                // every relaxed update left the admissible set
                log::warn!("step {step}: no admissible update ({}), stopping", last_err.expect("at least one attempt"));
                break Outcome::Stalled;
            }
        };
        field = next;
        r = res;
        r_norm = residual_l1(&r);
        log::debug!("newton step {step} residual {r_norm:.6e} tau {tau}");
        history.entries.push(HistoryEntry {
            step,
            residual_l1: r_norm,
            wall_seconds: start.elapsed().as_secs_f64(),
            jacobian_seconds,
        });
        if config.record_iterates {
            history.iterates.push(flatten(&field));
        }
        if !r_norm.is_finite() {
            break Outcome::MaxIterations;
        }
        if r_norm < best_norm {
            best_norm = r_norm;
            best_field.clone_from(&field);
        }
        if r_norm < 0.99 * progress_norm {
            progress_norm = r_norm;
            progress_step = step;
        }
    };

    let field = if outcome == Outcome::Converged { field } else { best_field };
    Ok(NewtonResult { field, history, outcome })
}

/// Cell averages on the fine grid from the quadratic reconstruction of
/// each coarse cell. Coarse cells on the boundary inject their average.
pub fn prolong_solution_1d<const D: usize>(coarse: &[State<D>]) -> Vec<State<D>> {
    let n = coarse.len();
    let mut fine = Vec::with_capacity(2 * n);
    for j in 0..n {
        let u = coarse[j];
        if j == 0 || j + 1 == n {
            fine.push(u);
            fine.push(u);
            continue;
        }
        // child means of ξ are ∓¼ and the (ξ² − 1/12) term averages to zero
        let slope = (coarse[j + 1] - coarse[j - 1]) * 0.125;
        fine.push(u - slope);
        fine.push(u + slope);
    }
    fine
}

/// Biquadratic counterpart of [`prolong_solution_1d`] on a row-major grid.
pub fn prolong_solution_2d<const D: usize>(shape: GridShape, coarse: &[State<D>]) -> Vec<State<D>> {
    let (nx, ny) = (shape.nx, shape.ny);
    let fine_shape = GridShape::new(2 * nx, 2 * ny);
    let mut fine = vec![State::<D>::zeros(); fine_shape.len()];
    let at = |i: usize, j: usize| coarse[shape.index(i, j)];
    for j in 0..ny {
        for i in 0..nx {
            let boundary = i == 0 || j == 0 || i + 1 == nx || j + 1 == ny;
            for (dj, sy) in [(0usize, -1.0), (1, 1.0)] {
                for (di, sx) in [(0usize, -1.0), (1, 1.0)] {
                    let value = if boundary {
                        at(i, j)
                    } else {
                        let row = |jj: usize| at(i, jj) + (at(i + 1, jj) - at(i - 1, jj)) * (0.125 * sx);
                        let (p1, p2, p3) = (row(j - 1), row(j), row(j + 1));
                        p2 + (p3 - p1) * (0.125 * sy)
                    };
                    fine[fine_shape.index(2 * i + di, 2 * j + dj)] = value;
                }
            }
        }
    }
    fine
}

/// Dispatches on the grid dimension.
pub fn prolong_solution<const D: usize>(shape: GridShape, coarse: &[State<D>]) -> Vec<State<D>> {
    if shape.ny == 1 {
        prolong_solution_1d(coarse)
    } else {
        prolong_solution_2d(shape, coarse)
    }
}

/// Everything the NMGM driver needs to set up one mesh level.
pub trait LevelProblem<const D: usize> {
    type Mesh: UniformMesh;
    type Residual: LocalResidual<D>;

    fn finest_mesh(&self) -> &Self::Mesh;
    fn min_cells(&self) -> usize;
    fn residual_for(&self, mesh: &Self::Mesh) -> Result<Self::Residual>;
    /// Cell averages of the initial condition.
    fn initial_field(&self, mesh: &Self::Mesh) -> Vec<State<D>>;
    fn config_for(&self, mesh: &Self::Mesh) -> SolverConfig;
}

#[derive(Debug, Clone)]
pub struct LevelReport<const D: usize> {
    pub level: usize,
    pub shape: GridShape,
    pub result: NewtonResult<D>,
}

#[derive(Debug, Clone)]
pub struct NmgmResult<const D: usize> {
    /// Coarsest level first.
    pub levels: Vec<LevelReport<D>>,
}

impl<const D: usize> NmgmResult<D> {
    pub fn finest(&self) -> &LevelReport<D> {
        self.levels.last().expect("at least one level")
    }

    pub fn field(&self) -> &[State<D>] {
        &self.finest().result.field
    }

    /// Newton steps summed over every level.
    pub fn total_steps(&self) -> usize {
        self.levels.iter().map(|l| l.result.steps()).sum()
    }

    pub fn wall_seconds(&self) -> f64 {
        self.levels.iter().map(|l| l.result.history.wall_seconds()).sum()
    }

    pub fn jacobian_seconds(&self) -> f64 {
        self.levels.iter().map(|l| l.result.history.jacobian_seconds()).sum()
    }
}

/// Solve on the coarsest mesh from the initial condition, then prolong
/// and re-solve level by level up to the finest mesh. A level that hits
/// the iteration cap aborts; a stalled level hands on its best field.
pub fn nmgm<const D: usize, P: LevelProblem<D>>(problem: &P) -> Result<NmgmResult<D>> {
    let hierarchy = build_hierarchy(problem.finest_mesh(), problem.min_cells())?;
    let coarsest = hierarchy.coarsest_index();
    let mut levels: Vec<LevelReport<D>> = Vec::with_capacity(coarsest + 1);
    for l in (0..=coarsest).rev() {
        let mesh = hierarchy.level(l);
        let residual = problem.residual_for(mesh)?;
        let field0 = match levels.last() {
            None => problem.initial_field(mesh),
            Some(prev) => prolong_solution(prev.shape, &prev.result.field),
        };
        let config = problem.config_for(mesh);
        let result = newton_solve(&residual, hierarchy.aggregations_from(l), &field0, &config)?;
        log::info!(
            "level {l} ({} cells): {} after {} steps, residual {:.3e}",
            mesh.shape().len(),
            result.outcome.as_str(),
            result.steps(),
            result.history.final_residual()
        );
        if result.outcome == Outcome::MaxIterations {
            return Err(SolverError::LevelNotConverged {
                level: l,
                steps: result.steps(),
                residual: result.history.final_residual(),
            });
        }
        levels.push(LevelReport {
            level: l,
            shape: mesh.shape(),
            result,
        });
    }
    Ok(NmgmResult { levels })
}
