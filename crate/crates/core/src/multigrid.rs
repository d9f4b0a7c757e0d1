//! Geometric multigrid V-cycle for the regularized Newton system
//! `A δU = −R`, with Galerkin-summed coarse operators and SOR
//! fast-sweeping smoothers.

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{Result, SolverError};
use crate::jacobian::{BlockBandedMatrix, StencilPattern};
use crate::mesh::{Aggregation, GridShape, Offset};
use crate::model::{Block, State};

/// Cell visiting order of one SOR sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepOrdering {
    /// 1D increasing index.
    Forward,
    /// 1D decreasing index.
    Backward,
    /// `i` increasing (outer), `j` increasing (inner).
    D1,
    /// `i` decreasing (outer), `j` increasing (inner).
    D2,
    /// `i` decreasing (outer), `j` decreasing (inner).
    D3,
    /// `i` increasing (outer), `j` decreasing (inner).
    D4,
}

impl SweepOrdering {
    pub const ALTERNATING_2D: [SweepOrdering; 4] = [SweepOrdering::D1, SweepOrdering::D2, SweepOrdering::D3, SweepOrdering::D4];

    /// Row-major cell indices in visiting order.
    pub fn cells(self, shape: GridShape) -> Vec<usize> {
        let (nx, ny) = (shape.nx, shape.ny);
        match self {
            SweepOrdering::Forward => (0..shape.len()).collect(),
            SweepOrdering::Backward => (0..shape.len()).rev().collect(),
            _ => {
                let (i_up, j_up) = match self {
                    SweepOrdering::D1 => (true, true),
                    SweepOrdering::D2 => (false, true),
                    SweepOrdering::D3 => (false, false),
                    _ => (true, false),
                };
                let mut out = Vec::with_capacity(shape.len());
                for a in 0..nx {
                    let i = if i_up { a } else { nx - 1 - a };
                    for b in 0..ny {
                        let j = if j_up { b } else { ny - 1 - b };
                        out.push(shape.index(i, j));
                    }
                }
                out
            }
        }
    }
}

/// Smoother parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmootherConfig {
    pub omega: f64,
    pub nu_pre: usize,
    pub nu_post: usize,
}

impl SmootherConfig {
    pub fn validate(&self) -> Result<()> {
        if self.omega > 0.0 && self.omega < 2.0 {
            Ok(())
        } else {
            Err(SolverError::InconsistentSpec(format!("SOR factor must lie in (0, 2), got {}", self.omega)))
        }
    }
}

/// Offsets of the coarse operator: images of the fine offsets under
/// factor aggregation, over every child position.
pub fn coarse_pattern(fine: &StencilPattern, factors: (usize, usize)) -> StencilPattern {
    let (fx, fy) = (factors.0 as i32, factors.1 as i32);
    let mut offsets: Vec<Offset> = Vec::new();
    for &(di, dj) in fine.offsets() {
        for px in 0..fx {
            for py in 0..fy {
                offsets.push(((px + di).div_euclid(fx), (py + dj).div_euclid(fy)));
            }
        }
    }
    StencilPattern::new(offsets)
}

/// `A_c = R A Rᵀ` with the 0/1 aggregation matrix `R`.
pub fn galerkin_project<const D: usize>(fine: &BlockBandedMatrix<D>, agg: &Aggregation) -> BlockBandedMatrix<D> {
    let pattern = coarse_pattern(fine.pattern(), agg.factors());
    let coarse_shape = agg.coarse;
    let mut out = BlockBandedMatrix::zeros(coarse_shape, pattern);
    for row in 0..fine.rows() {
        let pr = agg.parent(row);
        let (ri, rj) = coarse_shape.coords(pr);
        for k in 0..fine.pattern().len() {
            if let Some(col) = fine.column(row, k) {
                let (ci, cj) = coarse_shape.coords(agg.parent(col));
                let offset = (ci as i32 - ri as i32, cj as i32 - rj as i32);
                let kc = out.pattern().position(offset).expect("coarse pattern covers all images");
                *out.block_mut(pr, kc) += fine.block(row, k);
            }
        }
    }
    out
}

/// `R_c,j = Σ_{i ∈ children(j)} (R_i + (A δU)_i)`.
pub fn restrict_residual<const D: usize>(
    residual: &[State<D>],
    matrix: &BlockBandedMatrix<D>,
    correction: &[State<D>],
    agg: &Aggregation,
) -> Result<Vec<State<D>>> {
    for len in [residual.len(), correction.len()] {
        if len != agg.fine.len() {
            return Err(SolverError::ShapeMismatch {
                expected: agg.fine.len(),
                found: len,
            });
        }
    }
    Ok((0..agg.coarse.len())
        .map(|c| {
            agg.children(c)
                .iter()
                .map(|&f| residual[f] + matrix.row_product(f, correction))
                .sum()
        })
        .collect())
}

/// `δU_i += δU_parent(i)` on every fine cell.
pub fn prolong_correction<const D: usize>(coarse: &[State<D>], fine: &mut [State<D>], agg: &Aggregation) {
    for (f, du) in fine.iter_mut().enumerate() {
        *du += coarse[agg.parent(f)];
    }
}

/// Inverse of a `D×D` block by LU with partial pivoting.
pub fn invert_block<const D: usize>(block: &Block<D>) -> Option<Block<D>> {
    let dense = DMatrix::from_column_slice(D, D, block.as_slice());
    let inv = dense.lu().try_inverse()?;
    let out = Block::<D>::from_column_slice(inv.as_slice());
    out.iter().all(|v| v.is_finite()).then_some(out)
}

/// Inverts every diagonal block.
pub fn invert_diagonal<const D: usize>(matrix: &BlockBandedMatrix<D>) -> Result<Vec<Block<D>>> {
    (0..matrix.rows())
        .map(|row| invert_block(matrix.diagonal(row)).ok_or(SolverError::SingularDiagonalBlock { cell: row }))
        .collect()
}

/// One SOR sweep over `cells`:
/// `δU_j ← (1−ω)δU_j + ω A_jj⁻¹ (rhs_j − Σ_{i≠j} A_ji δU_i)`.
pub fn sor_sweep<const D: usize>(
    matrix: &BlockBandedMatrix<D>,
    inverse_diagonal: &[Block<D>],
    rhs: &[State<D>],
    correction: &mut [State<D>],
    omega: f64,
    cells: &[usize],
) {
    for &j in cells {
        let update = inverse_diagonal[j] * (rhs[j] - matrix.off_diagonal_product(j, correction));
        correction[j] = correction[j] * (1.0 - omega) + update * omega;
    }
}

/// Direct solver for the coarsest level, factored once.
#[derive(Debug, Clone)]
pub enum CoarseSolver<const D: usize> {
    /// Block Thomas algorithm for 1D block-tridiagonal systems.
    Thomas {
        /// `A_{i,−1} D'_{i−1}⁻¹`.
        lower: Vec<Block<D>>,
        /// `A_{i,+1}`.
        upper: Vec<Block<D>>,
        /// `D'_i⁻¹`.
        pivots: Vec<Block<D>>,
    },
    Dense {
        lu: Box<LU<f64, Dyn, Dyn>>,
    },
}

impl<const D: usize> CoarseSolver<D> {
    pub fn factor(matrix: &BlockBandedMatrix<D>) -> Result<Self> {
        let shape = matrix.shape();
        if shape.ny == 1 && matrix.pattern().is_tridiagonal_line() {
            Self::thomas(matrix)
        } else {
            let dense = matrix.to_dense();
            let lu = dense.lu();
            if !lu.is_invertible() {
                return Err(SolverError::SingularMatrix);
            }
            Ok(CoarseSolver::Dense { lu: Box::new(lu) })
        }
    }

    fn thomas(matrix: &BlockBandedMatrix<D>) -> Result<Self> {
        let n = matrix.rows();
        let get = |row: usize, o: i32| matrix.get(row, (o, 0)).copied().unwrap_or_else(Block::<D>::zeros);
        let mut lower = vec![Block::<D>::zeros(); n];
        let mut upper = vec![Block::<D>::zeros(); n];
        let mut pivots = vec![Block::<D>::zeros(); n];
        for i in 0..n {
            upper[i] = if i + 1 < n { get(i, 1) } else { Block::<D>::zeros() };
            let mut d = get(i, 0);
            if i > 0 {
                lower[i] = get(i, -1) * pivots[i - 1];
                d -= lower[i] * upper[i - 1];
            }
            pivots[i] = invert_block(&d).ok_or(SolverError::SingularMatrix)?;
        }
        Ok(CoarseSolver::Thomas { lower, upper, pivots })
    }

    pub fn solve(&self, rhs: &[State<D>]) -> Result<Vec<State<D>>> {
        match self {
            CoarseSolver::Thomas { lower, upper, pivots } => {
                let n = rhs.len();
                let mut y = rhs.to_vec();
                for i in 1..n {
                    let prev = y[i - 1];
                    y[i] -= lower[i] * prev;
                }
                let mut x = vec![State::<D>::zeros(); n];
                for i in (0..n).rev() {
                    let tail = if i + 1 < n { upper[i] * x[i + 1] } else { State::<D>::zeros() };
                    x[i] = pivots[i] * (y[i] - tail);
                }
                Ok(x)
            }
            CoarseSolver::Dense { lu } => {
                let b = DVector::from_iterator(rhs.len() * D, rhs.iter().flat_map(|s| s.iter().copied()));
                let x = lu.solve(&b).ok_or(SolverError::SingularMatrix)?;
                Ok((0..rhs.len()).map(|c| State::<D>::from_fn(|a, _| x[c * D + a])).collect())
            }
        }
    }
}

/// Factors `matrix` and solves `matrix · x = rhs`.
pub fn coarsest_solve<const D: usize>(matrix: &BlockBandedMatrix<D>, rhs: &[State<D>]) -> Result<Vec<State<D>>> {
    CoarseSolver::factor(matrix)?.solve(rhs)
}

#[derive(Debug, Clone)]
struct Level<const D: usize> {
    matrix: BlockBandedMatrix<D>,
    inverse_diagonal: Vec<Block<D>>,
    orderings: Vec<(SweepOrdering, Vec<usize>)>,
}

/// Per-Newton-step cache of level matrices, diagonal inverses and the
/// coarsest factorisation.
#[derive(Debug, Clone)]
pub struct Multigrid<const D: usize> {
    levels: Vec<Level<D>>,
    aggregations: Vec<Aggregation>,
    coarse: CoarseSolver<D>,
    config: SmootherConfig,
}

fn orderings_for(shape: GridShape) -> Vec<(SweepOrdering, Vec<usize>)> {
    let kinds: &[SweepOrdering] = if shape.ny == 1 {
        &[SweepOrdering::Forward, SweepOrdering::Backward]
    } else {
        &SweepOrdering::ALTERNATING_2D
    };
    kinds.iter().map(|&k| (k, k.cells(shape))).collect()
}

impl<const D: usize> Multigrid<D> {
    /// Projects `matrix` through `aggregations` (finest first) and
    /// factors the coarsest operator.
    pub fn new(matrix: BlockBandedMatrix<D>, aggregations: &[Aggregation], config: SmootherConfig) -> Result<Self> {
        config.validate()?;
        let mut matrices = vec![matrix];
        for agg in aggregations {
            let next = galerkin_project(matrices.last().unwrap(), agg);
            matrices.push(next);
        }
        let coarse = CoarseSolver::factor(matrices.last().unwrap())?;
        let depth = matrices.len();
        let levels = matrices
            .into_iter()
            .enumerate()
            .map(|(l, m)| {
                let (inverse_diagonal, orderings) = if l + 1 < depth {
                    (invert_diagonal(&m)?, orderings_for(m.shape()))
                } else {
                    (Vec::new(), Vec::new())
                };
                Ok(Level {
                    matrix: m,
                    inverse_diagonal,
                    orderings,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            levels,
            aggregations: aggregations.to_vec(),
            coarse,
            config,
        })
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn matrix(&self, level: usize) -> &BlockBandedMatrix<D> {
        &self.levels[level].matrix
    }

    /// One smoother application: forward then backward in 1D, a single
    /// directional sweep `D(1 + k mod 4)` in 2D.
    fn smooth(&self, level: usize, rhs: &[State<D>], du: &mut [State<D>], k: usize) {
        let lv = &self.levels[level];
        let omega = self.config.omega;
        if lv.matrix.shape().ny == 1 {
            for (_, cells) in &lv.orderings {
                sor_sweep(&lv.matrix, &lv.inverse_diagonal, rhs, du, omega, cells);
            }
        } else {
            let (_, cells) = &lv.orderings[k % lv.orderings.len()];
            sor_sweep(&lv.matrix, &lv.inverse_diagonal, rhs, du, omega, cells);
        }
    }

    fn log_level(&self, level: usize, stage: &str, rhs: &[State<D>], du: &[State<D>]) {
        if log::log_enabled!(log::Level::Debug) {
            let m = &self.levels[level].matrix;
            let norm: f64 = (0..m.rows())
                .map(|r| (rhs[r] - m.row_product(r, du)).iter().map(|v| v.abs()).sum::<f64>())
                .sum();
            let ordering = self.levels[level].orderings.first().map(|o| format!("{:?}", o.0)).unwrap_or_else(|| "direct".into());
            log::debug!("mg level {level} {stage} ordering {ordering} linear residual {norm:.6e}");
        }
    }

    fn cycle(&self, level: usize, rhs: &[State<D>], du: &mut [State<D>]) -> Result<()> {
        if level + 1 == self.levels.len() {
            let x = self.coarse.solve(rhs)?;
            du.copy_from_slice(&x);
            return Ok(());
        }
        for k in 0..self.config.nu_pre {
            self.smooth(level, rhs, du, k);
        }
        self.log_level(level, "pre", rhs, du);
        let m = &self.levels[level].matrix;
        let agg = &self.aggregations[level];
        // coarse right-hand side is the child-sum of the fine defect
        let coarse_rhs: Vec<State<D>> = (0..agg.coarse.len())
            .map(|c| agg.children(c).iter().map(|&f| rhs[f] - m.row_product(f, du)).sum())
            .collect();
        let mut coarse_du = vec![State::<D>::zeros(); agg.coarse.len()];
        self.cycle(level + 1, &coarse_rhs, &mut coarse_du)?;
        prolong_correction(&coarse_du, du, agg);
        for k in 0..self.config.nu_post {
            self.smooth(level, rhs, du, k);
        }
        self.log_level(level, "post", rhs, du);
        Ok(())
    }

    /// One V-cycle on `A δU = rhs` starting from the given `δU`.
    pub fn v_cycle(&self, rhs: &[State<D>], du: &mut [State<D>]) -> Result<()> {
        let n = self.levels[0].matrix.rows();
        if rhs.len() != n || du.len() != n {
            return Err(SolverError::ShapeMismatch {
                expected: n,
                found: rhs.len().min(du.len()),
            });
        }
        self.cycle(0, rhs, du)
    }

    /// `cycles` V-cycles from `δU = 0`.
    pub fn solve(&self, rhs: &[State<D>], cycles: usize) -> Result<Vec<State<D>>> {
        let mut du = vec![State::<D>::zeros(); rhs.len()];
        for _ in 0..cycles.max(1) {
            self.v_cycle(rhs, &mut du)?;
        }
        Ok(du)
    }
}

/// Finest-level SOR fast sweeping without coarse-grid correction.
#[derive(Debug, Clone)]
pub struct SorSolver<const D: usize> {
    level: Level<D>,
    omega: f64,
}

impl<const D: usize> SorSolver<D> {
    pub fn new(matrix: BlockBandedMatrix<D>, omega: f64) -> Result<Self> {
        SmootherConfig {
            omega,
            nu_pre: 0,
            nu_post: 0,
        }
        .validate()?;
        let inverse_diagonal = invert_diagonal(&matrix)?;
        let orderings = orderings_for(matrix.shape());
        Ok(Self {
            level: Level {
                matrix,
                inverse_diagonal,
                orderings,
            },
            omega,
        })
    }

    /// `applications` smoother applications from `δU = 0`.
    pub fn solve(&self, rhs: &[State<D>], applications: usize) -> Result<Vec<State<D>>> {
        let lv = &self.level;
        if rhs.len() != lv.matrix.rows() {
            return Err(SolverError::ShapeMismatch {
                expected: lv.matrix.rows(),
                found: rhs.len(),
            });
        }
        let mut du = vec![State::<D>::zeros(); rhs.len()];
        for k in 0..applications {
            if lv.matrix.shape().ny == 1 {
                for (_, cells) in &lv.orderings {
                    sor_sweep(&lv.matrix, &lv.inverse_diagonal, rhs, &mut du, self.omega, cells);
                }
            } else {
                let (_, cells) = &lv.orderings[k % lv.orderings.len()];
                sor_sweep(&lv.matrix, &lv.inverse_diagonal, rhs, &mut du, self.omega, cells);
            }
        }
        Ok(du)
    }
}

/// Dense `(n_c·D) × (n_f·D)` 0/1 aggregation matrix, for checks on small
/// systems.
pub fn aggregation_matrix<const D: usize>(agg: &Aggregation) -> DMatrix<f64> {
    let mut r = DMatrix::zeros(agg.coarse.len() * D, agg.fine.len() * D);
    for f in 0..agg.fine.len() {
        let c = agg.parent(f);
        for a in 0..D {
            r[(c * D + a, f * D + a)] = 1.0;
        }
    }
    r
}
