//! Finite-difference block-banded Jacobians.
//!
//! Rows are cells, and each row stores one `D×D` block per stencil offset.
//! Block `(r, o)` holds `∂R_r / ∂Ū_{r+o}`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;

use crate::error::{Result, SolverError};
use crate::mesh::{GridShape, Offset};
use crate::model::{Block, State};
use crate::residual::LocalResidual;

/// Stencil of offsets whose blocks are assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JacobianVariant {
    J3,
    J5,
    /// Centre plus two cells each way along both axes. The diagonal
    /// neighbours only enter through the transverse Gauss-point traces,
    /// whose linear parts cancel in the two-point average.
    J9,
    J21,
}

impl JacobianVariant {
    pub fn pattern(self) -> StencilPattern {
        let offsets: Vec<Offset> = match self {
            JacobianVariant::J3 => (-1..=1).map(|i| (i, 0)).collect(),
            JacobianVariant::J5 => (-2..=2).map(|i| (i, 0)).collect(),
            JacobianVariant::J9 => (-2..=2).flat_map(|k| [(k, 0), (0, k)]).collect(),
            JacobianVariant::J21 => (-2..=2)
                .flat_map(|j| (-2..=2).map(move |i| (i, j)))
                .filter(|&(i, j): &Offset| i.abs() + j.abs() < 4)
                .collect(),
        };
        StencilPattern::new(offsets)
    }

    pub fn is_two_dimensional(self) -> bool {
        matches!(self, JacobianVariant::J9 | JacobianVariant::J21)
    }
}

impl fmt::Display for JacobianVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            JacobianVariant::J3 => "J3",
            JacobianVariant::J5 => "J5",
            JacobianVariant::J9 => "J9",
            JacobianVariant::J21 => "J21",
        };
        f.write_str(s)
    }
}

impl FromStr for JacobianVariant {
    type Err = SolverError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "J3" | "3" => Ok(JacobianVariant::J3),
            "J5" | "5" => Ok(JacobianVariant::J5),
            "J9" | "9" => Ok(JacobianVariant::J9),
            "J21" | "21" => Ok(JacobianVariant::J21),
            _ => Err(SolverError::InconsistentSpec(format!("unknown Jacobian pattern `{s}`"))),
        }
    }
}

/// Sorted set of offsets `(di, dj)`, always containing `(0, 0)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StencilPattern {
    offsets: Vec<Offset>,
    diagonal: usize,
}

impl StencilPattern {
    pub fn new(mut offsets: Vec<Offset>) -> Self {
        offsets.push((0, 0));
        offsets.sort_by_key(|&(i, j)| (j, i));
        offsets.dedup();
        let diagonal = offsets.iter().position(|&o| o == (0, 0)).unwrap();
        Self { offsets, diagonal }
    }

    pub fn offsets(&self) -> &[Offset] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn diagonal(&self) -> usize {
        self.diagonal
    }

    pub fn position(&self, offset: Offset) -> Option<usize> {
        self.offsets.iter().position(|&o| o == offset)
    }

    /// True when every offset lies in `{-1, 0, 1} × {0}`.
    pub fn is_tridiagonal_line(&self) -> bool {
        self.offsets.iter().all(|&(i, j)| j == 0 && i.abs() <= 1)
    }
}

/// Block-banded matrix on a [`GridShape`].
#[derive(Debug, Clone, PartialEq)]
pub struct BlockBandedMatrix<const D: usize> {
    shape: GridShape,
    pattern: StencilPattern,
    /// `blocks[row · P + k]`.
    blocks: Vec<Block<D>>,
    /// Column cell of `(row, k)`, or `usize::MAX` when out of range.
    columns: Vec<usize>,
}

impl<const D: usize> BlockBandedMatrix<D> {
    pub fn zeros(shape: GridShape, pattern: StencilPattern) -> Self {
        let p = pattern.len();
        let mut columns = vec![usize::MAX; shape.len() * p];
        for row in 0..shape.len() {
            for (k, &o) in pattern.offsets().iter().enumerate() {
                if let Some(c) = shape.neighbor(row, o) {
                    columns[row * p + k] = c;
                }
            }
        }
        Self {
            shape,
            blocks: vec![Block::<D>::zeros(); shape.len() * p],
            pattern,
            columns,
        }
    }

    /// Identity blocks on the diagonal.
    pub fn identity(shape: GridShape, pattern: StencilPattern) -> Self {
        let mut m = Self::zeros(shape, pattern);
        for row in 0..shape.len() {
            *m.diagonal_mut(row) = Block::<D>::identity();
        }
        m
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn pattern(&self) -> &StencilPattern {
        &self.pattern
    }

    pub fn rows(&self) -> usize {
        self.shape.len()
    }

    #[inline]
    pub fn block(&self, row: usize, k: usize) -> &Block<D> {
        &self.blocks[row * self.pattern.len() + k]
    }

    #[inline]
    pub fn block_mut(&mut self, row: usize, k: usize) -> &mut Block<D> {
        let p = self.pattern.len();
        &mut self.blocks[row * p + k]
    }

    /// Column cell of entry `k` of `row`, if inside the grid.
    #[inline]
    pub fn column(&self, row: usize, k: usize) -> Option<usize> {
        let c = self.columns[row * self.pattern.len() + k];
        (c != usize::MAX).then_some(c)
    }

    /// Block at `(row, offset)`, if the offset is in the pattern.
    pub fn get(&self, row: usize, offset: Offset) -> Option<&Block<D>> {
        self.pattern.position(offset).map(|k| self.block(row, k))
    }

    #[inline]
    pub fn diagonal(&self, row: usize) -> &Block<D> {
        self.block(row, self.pattern.diagonal())
    }

    #[inline]
    pub fn diagonal_mut(&mut self, row: usize) -> &mut Block<D> {
        let k = self.pattern.diagonal();
        self.block_mut(row, k)
    }

    /// `Σ_{k ≠ diag} A_{row,k} v_{col(k)}`.
    #[inline]
    pub fn off_diagonal_product(&self, row: usize, v: &[State<D>]) -> State<D> {
        let p = self.pattern.len();
        let diag = self.pattern.diagonal();
        let mut acc = State::<D>::zeros();
        for k in 0..p {
            let c = self.columns[row * p + k];
            if k != diag && c != usize::MAX {
                acc += self.blocks[row * p + k] * v[c];
            }
        }
        acc
    }

    #[inline]
    pub fn row_product(&self, row: usize, v: &[State<D>]) -> State<D> {
        self.off_diagonal_product(row, v) + self.diagonal(row) * v[row]
    }

    /// `y_j = Σ_o A[j, o] v_{j+o}`.
    pub fn matvec(&self, v: &[State<D>]) -> Result<Vec<State<D>>> {
        if v.len() != self.rows() {
            return Err(SolverError::ShapeMismatch {
                expected: self.rows(),
                found: v.len(),
            });
        }
        Ok((0..self.rows()).map(|r| self.row_product(r, v)).collect())
    }

    /// Dense `(n·D) × (n·D)` copy, for small systems.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.rows() * D;
        let mut out = DMatrix::<f64>::zeros(n, n);
        for row in 0..self.rows() {
            for k in 0..self.pattern.len() {
                if let Some(c) = self.column(row, k) {
                    let b = self.block(row, k);
                    for a in 0..D {
                        for e in 0..D {
                            out[(row * D + a, c * D + e)] += b[(a, e)];
                        }
                    }
                }
            }
        }
        out
    }

    /// Writes one line `row col b00 b01 …` per stored in-range block.
    pub fn write_triplets<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# row col block(row-major, {D}x{D})")?;
        for row in 0..self.rows() {
            for k in 0..self.pattern.len() {
                if let Some(c) = self.column(row, k) {
                    write!(out, "{row} {c}")?;
                    let b = self.block(row, k);
                    for a in 0..D {
                        for e in 0..D {
                            write!(out, " {:.16e}", b[(a, e)])?;
                        }
                    }
                    writeln!(out)?;
                }
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

/// Finite-difference settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdConfig {
    pub epsilon: f64,
}

impl FdConfig {
    pub fn new(epsilon: f64) -> Result<Self> {
        if epsilon > 0.0 && epsilon.is_finite() {
            Ok(Self { epsilon })
        } else {
            Err(SolverError::InconsistentSpec(format!("perturbation must be positive, got {epsilon}")))
        }
    }
}

/// Cost accounting of one assembly.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct JacobianStats {
    /// Perturbed `(cell, component)` pairs.
    pub perturbations: usize,
    /// Residual rows evaluated after perturbations.
    pub perturbed_row_evaluations: usize,
    /// Residual rows evaluated for the baseline.
    pub baseline_row_evaluations: usize,
    /// Largest number of rows re-evaluated for a single perturbation.
    pub max_rows_per_perturbation: usize,
    pub seconds: f64,
}

/// Assembled Jacobian together with the baseline residual it was built
/// around.
#[derive(Debug, Clone)]
pub struct FdJacobian<const D: usize> {
    pub matrix: BlockBandedMatrix<D>,
    pub residual: Vec<State<D>>,
    pub stats: JacobianStats,
}

/// One-sided finite-difference Jacobian restricted to `pattern`.
///
/// Each `(cell, component)` is perturbed by `+ε` and only rows `cell − o`
/// for offsets `o` of the pattern are re-evaluated.
pub fn fd_jacobian<const D: usize, L: LocalResidual<D>>(
    assembler: &L,
    field: &[State<D>],
    pattern: &StencilPattern,
    config: FdConfig,
) -> Result<FdJacobian<D>> {
    let start = Instant::now();
    let shape = assembler.shape();
    let mut ws = assembler.prepare(field)?;
    let baseline: Vec<State<D>> = (0..shape.len())
        .map(|c| assembler.residual_at(&ws, c))
        .collect::<Result<_>>()?;
    if baseline.iter().any(|r| !r.iter().all(|v| v.is_finite())) {
        return Err(SolverError::InconsistentSpec("baseline residual is not finite".into()));
    }
    let mut matrix = BlockBandedMatrix::<D>::zeros(shape, pattern.clone());
    let mut stats = JacobianStats {
        baseline_row_evaluations: shape.len(),
        ..JacobianStats::default()
    };
    let mut affected: Vec<(usize, usize)> = Vec::with_capacity(pattern.len());
    for cell in 0..shape.len() {
        affected.clear();
        for (k, &(di, dj)) in pattern.offsets().iter().enumerate() {
            if let Some(row) = shape.neighbor(cell, (-di, -dj)) {
                affected.push((row, k));
            }
        }
        let original = assembler.cell_value(&ws, cell);
        for m in 0..D {
            let mut perturbed = original;
            perturbed[m] += config.epsilon;
            let step = perturbed[m] - original[m];
            if step == 0.0 {
                return Err(SolverError::EpsilonTooSmall {
                    cell,
                    component: m,
                    value: original[m],
                    epsilon: config.epsilon,
                });
            }
            assembler.set_cell(&mut ws, cell, perturbed).map_err(|e| perturbation_error(e, cell, m))?;
            let mut changed = false;
            for &(row, k) in &affected {
                let r = assembler.residual_at(&ws, row).map_err(|e| perturbation_error(e, cell, m))?;
                let diff: State<D> = r - baseline[row];
                changed |= diff.iter().any(|v| *v != 0.0);
                matrix.block_mut(row, k).set_column(m, &(diff / step));
            }
            stats.perturbations += 1;
            stats.perturbed_row_evaluations += affected.len();
            stats.max_rows_per_perturbation = stats.max_rows_per_perturbation.max(affected.len());
            assembler.set_cell(&mut ws, cell, original)?;
            if !changed {
                return Err(SolverError::EpsilonTooSmall {
                    cell,
                    component: m,
                    value: original[m],
                    epsilon: config.epsilon,
                });
            }
        }
    }
    stats.seconds = start.elapsed().as_secs_f64();
    Ok(FdJacobian {
        matrix,
        residual: baseline,
        stats,
    })
}

fn perturbation_error(e: SolverError, cell: usize, component: usize) -> SolverError {
    match e {
        SolverError::NonpositiveDepth { depth, .. } => SolverError::PerturbedNonpositiveDepth { cell, component, depth },
        other => other,
    }
}

/// Adds `α ‖R_j‖₁ I` to every diagonal block.
pub fn regularize<const D: usize>(matrix: &mut BlockBandedMatrix<D>, residual: &[State<D>], alpha: f64) -> Result<()> {
    if residual.len() != matrix.rows() {
        return Err(SolverError::ShapeMismatch {
            expected: matrix.rows(),
            found: residual.len(),
        });
    }
    for (row, r) in residual.iter().enumerate() {
        let shift = alpha * r.iter().map(|v| v.abs()).sum::<f64>();
        if shift != 0.0 {
            *matrix.diagonal_mut(row) += Block::<D>::identity() * shift;
        }
    }
    Ok(())
}
