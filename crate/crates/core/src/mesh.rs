//! Uniform structured meshes and the factor-2 aggregation hierarchy.
//!
//! Cells are indexed zero-based and row-major: cell `(i, j)` of an
//! `nx × ny` grid has index `j * nx + i`. One-dimensional meshes are
//! grids with `ny = 1`, so every solver component downstream of the mesh
//! works on a single [`GridShape`].

use crate::error::{Result, SolverError};

/// Default coarsest cell count for 1D hierarchies.
pub const DEFAULT_MIN_CELLS_1D: usize = 12;
/// Default coarsest cell count per direction for 2D hierarchies.
pub const DEFAULT_MIN_CELLS_2D: usize = 4;

/// Relative cell offset `(di, dj)`; 1D stencils have `dj = 0`.
pub type Offset = (i32, i32);

/// Logical dimensions of a structured grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridShape {
    pub nx: usize,
    pub ny: usize,
}

impl GridShape {
    pub fn new(nx: usize, ny: usize) -> Self {
        Self { nx, ny }
    }

    pub fn line(n: usize) -> Self {
        Self { nx: n, ny: 1 }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn coords(&self, cell: usize) -> (usize, usize) {
        (cell % self.nx, cell / self.nx)
    }

    /// Index of `cell + offset`, or `None` when it falls outside the grid.
    #[inline]
    pub fn neighbor(&self, cell: usize, offset: Offset) -> Option<usize> {
        let (i, j) = self.coords(cell);
        let ni = i as i64 + offset.0 as i64;
        let nj = j as i64 + offset.1 as i64;
        if ni < 0 || nj < 0 || ni >= self.nx as i64 || nj >= self.ny as i64 {
            None
        } else {
            Some(self.index(ni as usize, nj as usize))
        }
    }
}

/// Uniform 1D mesh on `[x_min, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh1D {
    pub x_min: f64,
    pub x_max: f64,
    pub n_cells: usize,
    pub dx: f64,
}

impl Mesh1D {
    pub fn new(x_min: f64, x_max: f64, n_cells: usize) -> Result<Self> {
        build_uniform_1d(x_min, x_max, n_cells)
    }

    #[inline]
    pub fn center(&self, j: usize) -> f64 {
        self.x_min + (j as f64 + 0.5) * self.dx
    }

    /// Position of face `j - 1/2` (the left face of cell `j`); `j` may be
    /// negative or exceed `n_cells` for ghost faces.
    #[inline]
    pub fn face(&self, j: i64) -> f64 {
        self.x_min + j as f64 * self.dx
    }

    /// Index of the cell containing `x`; points on the upper edge map to
    /// the last cell.
    pub fn locate(&self, x: f64) -> Option<usize> {
        if !(self.x_min..=self.x_max).contains(&x) {
            return None;
        }
        let j = ((x - self.x_min) / self.dx).floor() as usize;
        Some(j.min(self.n_cells - 1))
    }
}

/// Uniform 2D mesh on `[x_min, x_max] × [y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh2D {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
}

impl Mesh2D {
    pub fn new(bounds: [f64; 4], nx: usize, ny: usize) -> Result<Self> {
        build_uniform_2d(bounds, nx, ny)
    }

    #[inline]
    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.x_min + (i as f64 + 0.5) * self.dx,
            self.y_min + (j as f64 + 0.5) * self.dy,
        )
    }

    /// Cell containing `(x, y)`; points on the upper edges map to the last
    /// row or column.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        if !(self.x_min..=self.x_max).contains(&x) || !(self.y_min..=self.y_max).contains(&y) {
            return None;
        }
        let i = ((x - self.x_min) / self.dx).floor() as usize;
        let j = ((y - self.y_min) / self.dy).floor() as usize;
        Some((i.min(self.nx - 1), j.min(self.ny - 1)))
    }
}

pub fn build_uniform_1d(x_min: f64, x_max: f64, n_cells: usize) -> Result<Mesh1D> {
    if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
        return Err(SolverError::InvalidDomain(format!(
            "need x_max > x_min, got [{x_min}, {x_max}]"
        )));
    }
    if n_cells == 0 {
        return Err(SolverError::InvalidDomain("n_cells must be at least 1".into()));
    }
    Ok(Mesh1D {
        x_min,
        x_max,
        n_cells,
        dx: (x_max - x_min) / n_cells as f64,
    })
}

/// `bounds` is `[x_min, x_max, y_min, y_max]`.
pub fn build_uniform_2d(bounds: [f64; 4], nx: usize, ny: usize) -> Result<Mesh2D> {
    let [x_min, x_max, y_min, y_max] = bounds;
    if bounds.iter().any(|v| !v.is_finite()) || x_max <= x_min || y_max <= y_min {
        return Err(SolverError::InvalidDomain(format!(
            "empty rectangle [{x_min}, {x_max}] x [{y_min}, {y_max}]"
        )));
    }
    if nx == 0 || ny == 0 {
        return Err(SolverError::InvalidDomain("nx and ny must be at least 1".into()));
    }
    Ok(Mesh2D {
        x_min,
        x_max,
        y_min,
        y_max,
        nx,
        ny,
        dx: (x_max - x_min) / nx as f64,
        dy: (y_max - y_min) / ny as f64,
    })
}

/// A mesh that can be coarsened by factor-2 aggregation.
pub trait UniformMesh: Clone + std::fmt::Debug {
    fn shape(&self) -> GridShape;
    /// Aggregation factors per direction: `(2, 1)` in 1D, `(2, 2)` in 2D.
    fn aggregation_factors(&self) -> (usize, usize);
    /// Mesh obtained by merging cells by the aggregation factors.
    fn coarsened(&self) -> Self;
    /// Cell measures (length in 1D, area in 2D), identical for every cell.
    fn cell_measure(&self) -> f64;
}

impl UniformMesh for Mesh1D {
    fn shape(&self) -> GridShape {
        GridShape::line(self.n_cells)
    }

    fn aggregation_factors(&self) -> (usize, usize) {
        (2, 1)
    }

    fn coarsened(&self) -> Self {
        let n = self.n_cells / 2;
        Mesh1D {
            n_cells: n,
            dx: (self.x_max - self.x_min) / n as f64,
            ..*self
        }
    }

    fn cell_measure(&self) -> f64 {
        self.dx
    }
}

impl UniformMesh for Mesh2D {
    fn shape(&self) -> GridShape {
        GridShape::new(self.nx, self.ny)
    }

    fn aggregation_factors(&self) -> (usize, usize) {
        (2, 2)
    }

    fn coarsened(&self) -> Self {
        let (nx, ny) = (self.nx / 2, self.ny / 2);
        Mesh2D {
            nx,
            ny,
            dx: (self.x_max - self.x_min) / nx as f64,
            dy: (self.y_max - self.y_min) / ny as f64,
            ..*self
        }
    }

    fn cell_measure(&self) -> f64 {
        self.dx * self.dy
    }
}

/// Parent/child map between a fine level and the next coarser one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Aggregation {
    pub fine: GridShape,
    pub coarse: GridShape,
    factors: (usize, usize),
    /// `children[c * arity .. (c + 1) * arity]` are the fine cells of
    /// coarse cell `c`.
    children: Vec<usize>,
    parent: Vec<usize>,
}

impl Aggregation {
    pub fn new(fine: GridShape, factors: (usize, usize)) -> Self {
        let (fx, fy) = factors;
        let coarse = GridShape::new(fine.nx / fx, fine.ny / fy);
        let arity = fx * fy;
        let mut children = Vec::with_capacity(coarse.len() * arity);
        let mut parent = vec![0; fine.len()];
        for cj in 0..coarse.ny {
            for ci in 0..coarse.nx {
                let c = coarse.index(ci, cj);
                for dj in 0..fy {
                    for di in 0..fx {
                        let f = fine.index(ci * fx + di, cj * fy + dj);
                        children.push(f);
                        parent[f] = c;
                    }
                }
            }
        }
        Self {
            fine,
            coarse,
            factors,
            children,
            parent,
        }
    }

    pub fn arity(&self) -> usize {
        self.factors.0 * self.factors.1
    }

    pub fn factors(&self) -> (usize, usize) {
        self.factors
    }

    /// Fine-level cells aggregated into coarse cell `coarse`.
    pub fn children(&self, coarse: usize) -> &[usize] {
        let a = self.arity();
        &self.children[coarse * a..(coarse + 1) * a]
    }

    pub fn parent(&self, fine: usize) -> usize {
        self.parent[fine]
    }
}

/// Finest-to-coarsest sequence of meshes.
#[derive(Debug, Clone)]
pub struct MeshHierarchy<M: UniformMesh> {
    levels: Vec<M>,
    aggregations: Vec<Aggregation>,
}

impl<M: UniformMesh> MeshHierarchy<M> {
    pub fn levels(&self) -> &[M] {
        &self.levels
    }

    pub fn level(&self, l: usize) -> &M {
        &self.levels[l]
    }

    /// Index of the coarsest level (`N_L`).
    pub fn coarsest_index(&self) -> usize {
        self.levels.len() - 1
    }

    /// Aggregation maps; entry `l` links level `l` (fine) to level `l + 1`.
    pub fn aggregations(&self) -> &[Aggregation] {
        &self.aggregations
    }

    /// Aggregation maps from level `l` down to the coarsest level.
    pub fn aggregations_from(&self, l: usize) -> &[Aggregation] {
        &self.aggregations[l..]
    }
}

/// Builds the hierarchy by halving every direction until the next halving
/// would push any direction below `min_cells`.
pub fn build_hierarchy<M: UniformMesh>(finest: &M, min_cells: usize) -> Result<MeshHierarchy<M>> {
    let shape = finest.shape();
    let (fx, fy) = finest.aggregation_factors();
    let min_cells = min_cells.max(1);
    // number of halvings that keep every coarsened direction >= min_cells
    let mut depth = 0u32;
    loop {
        let next = depth + 1;
        let ok_x = shape.nx as f64 / (fx as f64).powi(next as i32) >= min_cells as f64;
        let ok_y = fy == 1 || shape.ny as f64 / (fy as f64).powi(next as i32) >= min_cells as f64;
        if ok_x && ok_y {
            depth = next;
        } else {
            break;
        }
    }
    let px = fx.pow(depth);
    let py = fy.pow(depth);
    if !shape.nx.is_multiple_of(px) || !shape.ny.is_multiple_of(py) {
        return Err(SolverError::NonCoarsenable {
            cells: shape.len(),
            levels: depth,
        });
    }

    let mut levels = vec![finest.clone()];
    let mut aggregations = Vec::with_capacity(depth as usize);
    for _ in 0..depth {
        let fine = levels.last().unwrap();
        aggregations.push(Aggregation::new(fine.shape(), (fx, fy)));
        let coarse = fine.coarsened();
        levels.push(coarse);
    }
    Ok(MeshHierarchy {
        levels,
        aggregations,
    })
}
