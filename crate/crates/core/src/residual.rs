//! Boundary ghost cells and the steady-state finite-volume residual.
//!
//! Residuals are evaluated row by row through [`LocalResidual`], so the
//! finite-difference Jacobian can re-evaluate only the rows a perturbation
//! reaches. Two ghost layers surround every field.

use crate::error::{Result, SolverError};
use crate::mesh::{GridShape, Mesh1D, Mesh2D};
use crate::model::{numerical_flux, Axis, Block, Geometry, Model, State};
use crate::reconstruction::{
    quartic_at_gauss_nodes, source_integral_1d, weno3_gauss_state, weno3_minus_state, weno3_plus_state,
    InterfaceStates, GAUSS2,
};

/// Number of ghost layers on every side.
pub const GHOSTS: usize = 2;

/// Cell-average field on a [`GridShape`], stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField<const D: usize> {
    pub shape: GridShape,
    pub values: Vec<State<D>>,
}

impl<const D: usize> CellField<D> {
    pub fn new(shape: GridShape, values: Vec<State<D>>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(SolverError::ShapeMismatch {
                expected: shape.len(),
                found: values.len(),
            });
        }
        Ok(Self { shape, values })
    }

    pub fn zeros(shape: GridShape) -> Self {
        Self {
            shape,
            values: vec![State::<D>::zeros(); shape.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Residual field, one row per cell.
pub type ResidualField<const D: usize> = CellField<D>;

/// Boundary treatment on one side of the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryCondition<const D: usize> {
    /// Ghosts hold the given state.
    FixedState(State<D>),
    /// Normal momentum (discharge) is imposed, the rest is extrapolated.
    FixedDischarge(f64),
    /// Depth is imposed, momentum extrapolated. When the adjacent cell
    /// is a supercritical outflow no condition can be imposed and the
    /// ghosts extrapolate.
    FixedDepth(f64),
    ZeroGradient,
    /// Mirror image with the normal momentum negated.
    ReflectiveWall,
    /// Full state prescribed at a supercritical inflow.
    SupercriticalInflow(State<D>),
}

impl<const D: usize> BoundaryCondition<D> {
    fn validate(&self, side: &str) -> Result<()> {
        let finite_state = |s: &State<D>| s.iter().all(|v| v.is_finite());
        let ok = match self {
            BoundaryCondition::FixedState(s) | BoundaryCondition::SupercriticalInflow(s) => finite_state(s) && s[0] > 0.0,
            BoundaryCondition::FixedDischarge(q) => q.is_finite(),
            BoundaryCondition::FixedDepth(h) => h.is_finite() && *h > 0.0,
            BoundaryCondition::ZeroGradient | BoundaryCondition::ReflectiveWall => true,
        };
        if ok {
            Ok(())
        } else {
            Err(SolverError::InconsistentSpec(format!("{side} boundary: {self:?}")))
        }
    }
}

/// Which end of an axis a boundary sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum End {
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySpec1d<const D: usize> {
    pub left: BoundaryCondition<D>,
    pub right: BoundaryCondition<D>,
}

impl<const D: usize> BoundarySpec1d<D> {
    pub fn validate(&self) -> Result<()> {
        self.left.validate("left")?;
        self.right.validate("right")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySpec2d<const D: usize> {
    pub west: BoundaryCondition<D>,
    pub east: BoundaryCondition<D>,
    pub south: BoundaryCondition<D>,
    pub north: BoundaryCondition<D>,
}

impl<const D: usize> BoundarySpec2d<D> {
    pub fn validate(&self) -> Result<()> {
        self.west.validate("west")?;
        self.east.validate("east")?;
        self.south.validate("south")?;
        self.north.validate("north")
    }
}

/// Ghost states `[adjacent, outer]` for one side, from the two nearest
/// interior cells `[adjacent, next]`.
fn ghost_pair<const D: usize, M: Model<D> + ?Sized>(
    model: &M,
    bc: &BoundaryCondition<D>,
    inner: [&State<D>; 2],
    geom: &Geometry,
    axis: Axis,
    end: End,
) -> Result<[State<D>; 2]> {
    let n = model.momentum_index(axis);
    Ok(match bc {
        BoundaryCondition::FixedState(s) | BoundaryCondition::SupercriticalInflow(s) => [*s, *s],
        BoundaryCondition::FixedDischarge(q) => {
            let mut g = *inner[0];
            g[n] = *q;
            [g, g]
        }
        BoundaryCondition::FixedDepth(h) => {
            let (l_min, l_max) = model.wave_speeds(inner[0], geom, axis)?;
            let supercritical_out = match end {
                End::High => l_min > 0.0,
                End::Low => l_max < 0.0,
            };
            let mut g = *inner[0];
            if !supercritical_out {
                g[0] = h * geom.sigma;
            }
            [g, g]
        }
        BoundaryCondition::ZeroGradient => [*inner[0], *inner[0]],
        BoundaryCondition::ReflectiveWall => {
            let mirror = |s: &State<D>| {
                let mut m = *s;
                m[n] = -m[n];
                m
            };
            [mirror(inner[0]), mirror(inner[1])]
        }
    })
}

/// A residual that can be evaluated one cell at a time on a prepared
/// workspace, and updated in place one cell at a time.
pub trait LocalResidual<const D: usize>: Sync {
    type Workspace: Clone + Send;

    fn shape(&self) -> GridShape;

    /// Copies the field into a ghosted workspace and fills the ghosts.
    fn prepare(&self, field: &[State<D>]) -> Result<Self::Workspace>;

    fn cell_value(&self, ws: &Self::Workspace, cell: usize) -> State<D>;

    /// Overwrites one cell, refreshing ghosts that depend on it.
    fn set_cell(&self, ws: &mut Self::Workspace, cell: usize, value: State<D>) -> Result<()>;

    /// Residual row of `cell`.
    fn residual_at(&self, ws: &Self::Workspace, cell: usize) -> Result<State<D>>;

    /// Checks that a field is physically admissible (positive depth).
    fn check_admissible(&self, _field: &[State<D>]) -> Result<()> {
        Ok(())
    }

    /// Full residual.
    fn residual(&self, field: &[State<D>]) -> Result<Vec<State<D>>> {
        let ws = self.prepare(field)?;
        (0..self.shape().len()).map(|c| self.residual_at(&ws, c)).collect()
    }
}

/// `Σ_j ‖R_j‖₁`.
pub fn residual_l1<const D: usize>(residual: &[State<D>]) -> f64 {
    residual.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).sum()
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(SolverError::ShapeMismatch { expected, found })
    }
}

fn check_depths<const D: usize, M: Model<D> + ?Sized>(model: &M, field: &[State<D>], geoms: &[Geometry]) -> Result<()> {
    for (c, (u, g)) in field.iter().zip(geoms).enumerate() {
        let h = model.depth(u, g);
        if !(h > 0.0) || !u.iter().all(|v| v.is_finite()) {
            return Err(SolverError::NonpositiveDepth { cell: Some(c), depth: h });
        }
    }
    Ok(())
}

/// One-dimensional scheme: WENO3 traces, two-state flux, quartic source
/// quadrature.
#[derive(Debug, Clone)]
pub struct FvScheme1d<const D: usize, M: Model<D>> {
    pub model: M,
    pub mesh: Mesh1D,
    pub boundary: BoundarySpec1d<D>,
    /// Geometry at faces `−1..=n+1`, stored with offset 1.
    face_geometry: Vec<Geometry>,
    gauss_geometry: Vec<[Geometry; 2]>,
    center_geometry: Vec<Geometry>,
    boundary_geometry: [Geometry; 2],
}

impl<const D: usize, M: Model<D>> FvScheme1d<D, M> {
    pub fn new(model: M, mesh: Mesh1D, boundary: BoundarySpec1d<D>, geometry: &dyn Fn(f64) -> Geometry) -> Result<Self> {
        boundary.validate()?;
        let n = mesh.n_cells as i64;
        let face_geometry = (-1..=n + 1).map(|f| geometry(mesh.face(f))).collect();
        let gauss_geometry = (0..mesh.n_cells)
            .map(|j| {
                let xc = mesh.center(j);
                [geometry(xc + GAUSS2.nodes[0] * mesh.dx), geometry(xc + GAUSS2.nodes[1] * mesh.dx)]
            })
            .collect();
        let center_geometry = (0..mesh.n_cells).map(|j| geometry(mesh.center(j))).collect();
        let boundary_geometry = [geometry(mesh.x_min), geometry(mesh.x_max)];
        Ok(Self {
            model,
            mesh,
            boundary,
            face_geometry,
            gauss_geometry,
            center_geometry,
            boundary_geometry,
        })
    }

    fn n(&self) -> usize {
        self.mesh.n_cells
    }

    #[inline]
    fn face_geom(&self, f: i64) -> &Geometry {
        &self.face_geometry[(f + 1) as usize]
    }

    #[inline]
    fn at(ws: &[State<D>], k: i64) -> &State<D> {
        &ws[(k + GHOSTS as i64) as usize]
    }

    /// Writes both ghost layers on each side of a ghosted workspace.
    pub fn fill_ghosts(&self, ws: &mut [State<D>]) -> Result<()> {
        let n = self.n();
        check_len(n + 2 * GHOSTS, ws.len())?;
        let left = ghost_pair(
            &self.model,
            &self.boundary.left,
            [&ws[2], &ws[(3).min(n + 1)]],
            &self.boundary_geometry[0],
            Axis::X,
            End::Low,
        )?;
        let right = ghost_pair(
            &self.model,
            &self.boundary.right,
            [&ws[n + 1], &ws[n.max(2)]],
            &self.boundary_geometry[1],
            Axis::X,
            End::High,
        )?;
        ws[1] = left[0];
        ws[0] = left[1];
        ws[n + 2] = right[0];
        ws[n + 3] = right[1];
        Ok(())
    }

    /// Both one-sided traces at face `f` (between cells `f − 1` and `f`).
    fn face_states(&self, ws: &[State<D>], f: i64) -> Result<(State<D>, State<D>)> {
        let s = [Self::at(ws, f - 2), Self::at(ws, f - 1), Self::at(ws, f), Self::at(ws, f + 1)];
        if self.model.characteristic() {
            let reference = (s[1] + s[2]) * 0.5;
            let (l, r) = self.model.eigenbasis(&reference, self.face_geom(f), Axis::X)?;
            let w = [l * s[0], l * s[1], l * s[2], l * s[3]];
            Ok((
                r * weno3_minus_state(&w[0], &w[1], &w[2]),
                r * weno3_plus_state(&w[1], &w[2], &w[3]),
            ))
        } else {
            Ok((weno3_minus_state(s[0], s[1], s[2]), weno3_plus_state(s[1], s[2], s[3])))
        }
    }

    fn basis(&self, ws: &[State<D>], f: i64) -> Result<Option<(Block<D>, Block<D>)>> {
        if !self.model.characteristic() {
            return Ok(None);
        }
        let reference = (Self::at(ws, f - 1) + Self::at(ws, f)) * 0.5;
        Ok(Some(self.model.eigenbasis(&reference, self.face_geom(f), Axis::X)?))
    }

    /// Left-limit trace at face `f`, reconstructed in cell `f − 1`.
    fn trace_minus(&self, ws: &[State<D>], f: i64) -> Result<State<D>> {
        let s = [Self::at(ws, f - 2), Self::at(ws, f - 1), Self::at(ws, f)];
        Ok(match self.basis(ws, f)? {
            Some((l, r)) => r * weno3_minus_state(&(l * s[0]), &(l * s[1]), &(l * s[2])),
            None => weno3_minus_state(s[0], s[1], s[2]),
        })
    }

    /// Right-limit trace at face `f`, reconstructed in cell `f`.
    fn trace_plus(&self, ws: &[State<D>], f: i64) -> Result<State<D>> {
        let s = [Self::at(ws, f - 1), Self::at(ws, f), Self::at(ws, f + 1)];
        Ok(match self.basis(ws, f)? {
            Some((l, r)) => r * weno3_plus_state(&(l * s[0]), &(l * s[1]), &(l * s[2])),
            None => weno3_plus_state(s[0], s[1], s[2]),
        })
    }

    /// One-sided states at every face `0..=n`.
    pub fn interface_states(&self, field: &[State<D>]) -> Result<InterfaceStates<D>> {
        let ws = self.prepare(field)?;
        let mut minus = Vec::with_capacity(self.n() + 1);
        let mut plus = Vec::with_capacity(self.n() + 1);
        for f in 0..=self.n() as i64 {
            let (m, p) = self.face_states(&ws, f)?;
            minus.push(m);
            plus.push(p);
        }
        Ok(InterfaceStates { minus, plus })
    }

    /// Numerical flux at every face `0..=n`.
    pub fn face_fluxes(&self, field: &[State<D>]) -> Result<Vec<State<D>>> {
        let states = self.interface_states(field)?;
        (0..=self.n())
            .map(|f| {
                numerical_flux(&self.model, &states.minus[f], &states.plus[f], self.face_geom(f as i64), Axis::X)
            })
            .collect()
    }
}

impl<const D: usize, M: Model<D>> LocalResidual<D> for FvScheme1d<D, M> {
    type Workspace = Vec<State<D>>;

    fn shape(&self) -> GridShape {
        GridShape::line(self.n())
    }

    fn prepare(&self, field: &[State<D>]) -> Result<Self::Workspace> {
        check_len(self.n(), field.len())?;
        let mut ws = vec![State::<D>::zeros(); self.n() + 2 * GHOSTS];
        ws[GHOSTS..GHOSTS + self.n()].copy_from_slice(field);
        self.fill_ghosts(&mut ws)?;
        Ok(ws)
    }

    fn cell_value(&self, ws: &Self::Workspace, cell: usize) -> State<D> {
        ws[cell + GHOSTS]
    }

    fn set_cell(&self, ws: &mut Self::Workspace, cell: usize, value: State<D>) -> Result<()> {
        ws[cell + GHOSTS] = value;
        if cell < GHOSTS || cell + GHOSTS >= self.n() {
            self.fill_ghosts(ws)?;
        }
        Ok(())
    }

    fn residual_at(&self, ws: &Self::Workspace, cell: usize) -> Result<State<D>> {
        let j = cell as i64;
        let eval = || -> Result<State<D>> {
            let (minus_l, plus_l) = self.face_states(ws, j)?;
            let (minus_r, plus_r) = self.face_states(ws, j + 1)?;
            let flux_l = numerical_flux(&self.model, &minus_l, &plus_l, self.face_geom(j), Axis::X)?;
            let flux_r = numerical_flux(&self.model, &minus_r, &plus_r, self.face_geom(j + 1), Axis::X)?;
            let far_l = self.trace_plus(ws, j - 1)?;
            let far_r = self.trace_minus(ws, j + 2)?;
            let source = source_integral_1d(
                &self.model,
                self.mesh.dx,
                [&far_l, &plus_l, &minus_r, &far_r],
                Self::at(ws, j),
                &self.gauss_geometry[cell],
            )?;
            Ok(flux_r - flux_l - source)
        };
        eval().map_err(|e| e.at_cell(cell))
    }

    fn check_admissible(&self, field: &[State<D>]) -> Result<()> {
        check_depths(&self.model, field, &self.center_geometry)
    }
}

/// Two-dimensional scheme: dimension-by-dimension WENO3 at two Gauss
/// points per face, tensor Gauss quadrature of the source.
#[derive(Debug, Clone)]
pub struct FvScheme2d<const D: usize, M: Model<D>> {
    pub model: M,
    pub mesh: Mesh2D,
    pub boundary: BoundarySpec2d<D>,
    /// `[f·ny + j][β]` for x-faces `f ∈ 0..=nx`.
    x_face_geometry: Vec<[Geometry; 2]>,
    /// `[f·nx + i][α]` for y-faces `f ∈ 0..=ny`.
    y_face_geometry: Vec<[Geometry; 2]>,
    /// `[cell][2β + α]`.
    gauss_geometry: Vec<[Geometry; 4]>,
    center_geometry: Vec<Geometry>,
}

impl<const D: usize, M: Model<D>> FvScheme2d<D, M> {
    pub fn new(
        model: M,
        mesh: Mesh2D,
        boundary: BoundarySpec2d<D>,
        geometry: &dyn Fn(f64, f64) -> Geometry,
    ) -> Result<Self> {
        boundary.validate()?;
        let (nx, ny, dx, dy) = (mesh.nx, mesh.ny, mesh.dx, mesh.dy);
        let xg = |i: usize, a: usize| mesh.x_min + (i as f64 + 0.5 + GAUSS2.nodes[a]) * dx;
        let yg = |j: usize, b: usize| mesh.y_min + (j as f64 + 0.5 + GAUSS2.nodes[b]) * dy;
        let mut x_face_geometry = Vec::with_capacity((nx + 1) * ny);
        for f in 0..=nx {
            let x = mesh.x_min + f as f64 * dx;
            for j in 0..ny {
                x_face_geometry.push([geometry(x, yg(j, 0)), geometry(x, yg(j, 1))]);
            }
        }
        let mut y_face_geometry = Vec::with_capacity((ny + 1) * nx);
        for f in 0..=ny {
            let y = mesh.y_min + f as f64 * dy;
            for i in 0..nx {
                y_face_geometry.push([geometry(xg(i, 0), y), geometry(xg(i, 1), y)]);
            }
        }
        let mut gauss_geometry = Vec::with_capacity(nx * ny);
        let mut center_geometry = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                gauss_geometry.push([
                    geometry(xg(i, 0), yg(j, 0)),
                    geometry(xg(i, 1), yg(j, 0)),
                    geometry(xg(i, 0), yg(j, 1)),
                    geometry(xg(i, 1), yg(j, 1)),
                ]);
                let (xc, yc) = mesh.center(i, j);
                center_geometry.push(geometry(xc, yc));
            }
        }
        Ok(Self {
            model,
            mesh,
            boundary,
            x_face_geometry,
            y_face_geometry,
            gauss_geometry,
            center_geometry,
        })
    }

    fn stride(&self) -> usize {
        self.mesh.nx + 2 * GHOSTS
    }

    #[inline]
    fn slot(&self, i: i64, j: i64) -> usize {
        (i + GHOSTS as i64) as usize + (j + GHOSTS as i64) as usize * self.stride()
    }

    #[inline]
    fn at<'a>(&self, ws: &'a [State<D>], i: i64, j: i64) -> &'a State<D> {
        &ws[self.slot(i, j)]
    }

    /// Fills the y-ghost rows of interior columns, then the x-ghost
    /// columns of every row including the corners.
    pub fn fill_ghosts(&self, ws: &mut [State<D>]) -> Result<()> {
        let (nx, ny) = (self.mesh.nx as i64, self.mesh.ny as i64);
        check_len(self.stride() * (self.mesh.ny + 2 * GHOSTS), ws.len())?;
        let flat = Geometry::flat();
        for i in 0..nx {
            let south = ghost_pair(
                &self.model,
                &self.boundary.south,
                [self.at(ws, i, 0), self.at(ws, i, 1.min(ny - 1))],
                &flat,
                Axis::Y,
                End::Low,
            )?;
            let north = ghost_pair(
                &self.model,
                &self.boundary.north,
                [self.at(ws, i, ny - 1), self.at(ws, i, (ny - 2).max(0))],
                &flat,
                Axis::Y,
                End::High,
            )?;
            let (s1, s2, n1, n2) = (self.slot(i, -1), self.slot(i, -2), self.slot(i, ny), self.slot(i, ny + 1));
            ws[s1] = south[0];
            ws[s2] = south[1];
            ws[n1] = north[0];
            ws[n2] = north[1];
        }
        for j in -2..ny + 2 {
            let west = ghost_pair(
                &self.model,
                &self.boundary.west,
                [self.at(ws, 0, j), self.at(ws, 1.min(nx - 1), j)],
                &flat,
                Axis::X,
                End::Low,
            )?;
            let east = ghost_pair(
                &self.model,
                &self.boundary.east,
                [self.at(ws, nx - 1, j), self.at(ws, (nx - 2).max(0), j)],
                &flat,
                Axis::X,
                End::High,
            )?;
            let (w1, w2, e1, e2) = (self.slot(-1, j), self.slot(-2, j), self.slot(nx, j), self.slot(nx + 1, j));
            ws[w1] = west[0];
            ws[w2] = west[1];
            ws[e1] = east[0];
            ws[e2] = east[1];
        }
        Ok(())
    }

    /// Stencil value seen along `axis`: `normal` counts along the axis,
    /// `transverse` across it.
    #[inline]
    fn oriented<'a>(&self, ws: &'a [State<D>], axis: Axis, normal: i64, transverse: i64) -> &'a State<D> {
        match axis {
            Axis::X => self.at(ws, normal, transverse),
            Axis::Y => self.at(ws, transverse, normal),
        }
    }

    /// One-sided states at the two Gauss points of face `f` along `axis`,
    /// in line `t` of the transverse direction.
    fn face_gauss_states(&self, ws: &[State<D>], axis: Axis, f: i64, t: i64) -> Result<[(State<D>, State<D>); 2]> {
        let mut block = [[State::<D>::zeros(); 3]; 4];
        for (a, row) in block.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v = *self.oriented(ws, axis, f - 2 + a as i64, t - 1 + b as i64);
            }
        }
        let basis = if self.model.characteristic() {
            let reference = (block[1][1] + block[2][1]) * 0.5;
            let (l, r) = self.model.eigenbasis(&reference, &Geometry::flat(), axis)?;
            for row in block.iter_mut() {
                for v in row.iter_mut() {
                    *v = l * *v;
                }
            }
            Some(r)
        } else {
            None
        };
        let mut out = [(State::<D>::zeros(), State::<D>::zeros()); 2];
        for (g, slot) in out.iter_mut().enumerate() {
            let upper = g == 1;
            let line: [State<D>; 4] = std::array::from_fn(|a| weno3_gauss_state(&block[a][0], &block[a][1], &block[a][2], upper));
            let mut minus = weno3_minus_state(&line[0], &line[1], &line[2]);
            let mut plus = weno3_plus_state(&line[1], &line[2], &line[3]);
            if let Some(r) = basis {
                minus = r * minus;
                plus = r * plus;
            }
            *slot = (minus, plus);
        }
        Ok(out)
    }

    fn x_face_flux(&self, ws: &[State<D>], f: i64, j: i64) -> Result<State<D>> {
        let states = self.face_gauss_states(ws, Axis::X, f, j)?;
        let geoms = &self.x_face_geometry[f as usize * self.mesh.ny + j as usize];
        let mut total = State::<D>::zeros();
        for g in 0..2 {
            total += numerical_flux(&self.model, &states[g].0, &states[g].1, &geoms[g], Axis::X)? * GAUSS2.weights[g];
        }
        Ok(total)
    }

    fn y_face_flux(&self, ws: &[State<D>], i: i64, f: i64) -> Result<State<D>> {
        let states = self.face_gauss_states(ws, Axis::Y, f, i)?;
        let geoms = &self.y_face_geometry[f as usize * self.mesh.nx + i as usize];
        let mut total = State::<D>::zeros();
        for g in 0..2 {
            total += numerical_flux(&self.model, &states[g].0, &states[g].1, &geoms[g], Axis::Y)? * GAUSS2.weights[g];
        }
        Ok(total)
    }

    /// `∫∫ S` over cell `(i, j)`: y-Gauss line averages of cells
    /// `i−2..=i+2`, then the x-direction quartic at each line.
    fn source(&self, ws: &[State<D>], i: i64, j: i64, cell: usize) -> Result<State<D>> {
        let mut total = State::<D>::zeros();
        for b in 0..2 {
            let upper = b == 1;
            let w: [State<D>; 5] = std::array::from_fn(|k| {
                let c = i - 2 + k as i64;
                weno3_gauss_state(self.at(ws, c, j - 1), self.at(ws, c, j), self.at(ws, c, j + 1), upper)
            });
            let far_l = weno3_plus_state(&w[0], &w[1], &w[2]);
            let near_l = weno3_plus_state(&w[1], &w[2], &w[3]);
            let near_r = weno3_minus_state(&w[1], &w[2], &w[3]);
            let far_r = weno3_minus_state(&w[2], &w[3], &w[4]);
            let nodes = quartic_at_gauss_nodes([&far_l, &near_l, &near_r, &far_r, &w[2]]);
            for (a, u) in nodes.iter().enumerate() {
                let weight = GAUSS2.weights[a] * GAUSS2.weights[b];
                total += self.model.source_density(u, &self.gauss_geometry[cell][2 * b + a])? * weight;
            }
        }
        Ok(total * (self.mesh.dx * self.mesh.dy))
    }

    /// One-sided states at the Gauss points of every x-face, ordered
    /// `[(f·ny + j)·2 + β]`.
    pub fn x_interface_states(&self, field: &[State<D>]) -> Result<InterfaceStates<D>> {
        let ws = self.prepare(field)?;
        let mut minus = Vec::new();
        let mut plus = Vec::new();
        for f in 0..=self.mesh.nx as i64 {
            for j in 0..self.mesh.ny as i64 {
                for (m, p) in self.face_gauss_states(&ws, Axis::X, f, j)? {
                    minus.push(m);
                    plus.push(p);
                }
            }
        }
        Ok(InterfaceStates { minus, plus })
    }
}

impl<const D: usize, M: Model<D>> LocalResidual<D> for FvScheme2d<D, M> {
    type Workspace = Vec<State<D>>;

    fn shape(&self) -> GridShape {
        GridShape::new(self.mesh.nx, self.mesh.ny)
    }

    fn prepare(&self, field: &[State<D>]) -> Result<Self::Workspace> {
        let (nx, ny) = (self.mesh.nx, self.mesh.ny);
        check_len(nx * ny, field.len())?;
        let mut ws = vec![State::<D>::zeros(); self.stride() * (ny + 2 * GHOSTS)];
        for j in 0..ny {
            let start = self.slot(0, j as i64);
            ws[start..start + nx].copy_from_slice(&field[j * nx..(j + 1) * nx]);
        }
        self.fill_ghosts(&mut ws)?;
        Ok(ws)
    }

    fn cell_value(&self, ws: &Self::Workspace, cell: usize) -> State<D> {
        let (i, j) = self.shape().coords(cell);
        *self.at(ws, i as i64, j as i64)
    }

    fn set_cell(&self, ws: &mut Self::Workspace, cell: usize, value: State<D>) -> Result<()> {
        let (i, j) = self.shape().coords(cell);
        let s = self.slot(i as i64, j as i64);
        ws[s] = value;
        let near = |k: usize, n: usize| k < GHOSTS || k + GHOSTS >= n;
        if near(i, self.mesh.nx) || near(j, self.mesh.ny) {
            self.fill_ghosts(ws)?;
        }
        Ok(())
    }

    fn residual_at(&self, ws: &Self::Workspace, cell: usize) -> Result<State<D>> {
        let (i, j) = self.shape().coords(cell);
        let (i, j) = (i as i64, j as i64);
        let eval = || -> Result<State<D>> {
            let fx = self.x_face_flux(ws, i + 1, j)? - self.x_face_flux(ws, i, j)?;
            let gy = self.y_face_flux(ws, i, j + 1)? - self.y_face_flux(ws, i, j)?;
            let s = self.source(ws, i, j, cell)?;
            Ok(fx * self.mesh.dy + gy * self.mesh.dx - s)
        };
        eval().map_err(|e| e.at_cell(cell))
    }

    fn check_admissible(&self, field: &[State<D>]) -> Result<()> {
        check_depths(&self.model, field, &self.center_geometry)
    }
}

/// Ghost-extended copy of a 1D field (`n + 4` entries).
pub fn fill_ghosts_1d<const D: usize, M: Model<D>>(scheme: &FvScheme1d<D, M>, field: &[State<D>]) -> Result<Vec<State<D>>> {
    scheme.prepare(field)
}

/// Ghost-extended copy of a 2D field (`(nx + 4)(ny + 4)` entries, row-major).
pub fn fill_ghosts_2d<const D: usize, M: Model<D>>(scheme: &FvScheme2d<D, M>, field: &[State<D>]) -> Result<Vec<State<D>>> {
    scheme.prepare(field)
}

pub fn assemble_residual_1d<const D: usize, M: Model<D>>(
    scheme: &FvScheme1d<D, M>,
    field: &[State<D>],
) -> Result<ResidualField<D>> {
    CellField::new(scheme.shape(), scheme.residual(field)?)
}

pub fn assemble_residual_2d<const D: usize, M: Model<D>>(
    scheme: &FvScheme2d<D, M>,
    field: &[State<D>],
) -> Result<ResidualField<D>> {
    CellField::new(scheme.shape(), scheme.residual(field)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ChannelFlow1d, NumericalFlux, ShallowWater1d, ShallowWater2d};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn s2(h: f64, q: f64) -> State<2> {
        State::<2>::new(h, q)
    }

    fn flat_scheme(n: usize, bc: BoundarySpec1d<2>) -> FvScheme1d<2, ShallowWater1d> {
        let mesh = Mesh1D::new(0.0, 1.0, n).unwrap();
        FvScheme1d::new(ShallowWater1d::default(), mesh, bc, &|_| Geometry::flat()).unwrap()
    }

    #[test]
    fn ghost_fill_examples() {
        let field = vec![s2(1.0, 0.5), s2(1.2, 0.5), s2(1.4, 0.5), s2(1.6, 0.5)];
        let scheme = flat_scheme(
            4,
            BoundarySpec1d {
                left: BoundaryCondition::ReflectiveWall,
                right: BoundaryCondition::ZeroGradient,
            },
        );
        let ws = scheme.prepare(&field).unwrap();
        assert_eq!(ws[1], s2(1.0, -0.5));
        assert_eq!(ws[0], s2(1.2, -0.5));
        assert_eq!(ws[6], s2(1.6, 0.5));
        assert_eq!(ws[7], s2(1.6, 0.5));

        let scheme = flat_scheme(
            4,
            BoundarySpec1d {
                left: BoundaryCondition::FixedDischarge(4.42),
                right: BoundaryCondition::FixedDepth(2.0),
            },
        );
        let ws = scheme.prepare(&field).unwrap();
        assert_eq!(ws[1], s2(1.0, 4.42));
        assert_eq!(ws[6], s2(2.0, 0.5));
    }

    #[test]
    fn fixed_depth_yields_at_supercritical_outflow() {
        let field = vec![s2(0.3, 2.0); 4];
        let scheme = flat_scheme(
            4,
            BoundarySpec1d {
                left: BoundaryCondition::SupercriticalInflow(s2(0.3, 2.0)),
                right: BoundaryCondition::FixedDepth(0.66),
            },
        );
        let ws = scheme.prepare(&field).unwrap();
        assert_eq!(ws[6], s2(0.3, 2.0));
        assert_eq!(ws[0], s2(0.3, 2.0));
    }

    #[test]
    fn invalid_boundary_is_rejected() {
        let mesh = Mesh1D::new(0.0, 1.0, 8).unwrap();
        let bc = BoundarySpec1d {
            left: BoundaryCondition::FixedDepth(-1.0),
            right: BoundaryCondition::ZeroGradient,
        };
        let err = FvScheme1d::new(ShallowWater1d::default(), mesh, bc, &|_| Geometry::flat()).unwrap_err();
        assert!(matches!(err, SolverError::InconsistentSpec(_)));
    }

    #[test]
    fn lake_at_rest_has_zero_residual_on_flat_bed() {
        let scheme = flat_scheme(
            16,
            BoundarySpec1d {
                left: BoundaryCondition::ZeroGradient,
                right: BoundaryCondition::ZeroGradient,
            },
        );
        let r = scheme.residual(&vec![s2(1.0, 0.0); 16]).unwrap();
        assert_eq!(residual_l1(&r), 0.0);
    }

    #[test]
    fn uniform_flow_has_zero_residual() {
        for characteristic in [false, true] {
            let mut scheme = flat_scheme(
                12,
                BoundarySpec1d {
                    left: BoundaryCondition::FixedState(s2(1.0, 1.0)),
                    right: BoundaryCondition::FixedState(s2(1.0, 1.0)),
                },
            );
            scheme.model.characteristic = characteristic;
            let r = scheme.residual(&[s2(1.0, 1.0); 12]).unwrap();
            assert!(residual_l1(&r) < 1e-13);
        }
    }

    #[test]
    fn sloping_lake_at_rest_is_preserved_to_quadrature_accuracy() {
        // linear bottom, flat free surface: the quartic source reproduces
        // the hydrostatic balance up to rounding on each cell
        let n = 20;
        let mesh = Mesh1D::new(0.0, 1.0, n).unwrap();
        let bed = |x: f64| Geometry {
            b: 0.1 * x,
            b_x: 0.1,
            ..Geometry::flat()
        };
        let field: Vec<_> = (0..n).map(|j| s2(1.0 - 0.1 * mesh.center(j), 0.0)).collect();
        let bc = BoundarySpec1d {
            left: BoundaryCondition::ZeroGradient,
            right: BoundaryCondition::ZeroGradient,
        };
        let scheme = FvScheme1d::new(ShallowWater1d::default(), mesh, bc, &bed).unwrap();
        let r = scheme.residual(&field).unwrap();
        for row in &r[2..n - 2] {
            assert!(row.norm() < 1e-13, "row {row:?}");
        }
    }

    #[test]
    fn channel_with_unit_breadth_matches_swe_residual() {
        let n = 10;
        let mesh = Mesh1D::new(0.0, 2.0, n).unwrap();
        let bed = |x: f64| Geometry {
            b: 0.05 * x * x,
            b_x: 0.1 * x,
            ..Geometry::flat()
        };
        let bc = BoundarySpec1d {
            left: BoundaryCondition::FixedDischarge(1.1),
            right: BoundaryCondition::FixedDepth(1.3),
        };
        let field: Vec<_> = (0..n).map(|j| s2(1.2 + 0.01 * j as f64, 1.0 + 0.02 * (j as f64).sin())).collect();
        let swe = FvScheme1d::new(ShallowWater1d::default(), mesh, bc, &bed).unwrap();
        let chan = FvScheme1d::new(ChannelFlow1d::default(), mesh, bc, &bed).unwrap();
        let a = swe.residual(&field).unwrap();
        let b = chan.residual(&field).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn dry_cell_is_reported_with_index() {
        let scheme = flat_scheme(
            8,
            BoundarySpec1d {
                left: BoundaryCondition::ZeroGradient,
                right: BoundaryCondition::ZeroGradient,
            },
        );
        let mut field = vec![s2(1.0, 0.0); 8];
        field[5] = s2(-0.1, 0.0);
        assert_eq!(
            scheme.check_admissible(&field).unwrap_err(),
            SolverError::NonpositiveDepth { cell: Some(5), depth: -0.1 }
        );
        assert!(scheme.residual(&field).is_err());
    }

    #[test]
    fn set_cell_matches_fresh_prepare() {
        let scheme = flat_scheme(
            6,
            BoundarySpec1d {
                left: BoundaryCondition::ReflectiveWall,
                right: BoundaryCondition::FixedDepth(1.0),
            },
        );
        let mut field: Vec<_> = (0..6).map(|j| s2(1.0 + 0.1 * j as f64, 0.2)).collect();
        let mut ws = scheme.prepare(&field).unwrap();
        for c in [0, 1, 4, 5] {
            field[c] = s2(2.0, -0.3);
            scheme.set_cell(&mut ws, c, field[c]).unwrap();
            assert_eq!(ws, scheme.prepare(&field).unwrap());
        }
    }

    fn swe2d_scheme(nx: usize, ny: usize, bc: BoundarySpec2d<3>) -> FvScheme2d<3, ShallowWater2d> {
        let mesh = Mesh2D::new([0.0, 2.0, 0.0, 1.0], nx, ny).unwrap();
        FvScheme2d::new(ShallowWater2d::default(), mesh, bc, &|_, _| Geometry::flat()).unwrap()
    }

    #[test]
    fn ghost_fill_2d_order_and_walls() {
        let bc = BoundarySpec2d {
            west: BoundaryCondition::FixedState(State::<3>::new(1.0, 8.0, -1.0)),
            east: BoundaryCondition::ZeroGradient,
            south: BoundaryCondition::ReflectiveWall,
            north: BoundaryCondition::ZeroGradient,
        };
        let scheme = swe2d_scheme(4, 4, bc);
        let field: Vec<_> = (0..16).map(|c| State::<3>::new(1.0 + c as f64, 0.5, 0.25)).collect();
        let ws = scheme.prepare(&field).unwrap();
        // south wall mirrors row 0 into j = −1 and row 1 into j = −2
        assert_eq!(*scheme.at(&ws, 2, -1), State::<3>::new(3.0, 0.5, -0.25));
        assert_eq!(*scheme.at(&ws, 2, -2), State::<3>::new(7.0, 0.5, -0.25));
        // the west column is written last and owns the corners
        assert_eq!(*scheme.at(&ws, -1, -1), State::<3>::new(1.0, 8.0, -1.0));
        // east corners copy the filled ghost row
        assert_eq!(*scheme.at(&ws, 4, -1), State::<3>::new(4.0, 0.5, -0.25));
    }

    #[test]
    fn uniform_2d_flow_has_zero_residual() {
        let inflow = State::<3>::new(1.0, 0.8, -0.3);
        let bc = BoundarySpec2d {
            west: BoundaryCondition::FixedState(inflow),
            east: BoundaryCondition::ZeroGradient,
            south: BoundaryCondition::FixedState(inflow),
            north: BoundaryCondition::ZeroGradient,
        };
        for flux in [NumericalFlux::Llf, NumericalFlux::Hll] {
            let mut scheme = swe2d_scheme(6, 4, bc);
            scheme.model.flux = flux;
            let r = scheme.residual(&vec![inflow; 24]).unwrap();
            assert!(residual_l1(&r) < 1e-13);
        }
    }

    #[test]
    fn x_invariant_2d_flow_reduces_to_1d() {
        // a field that varies only in x with zero transverse momentum gives
        // Δy times the 1D residual in every row
        let nx = 10;
        let ny = 4;
        let mesh2 = Mesh2D::new([0.0, 2.0, 0.0, 1.0], nx, ny).unwrap();
        let mesh1 = Mesh1D::new(0.0, 2.0, nx).unwrap();
        let bed1 = |x: f64| Geometry {
            b: 0.05 * x * x,
            b_x: 0.1 * x,
            ..Geometry::flat()
        };
        let bed2 = move |x: f64, _y: f64| bed1(x);
        let bc1 = BoundarySpec1d {
            left: BoundaryCondition::FixedDischarge(1.1),
            right: BoundaryCondition::FixedDepth(1.3),
        };
        let bc2 = BoundarySpec2d {
            west: BoundaryCondition::FixedDischarge(1.1),
            east: BoundaryCondition::FixedDepth(1.3),
            south: BoundaryCondition::ZeroGradient,
            north: BoundaryCondition::ZeroGradient,
        };
        let line: Vec<_> = (0..nx).map(|i| s2(1.2 + 0.03 * i as f64, 1.0 + 0.1 * (i as f64).cos())).collect();
        let field: Vec<_> = (0..nx * ny).map(|c| State::<3>::new(line[c % nx][0], line[c % nx][1], 0.0)).collect();
        // in characteristic mode the 2D source still reconstructs
        // componentwise, so only the fluxes agree exactly
        for (characteristic, tol) in [(false, 1e-12), (true, 1e-4)] {
            let m1 = ShallowWater1d {
                flux: NumericalFlux::Llf,
                characteristic,
                ..ShallowWater1d::default()
            };
            let m2 = ShallowWater2d {
                characteristic,
                ..ShallowWater2d::default()
            };
            let s1 = FvScheme1d::new(m1, mesh1, bc1, &bed1).unwrap();
            let s2d = FvScheme2d::new(m2, mesh2, bc2, &bed2).unwrap();
            let r1 = s1.residual(&line).unwrap();
            let r2 = s2d.residual(&field).unwrap();
            for c in 0..nx * ny {
                let expect = r1[c % nx] * mesh2.dy;
                assert_relative_eq!(r2[c][0], expect[0], epsilon = tol);
                assert_relative_eq!(r2[c][1], expect[1], epsilon = tol);
                assert!(r2[c][2].abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn ghosts_depend_only_on_adjacent_cells(
            vals in prop::collection::vec((0.5f64..2.0, -1.0f64..1.0), 8),
            far in (0.5f64..2.0, -1.0f64..1.0),
        ) {
            let bc = BoundarySpec1d {
                left: BoundaryCondition::ReflectiveWall,
                right: BoundaryCondition::FixedDepth(1.0),
            };
            let scheme = flat_scheme(8, bc);
            let field: Vec<_> = vals.iter().map(|&(h, q)| s2(h, q)).collect();
            let mut other = field.clone();
            for c in 2..6 {
                other[c] = s2(far.0, far.1);
            }
            let a = scheme.prepare(&field).unwrap();
            let b = scheme.prepare(&other).unwrap();
            prop_assert_eq!(&a[..2], &b[..2]);
            prop_assert_eq!(&a[10..], &b[10..]);
        }

        #[test]
        fn residual_rows_see_five_cells(
            vals in prop::collection::vec((0.8f64..1.5, 0.2f64..0.6), 12),
            target in 0usize..12,
            bump in 0.01f64..0.2,
        ) {
            let bc = BoundarySpec1d {
                left: BoundaryCondition::FixedDischarge(0.4),
                right: BoundaryCondition::FixedDepth(1.0),
            };
            let scheme = flat_scheme(12, bc);
            let field: Vec<_> = vals.iter().map(|&(h, q)| s2(h, q)).collect();
            let mut moved = field.clone();
            moved[target][0] += bump;
            let a = scheme.residual(&field).unwrap();
            let b = scheme.residual(&moved).unwrap();
            for j in 0..12 {
                let reachable = (j as i64 - target as i64).abs() <= 2
                    || (target < 2 && j < 2)
                    || (target >= 10 && j >= 10);
                if !reachable {
                    prop_assert_eq!(a[j], b[j]);
                }
            }
        }
    }
}
