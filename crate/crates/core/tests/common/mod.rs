//! Property checks shared by the `properties` and `acceptance` targets.
#![allow(dead_code)]

use nalgebra::DMatrix;
use nmgm_core::jacobian::{fd_jacobian, BlockBandedMatrix, FdConfig, JacobianVariant, StencilPattern};
use nmgm_core::mesh::{Aggregation, GridShape};
use nmgm_core::model::{
    characteristic_inverse, characteristic_transform, hll_flux, llf_flux, Axis, ChannelFlow1d, Geometry, Model,
    ShallowWater1d, ShallowWater2d, State,
};
use nmgm_core::multigrid::galerkin_project;
use nmgm_core::newton::{prolong_solution_1d, prolong_solution_2d};
use nmgm_core::reconstruction::{weno3_gauss, weno3_minus, weno3_plus, GAUSS_OFFSET};
use nmgm_core::residual::LocalResidual;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

pub type Check = std::result::Result<(), TestCaseError>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

/// Deterministic pseudo-random numbers in `[-1, 1)` from a seed.
pub fn noise(seed: u64, n: usize) -> Vec<f64> {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..n)
        .map(|_| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 52) as f64 - 1.0
        })
        .collect()
}

// ---- FD Jacobian on affine maps ----

/// `R_c(u) = Σ_o A_{c,o} u_{c+o} + b_c` over the in-grid offsets of a
/// pattern.
#[derive(Debug, Clone)]
pub struct AffineMap<const D: usize> {
    pub shape: GridShape,
    pub pattern: StencilPattern,
    pub blocks: Vec<nalgebra::SMatrix<f64, D, D>>,
    pub shift: Vec<State<D>>,
}

impl<const D: usize> AffineMap<D> {
    pub fn random(shape: GridShape, pattern: StencilPattern, seed: u64) -> Self {
        let nb = shape.len() * pattern.len();
        let a = noise(seed, nb * D * D);
        let b = noise(seed ^ 0xabc, shape.len() * D);
        Self {
            blocks: a.chunks(D * D).map(nalgebra::SMatrix::<f64, D, D>::from_column_slice).collect(),
            shift: b.chunks(D).map(State::<D>::from_column_slice).collect(),
            shape,
            pattern,
        }
    }

    fn neighbour(&self, cell: usize, o: (i32, i32)) -> Option<usize> {
        let (i, j) = self.shape.coords(cell);
        let (ni, nj) = (i as i64 + o.0 as i64, j as i64 + o.1 as i64);
        (ni >= 0 && nj >= 0 && (ni as usize) < self.shape.nx && (nj as usize) < self.shape.ny)
            .then(|| self.shape.index(ni as usize, nj as usize))
    }

    /// Dense matrix of the linear part.
    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.shape.len();
        let mut m = DMatrix::zeros(n * D, n * D);
        for c in 0..n {
            for (k, &o) in self.pattern.offsets().iter().enumerate() {
                if let Some(col) = self.neighbour(c, o) {
                    let blk = &self.blocks[c * self.pattern.len() + k];
                    m.view_mut((c * D, col * D), (D, D)).copy_from(blk);
                }
            }
        }
        m
    }
}

impl<const D: usize> LocalResidual<D> for AffineMap<D> {
    type Workspace = Vec<State<D>>;

    fn shape(&self) -> GridShape {
        self.shape
    }

    fn prepare(&self, field: &[State<D>]) -> nmgm_core::Result<Self::Workspace> {
        Ok(field.to_vec())
    }

    fn cell_value(&self, ws: &Self::Workspace, cell: usize) -> State<D> {
        ws[cell]
    }

    fn set_cell(&self, ws: &mut Self::Workspace, cell: usize, value: State<D>) -> nmgm_core::Result<()> {
        ws[cell] = value;
        Ok(())
    }

    fn residual_at(&self, ws: &Self::Workspace, cell: usize) -> nmgm_core::Result<State<D>> {
        let mut r = self.shift[cell];
        for (k, &o) in self.pattern.offsets().iter().enumerate() {
            if let Some(col) = self.neighbour(cell, o) {
                r += self.blocks[cell * self.pattern.len() + k] * ws[col];
            }
        }
        Ok(r)
    }
}

fn relative_gap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax().max(f64::MIN_POSITIVE)
}

pub fn fd_affine<const D: usize>(shape: GridShape, variant: JacobianVariant, seed: u64, epsilon: f64) -> Check {
    let map = AffineMap::<D>::random(shape, variant.pattern(), seed);
    let field: Vec<State<D>> = noise(seed ^ 0x55, shape.len() * D)
        .chunks(D)
        .map(|c| State::<D>::from_column_slice(c).add_scalar(2.0))
        .collect();
    let jac = fd_jacobian(&map, &field, &variant.pattern(), FdConfig::new(epsilon).unwrap()).unwrap();
    let gap = relative_gap(&jac.matrix.to_dense(), &map.dense());
    ensure(gap <= 1e-10, || format!("{variant} on {}x{}: relative gap {gap:e}", shape.nx, shape.ny))
}

// ---- Galerkin projection ----

pub fn random_matrix<const D: usize>(shape: GridShape, variant: JacobianVariant, seed: u64) -> BlockBandedMatrix<D> {
    let mut m = BlockBandedMatrix::<D>::zeros(shape, variant.pattern());
    let k = m.pattern().len();
    let vals = noise(seed, shape.len() * k * D * D);
    for row in 0..shape.len() {
        for kk in 0..k {
            let off = (row * k + kk) * D * D;
            *m.block_mut(row, kk) = nalgebra::SMatrix::<f64, D, D>::from_column_slice(&vals[off..off + D * D]);
        }
    }
    m
}

/// Restriction built directly from the child lists.
pub fn restriction<const D: usize>(agg: &Aggregation) -> DMatrix<f64> {
    let mut r = DMatrix::zeros(agg.coarse.len() * D, agg.fine.len() * D);
    for c in 0..agg.coarse.len() {
        for &f in agg.children(c) {
            for a in 0..D {
                r[(c * D + a, f * D + a)] = 1.0;
            }
        }
    }
    r
}

pub fn galerkin_dense<const D: usize>(shape: GridShape, variant: JacobianVariant, seed: u64) -> Check {
    let fine = random_matrix::<D>(shape, variant, seed);
    let factors = if shape.ny == 1 { (2, 1) } else { (2, 2) };
    let agg = Aggregation::new(shape, factors);
    let r = restriction::<D>(&agg);
    let oracle = &r * fine.to_dense() * r.transpose();
    let coarse = galerkin_project(&fine, &agg).to_dense();
    let gap = (&coarse - &oracle).amax();
    ensure(gap <= 1e-12, || format!("{variant} on {}x{}: gap {gap:e}", shape.nx, shape.ny))
}

// ---- Prolongation ----

/// Cell average of `c0 + c1 x + c2 x²` over `[a, b]`.
fn quad_mean(c: [f64; 3], a: f64, b: f64) -> f64 {
    let prim = |x: f64| c[0] * x + c[1] * x * x / 2.0 + c[2] * x * x * x / 3.0;
    (prim(b) - prim(a)) / (b - a)
}

pub fn prolong_quadratic_1d(n: usize, c: [f64; 3]) -> Check {
    let dx = 1.0 / n as f64;
    let coarse: Vec<State<1>> = (0..n)
        .map(|j| State::<1>::new(quad_mean(c, j as f64 * dx, (j + 1) as f64 * dx)))
        .collect();
    let fine = prolong_solution_1d(&coarse);
    let scale = c.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    for j in 0..n {
        let mean = 0.5 * (fine[2 * j][0] + fine[2 * j + 1][0]);
        ensure((mean - coarse[j][0]).abs() <= 1e-13 * scale, || format!("parent mean broken at {j}"))?;
        if j == 0 || j + 1 == n {
            continue;
        }
        for k in 0..2 {
            let a = (2 * j + k) as f64 * dx / 2.0;
            let exact = quad_mean(c, a, a + dx / 2.0);
            let got = fine[2 * j + k][0];
            ensure((got - exact).abs() <= 1e-13 * scale, || format!("child {k} of {j}: {got} vs {exact}"))?;
        }
    }
    Ok(())
}

pub fn prolong_biquadratic_2d(nx: usize, ny: usize, cx: [f64; 3], cy: [f64; 3]) -> Check {
    let (dx, dy) = (1.0 / nx as f64, 1.0 / ny as f64);
    let shape = GridShape::new(nx, ny);
    let mut coarse = Vec::with_capacity(shape.len());
    for j in 0..ny {
        for i in 0..nx {
            let mx = quad_mean(cx, i as f64 * dx, (i + 1) as f64 * dx);
            let my = quad_mean(cy, j as f64 * dy, (j + 1) as f64 * dy);
            coarse.push(State::<1>::new(mx * my));
        }
    }
    let fine = prolong_solution_2d(shape, &coarse);
    let fshape = GridShape::new(2 * nx, 2 * ny);
    let scale = cx.iter().map(|v| v.abs()).sum::<f64>().max(1.0) * cy.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    for j in 0..ny {
        for i in 0..nx {
            let kids = [(0, 0), (1, 0), (0, 1), (1, 1)].map(|(di, dj)| fine[fshape.index(2 * i + di, 2 * j + dj)][0]);
            let mean = kids.iter().sum::<f64>() / 4.0;
            let parent = coarse[shape.index(i, j)][0];
            ensure((mean - parent).abs() <= 1e-13 * scale, || format!("parent mean broken at ({i}, {j})"))?;
            if i == 0 || j == 0 || i + 1 == nx || j + 1 == ny {
                continue;
            }
            for (k, (di, dj)) in [(0, 0), (1, 0), (0, 1), (1, 1)].into_iter().enumerate() {
                let ax = (2 * i + di) as f64 * dx / 2.0;
                let ay = (2 * j + dj) as f64 * dy / 2.0;
                let exact = quad_mean(cx, ax, ax + dx / 2.0) * quad_mean(cy, ay, ay + dy / 2.0);
                ensure((kids[k] - exact).abs() <= 1e-13 * scale, || format!("child ({di}, {dj}) of ({i}, {j})"))?;
            }
        }
    }
    Ok(())
}

// ---- WENO3 ----

pub fn weno_constant(c: f64) -> Check {
    let all = [weno3_minus(c, c, c), weno3_plus(c, c, c), weno3_gauss(c, c, c, true), weno3_gauss(c, c, c, false)];
    ensure(all.iter().all(|&v| v == c), || format!("constant {c} gives {all:?}"))
}

/// Linear data: every candidate polynomial is the line itself, so the
/// traces are exact up to the rounding of the weight sum.
pub fn weno_linear(c: f64, d: f64) -> Check {
    let (m, p) = (c - d, c + d);
    let tol = 4.0 * f64::EPSILON * (c.abs() + d.abs());
    let cases = [
        (weno3_minus(m, c, p), c + 0.5 * d),
        (weno3_plus(m, c, p), c - 0.5 * d),
        (weno3_gauss(m, c, p, true), c + GAUSS_OFFSET * d),
        (weno3_gauss(m, c, p, false), c - GAUSS_OFFSET * d),
    ];
    for (got, exact) in cases {
        ensure((got - exact).abs() <= tol, || format!("line ({c}, {d}): {got} vs {exact}"))?;
    }
    Ok(())
}

/// Each trace is a convex combination of its two candidate values.
pub fn weno_hull(m: f64, c: f64, p: f64) -> Check {
    let tol = 1e-14 * (m.abs() + c.abs() + p.abs()).max(1.0);
    let within = |v: f64, a: f64, b: f64| v >= a.min(b) - tol && v <= a.max(b) + tol;
    let right = (1.5 * c - 0.5 * m, 0.5 * (c + p));
    let left = (1.5 * c - 0.5 * p, 0.5 * (c + m));
    let gu = (c + GAUSS_OFFSET * (c - m), c + GAUSS_OFFSET * (p - c));
    let gl = (c - GAUSS_OFFSET * (c - m), c - GAUSS_OFFSET * (p - c));
    ensure(within(weno3_minus(m, c, p), right.0, right.1), || "right-face trace".into())?;
    ensure(within(weno3_plus(m, c, p), left.0, left.1), || "left-face trace".into())?;
    ensure(within(weno3_gauss(m, c, p, true), gu.0, gu.1), || "upper Gauss trace".into())?;
    ensure(within(weno3_gauss(m, c, p, false), gl.0, gl.1), || "lower Gauss trace".into())
}

// ---- Fluxes and characteristic variables ----

fn consistent<const D: usize, M: Model<D>>(model: &M, u: &State<D>, geom: &Geometry, axis: Axis) -> Check {
    let exact = model.physical_flux(u, geom, axis).unwrap();
    let scale = exact.amax().max(f64::MIN_POSITIVE);
    for (name, f) in [
        ("HLL", hll_flux(model, u, u, geom, axis).unwrap()),
        ("LLF", llf_flux(model, u, u, geom, axis).unwrap()),
    ] {
        let gap = (f - exact).amax() / scale;
        ensure(gap <= 1e-14, || format!("{name} flux off by {gap:e} at {u:?}"))?;
    }
    Ok(())
}

pub fn flux_consistency(h: f64, u: f64, v: f64, sigma: f64) -> Check {
    let sw = ShallowWater1d::default();
    consistent(&sw, &State::<2>::new(h, h * u), &Geometry::flat(), Axis::X)?;
    let ch = ChannelFlow1d::default();
    let geom = Geometry {
        sigma,
        ..Geometry::flat()
    };
    consistent(&ch, &State::<2>::new(sigma * h, sigma * h * u), &geom, Axis::X)?;
    let sw2 = ShallowWater2d::default();
    let s = State::<3>::new(h, h * u, h * v);
    consistent(&sw2, &s, &Geometry::flat(), Axis::X)?;
    consistent(&sw2, &s, &Geometry::flat(), Axis::Y)
}

fn round_trip<const D: usize, M: Model<D>>(model: &M, reference: &State<D>, geom: &Geometry, axis: Axis, seed: u64) -> Check {
    let values: Vec<State<D>> = noise(seed, 5 * D).chunks(D).map(|c| State::<D>::from_column_slice(c) * 3.0).collect();
    let w = characteristic_transform(model, reference, geom, axis, &values).unwrap();
    let back = characteristic_inverse(model, reference, geom, axis, &w).unwrap();
    for (a, b) in values.iter().zip(&back) {
        let gap = (a - b).amax() / a.amax().max(1.0);
        ensure(gap <= 1e-12, || format!("round trip off by {gap:e}"))?;
    }
    Ok(())
}

pub fn characteristic_round_trip(h: f64, u: f64, v: f64, sigma: f64, seed: u64) -> Check {
    round_trip(&ShallowWater1d::default(), &State::<2>::new(h, h * u), &Geometry::flat(), Axis::X, seed)?;
    let geom = Geometry {
        sigma,
        ..Geometry::flat()
    };
    round_trip(&ChannelFlow1d::default(), &State::<2>::new(sigma * h, sigma * h * u), &geom, Axis::X, seed)?;
    let s = State::<3>::new(h, h * u, h * v);
    round_trip(&ShallowWater2d::default(), &s, &Geometry::flat(), Axis::X, seed)?;
    round_trip(&ShallowWater2d::default(), &s, &Geometry::flat(), Axis::Y, seed)
}

// ---- Strategies ----

pub fn shape_1d() -> impl Strategy<Value = GridShape> {
    (2usize..=16).prop_map(|k| GridShape::line(2 * k))
}

/// Even-sided 2D grids of at most 32 cells.
pub fn shape_2d() -> impl Strategy<Value = GridShape> {
    prop_oneof![Just((2, 2)), Just((4, 2)), Just((2, 4)), Just((4, 4)), Just((6, 4)), Just((8, 4)), Just((4, 8)), Just((6, 2))]
        .prop_map(|(nx, ny)| GridShape::new(nx, ny))
}

pub fn coeffs() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-5.0f64..5.0)
}

pub fn flow_state() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (0.05f64..10.0, -8.0f64..8.0, -8.0f64..8.0, 0.2f64..5.0)
}

/// Runs every suite for `cases` random cases each; returns the name and
/// outcome of each suite.
pub fn run_all(cases: u32) -> Vec<(&'static str, std::result::Result<(), String>)> {
    let run = |f: &dyn Fn(&mut TestRunner) -> std::result::Result<(), String>| {
        let mut runner = TestRunner::new(Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        });
        f(&mut runner)
    };
    fn report<T: std::fmt::Debug>(r: std::result::Result<(), proptest::test_runner::TestError<T>>) -> std::result::Result<(), String> {
        r.map_err(|e| format!("{e}"))
    }
    vec![
        (
            "FD Jacobian exact on affine maps",
            run(&|r| {
                report(r.run(&(shape_1d(), any::<u64>()), |(s, seed)| {
                    fd_affine::<2>(s, JacobianVariant::J5, seed, 1e-3)?;
                    fd_affine::<2>(s, JacobianVariant::J3, seed, 1e-3)
                }))?;
                report(r.run(&(shape_2d(), any::<u64>()), |(s, seed)| {
                    fd_affine::<3>(s, JacobianVariant::J21, seed, 1e-3)?;
                    fd_affine::<3>(s, JacobianVariant::J9, seed, 1e-3)
                }))
            }),
        ),
        (
            "Galerkin projection equals R A R^T",
            run(&|r| {
                report(r.run(&(shape_1d(), any::<u64>()), |(s, seed)| {
                    galerkin_dense::<2>(s, JacobianVariant::J5, seed)?;
                    galerkin_dense::<2>(s, JacobianVariant::J3, seed)
                }))?;
                report(r.run(&(shape_2d(), any::<u64>()), |(s, seed)| {
                    galerkin_dense::<3>(s, JacobianVariant::J21, seed)?;
                    galerkin_dense::<3>(s, JacobianVariant::J9, seed)
                }))
            }),
        ),
        (
            "prolongation exact on quadratics and conservative",
            run(&|r| {
                report(r.run(&((3usize..40), coeffs()), |(n, c)| prolong_quadratic_1d(n, c)))?;
                report(r.run(&((3usize..12), (3usize..12), coeffs(), coeffs()), |(nx, ny, cx, cy)| {
                    prolong_biquadratic_2d(nx, ny, cx, cy)
                }))
            }),
        ),
        (
            "WENO3 reproduction and hull bound",
            run(&|r| {
                report(r.run(&(-1e3f64..1e3), weno_constant))?;
                report(r.run(&(-1e3f64..1e3, -1e3f64..1e3), |(c, d)| weno_linear(c, d)))?;
                report(r.run(&(-1e3f64..1e3, -1e3f64..1e3, -1e3f64..1e3), |(m, c, p)| weno_hull(m, c, p)))
            }),
        ),
        (
            "numerical flux consistency",
            run(&|r| report(r.run(&flow_state(), |(h, u, v, s)| flux_consistency(h, u, v, s)))),
        ),
        (
            "characteristic round trip",
            run(&|r| {
                report(r.run(&(flow_state(), any::<u64>()), |((h, u, v, s), seed)| {
                    characteristic_round_trip(h, u, v, s, seed)
                }))
            }),
        ),
    ]
}
