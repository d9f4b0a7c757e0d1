//! Benchmark problems, exact-solution oracles and error metrics.

use std::f64::consts::PI;
use std::io::Write;

use crate::error::{Result, SolverError};
use crate::mesh::{Mesh1D, Mesh2D};
use crate::model::{ChannelFlow1d, Geometry, Model1d, NumericalFlux, ShallowWater1d, ShallowWater2d, State};
use crate::residual::{BoundaryCondition, BoundarySpec1d, BoundarySpec2d, FvScheme1d, FvScheme2d};

/// Four-point Gauss–Legendre rule on `[−1, 1]`.
const GAUSS4_NODES: [f64; 4] = [-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
const GAUSS4_WEIGHTS: [f64; 4] = [0.347_854_845_137_453_9, 0.652_145_154_862_546_1, 0.652_145_154_862_546_1, 0.347_854_845_137_453_9];

/// Wedge deflection in degrees.
pub const WEDGE_ANGLE_DEG: f64 = 8.95;
pub const WEDGE_INFLOW_SPEED: f64 = 8.57;
pub const WEDGE_PROBE: (f64, f64) = (4.0, 0.5);

/// Average of `f` over `[a, b]` by four-point Gauss quadrature.
pub fn gauss4_average<const D: usize>(a: f64, b: f64, mut f: impl FnMut(f64) -> Result<State<D>>) -> Result<State<D>> {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let mut acc = State::<D>::zeros();
    for (xi, w) in GAUSS4_NODES.iter().zip(GAUSS4_WEIGHTS) {
        acc += f(mid + half * xi)? * (0.5 * w);
    }
    Ok(acc)
}

/// Tensor-product four-point Gauss average over a rectangle.
pub fn gauss4_average_2d<const D: usize>(
    (x0, x1): (f64, f64),
    (y0, y1): (f64, f64),
    mut f: impl FnMut(f64, f64) -> Result<State<D>>,
) -> Result<State<D>> {
    gauss4_average(y0, y1, |y| gauss4_average(x0, x1, |x| f(x, y)))
}

/// Bed profiles of the one-dimensional cases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bottom1d {
    /// `0.2·exp(−(x+1)²/2) + 0.3·exp(−(x−1.5)²)`.
    TwoBumps,
    /// `0.2 − 0.05(x−10)²` on `[8, 12]`, zero elsewhere.
    Hump,
}

impl Bottom1d {
    /// `(b, b_x)`.
    pub fn eval(self, x: f64) -> (f64, f64) {
        match self {
            Bottom1d::TwoBumps => {
                let e1 = (-(x + 1.0).powi(2) / 2.0).exp();
                let e2 = (-(x - 1.5).powi(2)).exp();
                (0.2 * e1 + 0.3 * e2, -0.2 * (x + 1.0) * e1 - 0.6 * (x - 1.5) * e2)
            }
            Bottom1d::Hump => {
                if (8.0..=12.0).contains(&x) {
                    (0.2 - 0.05 * (x - 10.0).powi(2), -0.1 * (x - 10.0))
                } else {
                    (0.0, 0.0)
                }
            }
        }
    }
}

/// Channel breadth `σ(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Breadth {
    Uniform,
    /// Cosine contraction of depth `2σ₀` between `x_l` and `x_r`.
    Contraction { x_l: f64, x_r: f64, sigma0: f64 },
}

impl Breadth {
    /// `(σ, σ_x)`.
    pub fn eval(self, x: f64) -> (f64, f64) {
        match self {
            Breadth::Uniform => (1.0, 0.0),
            Breadth::Contraction { x_l, x_r, sigma0 } => {
                if (x_l..=x_r).contains(&x) {
                    let k = 2.0 * PI / (x_r - x_l);
                    let arg = k * (x - 0.5 * (x_l + x_r));
                    (1.0 - sigma0 * (1.0 + arg.cos()), sigma0 * k * arg.sin())
                } else {
                    (1.0, 0.0)
                }
            }
        }
    }
}

/// Flow regime of a smooth 1D steady state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Subcritical,
    /// Subcritical upstream of the control point, supercritical after it.
    Transcritical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Oracle1d {
    /// Cubic in `u` for the two-bump bed with `h = hu = 1` at the ends.
    SmoothCubic,
    Bernoulli(Regime),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialCondition1d {
    /// Flat surface at the outflow depth, discharge at its inflow value.
    FlatSurfaceMoving,
    /// `h = 0.5 − b`, zero discharge.
    StillWater,
}

/// A one-dimensional benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct Case1d {
    pub name: &'static str,
    pub description: &'static str,
    pub domain: (f64, f64),
    pub bottom: Bottom1d,
    pub breadth: Breadth,
    /// Channel equations instead of plain shallow water.
    pub channel: bool,
    /// `hu` (or `Q`) imposed upstream.
    pub inflow_discharge: f64,
    /// `h` imposed downstream.
    pub outflow_depth: f64,
    pub initial: InitialCondition1d,
    pub oracle: Oracle1d,
    pub default_cells: usize,
}

impl Case1d {
    pub fn geometry(&self, x: f64) -> Geometry {
        let (b, b_x) = self.bottom.eval(x);
        let (sigma, sigma_x) = self.breadth.eval(x);
        Geometry {
            b,
            b_x,
            b_y: 0.0,
            sigma,
            sigma_x,
        }
    }

    pub fn model(&self, gravity: f64) -> Model1d {
        if self.channel {
            Model1d::Channel(ChannelFlow1d {
                gravity,
                ..ChannelFlow1d::default()
            })
        } else {
            Model1d::ShallowWater(ShallowWater1d {
                gravity,
                ..ShallowWater1d::default()
            })
        }
    }

    pub fn boundary(&self) -> BoundarySpec1d<2> {
        BoundarySpec1d {
            left: BoundaryCondition::FixedDischarge(self.inflow_discharge),
            right: BoundaryCondition::FixedDepth(self.outflow_depth),
        }
    }

    pub fn mesh(&self, n_cells: usize) -> Result<Mesh1D> {
        Mesh1D::new(self.domain.0, self.domain.1, n_cells)
    }

    pub fn scheme(&self, mesh: &Mesh1D, gravity: f64) -> Result<FvScheme1d<2, Model1d>> {
        FvScheme1d::new(self.model(gravity), *mesh, self.boundary(), &|x| self.geometry(x))
    }

    /// Conserved state of the initial condition at `x`.
    pub fn initial_state(&self, x: f64) -> State<2> {
        let g = self.geometry(x);
        match self.initial {
            InitialCondition1d::FlatSurfaceMoving => State::<2>::new(g.sigma * (self.outflow_depth - g.b), self.inflow_discharge),
            InitialCondition1d::StillWater => State::<2>::new(g.sigma * (0.5 - g.b), 0.0),
        }
    }

    pub fn initial_field(&self, mesh: &Mesh1D) -> Vec<State<2>> {
        (0..mesh.n_cells)
            .map(|j| {
                gauss4_average(mesh.face(j as i64), mesh.face(j as i64 + 1), |x| Ok(self.initial_state(x)))
                    .expect("initial condition is infallible")
            })
            .collect()
    }

    /// Pointwise exact steady state in conserved variables.
    pub fn exact_state(&self, x: f64, gravity: f64) -> Result<State<2>> {
        let geom = self.geometry(x);
        let h = match self.oracle {
            Oracle1d::SmoothCubic => exact_smooth_subcritical(geom.b, gravity)?[0],
            Oracle1d::Bernoulli(_) => self.bernoulli_profile(gravity)?.depth(x, self)?,
        };
        Ok(State::<2>::new(geom.sigma * h, self.inflow_discharge))
    }

    /// Exact cell averages by four-point Gauss quadrature.
    pub fn exact_averages(&self, mesh: &Mesh1D, gravity: f64) -> Result<Vec<State<2>>> {
        let profile = match self.oracle {
            Oracle1d::Bernoulli(_) => Some(self.bernoulli_profile(gravity)?),
            Oracle1d::SmoothCubic => None,
        };
        (0..mesh.n_cells)
            .map(|j| {
                gauss4_average(mesh.face(j as i64), mesh.face(j as i64 + 1), |x| match &profile {
                    Some(p) => Ok(State::<2>::new(self.geometry(x).sigma * p.depth(x, self)?, self.inflow_discharge)),
                    None => self.exact_state(x, gravity),
                })
            })
            .collect()
    }

    /// Energy level and control point of the Bernoulli oracle.
    pub fn bernoulli_profile(&self, gravity: f64) -> Result<BernoulliProfile> {
        let regime = match self.oracle {
            Oracle1d::Bernoulli(r) => r,
            Oracle1d::SmoothCubic => Regime::Subcritical,
        };
        let q = self.inflow_discharge;
        match regime {
            Regime::Subcritical => {
                let g_out = self.geometry(self.domain.1);
                let h = self.outflow_depth;
                let u = q / (g_out.sigma * h);
                Ok(BernoulliProfile {
                    gravity,
                    discharge: q,
                    energy: h + g_out.b + u * u / (2.0 * gravity),
                    regime,
                    control: None,
                })
            }
            Regime::Transcritical => {
                let phi = |x: f64| {
                    let g = self.geometry(x);
                    g.b + 1.5 * critical_depth(q / g.sigma, gravity)
                };
                let xc = argmax(phi, self.domain.0, self.domain.1);
                Ok(BernoulliProfile {
                    gravity,
                    discharge: q,
                    energy: phi(xc),
                    regime,
                    control: Some(xc),
                })
            }
        }
    }

    /// Maximum over cells of `|h̄ − h̄_exact|` (channel: `H̄/σ(x_j)`),
    /// i.e. the surface error since both share the same bed.
    pub fn surface_error(&self, mesh: &Mesh1D, field: &[State<2>], gravity: f64) -> Result<f64> {
        let exact = self.exact_averages(mesh, gravity)?;
        Ok(field
            .iter()
            .zip(&exact)
            .enumerate()
            .map(|(j, (u, e))| (u[0] - e[0]).abs() / self.geometry(mesh.center(j)).sigma)
            .fold(0.0, f64::max))
    }

    /// Oracle profile at cell centres: `(x, b, h_exact, q_exact)`.
    pub fn oracle_rows(&self, mesh: &Mesh1D, gravity: f64) -> Result<Vec<[f64; 4]>> {
        (0..mesh.n_cells)
            .map(|j| {
                let x = mesh.center(j);
                let g = self.geometry(x);
                let s = self.exact_state(x, gravity)?;
                Ok([x, g.b, s[0] / g.sigma, s[1]])
            })
            .collect()
    }
}

/// Smooth steady flow with constant discharge and constant energy
/// `E = h + b + q²/(2gσ²h²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliProfile {
    pub gravity: f64,
    pub discharge: f64,
    pub energy: f64,
    pub regime: Regime,
    /// Critical control point of a transcritical profile.
    pub control: Option<f64>,
}

impl BernoulliProfile {
    pub fn depth(&self, x: f64, case: &Case1d) -> Result<f64> {
        let g = case.geometry(x);
        let supercritical = match (self.regime, self.control) {
            (Regime::Transcritical, Some(xc)) => x > xc,
            _ => false,
        };
        bernoulli_depth(g.b, self.discharge / g.sigma, self.energy, self.gravity, supercritical)
    }

    /// `h + b + q²/(2gσ²h²)` for a depth at `x`.
    pub fn energy_at(&self, x: f64, h: f64, case: &Case1d) -> f64 {
        let g = case.geometry(x);
        let u = self.discharge / (g.sigma * h);
        h + g.b + u * u / (2.0 * self.gravity)
    }
}

/// `(q²/g)^{1/3}`.
pub fn critical_depth(q: f64, gravity: f64) -> f64 {
    (q * q / gravity).cbrt()
}

fn bisect(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let f_lo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Root of `h³ + (b − E)h² + q²/(2g) = 0` on the requested branch.
pub fn bernoulli_depth(b: f64, q: f64, energy: f64, gravity: f64, supercritical: bool) -> Result<f64> {
    let k = q * q / (2.0 * gravity);
    let f = |h: f64| h * h * (h + b - energy) + k;
    let head = energy - b;
    if !(head > 0.0) {
        return Err(SolverError::NoRealRoot(format!("energy {energy} below bed {b}")));
    }
    let h_min = 2.0 * head / 3.0;
    let f_min = f(h_min);
    if f_min >= 0.0 {
        // a double root at the critical depth, up to rounding
        if f_min <= 1e-12 * k.max(1.0) {
            return Ok(h_min);
        }
        return Err(SolverError::NoRealRoot(format!("energy {energy} below critical at bed {b}")));
    }
    if k == 0.0 {
        return Ok(if supercritical { 0.0 } else { head });
    }
    Ok(if supercritical { bisect(f, 0.0, h_min) } else { bisect(f, h_min, head) })
}

/// Maximiser of a unimodal-near-the-top function: grid search, then
/// golden-section refinement.
fn argmax(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const N: usize = 20_000;
    let step = (b - a) / N as f64;
    let mut best = (a, f(a));
    for k in 1..=N {
        let x = a + k as f64 * step;
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    let (mut lo, mut hi) = ((best.0 - step).max(a), (best.0 + step).min(b));
    let r = 0.5 * (5f64.sqrt() - 1.0);
    while hi - lo > 1e-12 {
        let x1 = hi - r * (hi - lo);
        let x2 = lo + r * (hi - lo);
        if f(x1) < f(x2) {
            lo = x1;
        } else {
            hi = x2;
        }
    }
    let x = 0.5 * (lo + hi);
    if f(x) >= best.1 {
        x
    } else {
        best.0
    }
}

/// Subcritical root of `u³ + (2gb − 2g − 1)u + 2g = 0` with `hu = 1`;
/// returns `(h, hu)`.
pub fn exact_smooth_subcritical(b: f64, gravity: f64) -> Result<State<2>> {
    let p = 2.0 * gravity * b - 2.0 * gravity - 1.0;
    let c = 2.0 * gravity;
    let f = |u: f64| u * u * u + p * u + c;
    if p >= 0.0 {
        return Err(SolverError::NoRealRoot(format!("no positive root for bed {b}")));
    }
    let u_min = (-p / 3.0).sqrt();
    if f(u_min) > 0.0 {
        return Err(SolverError::NoRealRoot(format!("no subcritical root for bed {b}")));
    }
    let mut u = bisect(f, 0.0, u_min);
    for _ in 0..2 {
        let d = 3.0 * u * u + p;
        if d != 0.0 {
            let next = u - f(u) / d;
            if next > 0.0 && next < u_min {
                u = next;
            }
        }
    }
    Ok(State::<2>::new(1.0 / u, 1.0))
}

/// Downstream state of a straight oblique hydraulic jump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObliqueJump {
    /// Jump angle to the upstream flow, radians.
    pub beta: f64,
    pub depth: f64,
    pub speed: f64,
}

/// Weak-jump solution for a stream of depth `h1` and speed `speed1`
/// deflected by `theta` radians.
pub fn oblique_jump(h1: f64, speed1: f64, theta: f64, gravity: f64) -> Result<ObliqueJump> {
    let froude = speed1 / (gravity * h1).sqrt();
    if !(froude > 1.0) || !(theta > 0.0) {
        return Err(SolverError::NoRealRoot(format!("no oblique jump for Froude {froude}, deflection {theta}")));
    }
    let ratio = |beta: f64| {
        let fnorm = froude * beta.sin();
        0.5 * ((1.0 + 8.0 * fnorm * fnorm).sqrt() - 1.0)
    };
    let phi = |beta: f64| (beta - theta).tan() / beta.tan() - 1.0 / ratio(beta);
    let mach = (1.0 / froude).asin();
    let step = 1e-4;
    let mut lo = mach.max(theta + step);
    let mut beta = None;
    while lo + step < 0.5 * PI {
        if phi(lo) < 0.0 && phi(lo + step) >= 0.0 {
            beta = Some(bisect(phi, lo, lo + step));
            break;
        }
        lo += step;
    }
    let beta = beta.ok_or_else(|| SolverError::NoRealRoot(format!("deflection {theta} exceeds the attached-jump limit")))?;
    Ok(ObliqueJump {
        beta,
        depth: h1 * ratio(beta),
        speed: speed1 * beta.cos() / (beta - theta).cos(),
    })
}

/// Bed profiles of the two-dimensional cases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bottom2d {
    Flat,
    /// `0.4 − 0.2(x² + (y−2)²)` where that radius squared is below 2.
    RoundHump,
}

impl Bottom2d {
    /// `(b, b_x, b_y)`.
    pub fn eval(self, x: f64, y: f64) -> (f64, f64, f64) {
        match self {
            Bottom2d::Flat => (0.0, 0.0, 0.0),
            Bottom2d::RoundHump => {
                let r2 = x * x + (y - 2.0).powi(2);
                if r2 < 2.0 {
                    (0.4 - 0.2 * r2, -0.4 * x, -0.4 * (y - 2.0))
                } else {
                    (0.0, 0.0, 0.0)
                }
            }
        }
    }
}

/// A two-dimensional benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct Case2d {
    pub name: &'static str,
    pub description: &'static str,
    /// `[x_min, x_max, y_min, y_max]`.
    pub domain: [f64; 4],
    pub bottom: Bottom2d,
    pub boundary: BoundarySpec2d<3>,
    /// Uniform initial state: either a still surface at this level with
    /// the given momentum, or the full state.
    pub initial: InitialCondition2d,
    pub characteristic: bool,
    /// The solve is expected to stall before the relative tolerance.
    pub expect_stall: bool,
    pub default_cells: (usize, usize),
    /// Case-specific SOR weight replacing the 2D default.
    pub omega_sor: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition2d {
    /// `h + b = level`, `(hu, hv)` constant.
    FlatSurface { level: f64, hu: f64, hv: f64 },
    Uniform(State<3>),
}

impl Case2d {
    pub fn geometry(&self, x: f64, y: f64) -> Geometry {
        let (b, b_x, b_y) = self.bottom.eval(x, y);
        Geometry {
            b,
            b_x,
            b_y,
            ..Geometry::default()
        }
    }

    pub fn model(&self, gravity: f64) -> ShallowWater2d {
        ShallowWater2d {
            gravity,
            flux: NumericalFlux::Llf,
            characteristic: self.characteristic,
        }
    }

    pub fn mesh(&self, nx: usize, ny: usize) -> Result<Mesh2D> {
        Mesh2D::new(self.domain, nx, ny)
    }

    pub fn scheme(&self, mesh: &Mesh2D, gravity: f64) -> Result<FvScheme2d<3, ShallowWater2d>> {
        FvScheme2d::new(self.model(gravity), *mesh, self.boundary, &|x, y| self.geometry(x, y))
    }

    pub fn initial_state(&self, x: f64, y: f64) -> State<3> {
        match self.initial {
            InitialCondition2d::FlatSurface { level, hu, hv } => State::<3>::new(level - self.geometry(x, y).b, hu, hv),
            InitialCondition2d::Uniform(s) => s,
        }
    }

    /// Cell averages in row-major order (`i` fastest).
    pub fn initial_field(&self, mesh: &Mesh2D) -> Vec<State<3>> {
        let mut out = Vec::with_capacity(mesh.nx * mesh.ny);
        for j in 0..mesh.ny {
            for i in 0..mesh.nx {
                let xs = (mesh.x_min + i as f64 * mesh.dx, mesh.x_min + (i + 1) as f64 * mesh.dx);
                let ys = (mesh.y_min + j as f64 * mesh.dy, mesh.y_min + (j + 1) as f64 * mesh.dy);
                out.push(gauss4_average_2d(xs, ys, |x, y| Ok(self.initial_state(x, y))).expect("initial condition is infallible"));
            }
        }
        out
    }
}

fn wedge_inflow() -> State<3> {
    let a = (-WEDGE_ANGLE_DEG).to_radians();
    State::<3>::new(1.0, WEDGE_INFLOW_SPEED * a.cos(), WEDGE_INFLOW_SPEED * a.sin())
}

/// Exact post-jump `(h, speed)` for the wedge case.
pub fn wedge_exact(gravity: f64) -> Result<(f64, f64)> {
    let jump = oblique_jump(1.0, WEDGE_INFLOW_SPEED, WEDGE_ANGLE_DEG.to_radians(), gravity)?;
    Ok((jump.depth, jump.speed))
}

#[derive(Debug, Clone, PartialEq)]
pub enum CaseSpec {
    OneD(Case1d),
    TwoD(Case2d),
}

impl CaseSpec {
    pub fn name(&self) -> &'static str {
        match self {
            CaseSpec::OneD(c) => c.name,
            CaseSpec::TwoD(c) => c.name,
        }
    }

    pub fn description(&self) -> &'static str {
        match self {
            CaseSpec::OneD(c) => c.description,
            CaseSpec::TwoD(c) => c.description,
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            CaseSpec::OneD(_) => 1,
            CaseSpec::TwoD(_) => 2,
        }
    }
}

fn hump_case(name: &'static str, description: &'static str, q: f64, h_out: f64, regime: Regime, breadth: Breadth) -> Case1d {
    Case1d {
        name,
        description,
        domain: (0.0, 25.0),
        bottom: Bottom1d::Hump,
        breadth,
        channel: breadth != Breadth::Uniform,
        inflow_discharge: q,
        outflow_depth: h_out,
        initial: InitialCondition1d::StillWater,
        oracle: Oracle1d::Bernoulli(regime),
        default_cells: 96,
    }
}

/// All benchmark cases.
pub fn case_registry() -> Vec<CaseSpec> {
    let left = |sigma0| Breadth::Contraction {
        x_l: 3.75,
        x_r: 16.25,
        sigma0,
    };
    let right = |sigma0| Breadth::Contraction {
        x_l: 8.75,
        x_r: 21.25,
        sigma0,
    };
    vec![
        CaseSpec::OneD(Case1d {
            name: "smooth-subcritical",
            description: "smooth subcritical flow over two Gaussian bumps",
            domain: (-10.0, 10.0),
            bottom: Bottom1d::TwoBumps,
            breadth: Breadth::Uniform,
            channel: false,
            inflow_discharge: 1.0,
            outflow_depth: 1.0,
            initial: InitialCondition1d::FlatSurfaceMoving,
            oracle: Oracle1d::SmoothCubic,
            default_cells: 96,
        }),
        CaseSpec::OneD(hump_case(
            "hump-subcritical",
            "subcritical flow over a parabolic hump",
            4.42,
            2.0,
            Regime::Subcritical,
            Breadth::Uniform,
        )),
        CaseSpec::OneD(hump_case(
            "hump-transcritical",
            "transcritical flow without a shock over a parabolic hump",
            1.53,
            0.66,
            Regime::Transcritical,
            Breadth::Uniform,
        )),
        CaseSpec::OneD(hump_case(
            "channel-subcritical-left",
            "subcritical channel flow, contraction on [3.75, 16.25]",
            4.42,
            2.0,
            Regime::Subcritical,
            left(0.05),
        )),
        CaseSpec::OneD(hump_case(
            "channel-subcritical-right",
            "subcritical channel flow, contraction on [8.75, 21.25]",
            4.42,
            2.0,
            Regime::Subcritical,
            right(0.05),
        )),
        CaseSpec::OneD(hump_case(
            "channel-transcritical-left",
            "transcritical channel flow, contraction on [3.75, 16.25]",
            1.53,
            0.66,
            Regime::Transcritical,
            left(0.15),
        )),
        CaseSpec::OneD(hump_case(
            "channel-transcritical-right",
            "transcritical channel flow, contraction on [8.75, 21.25]",
            1.53,
            0.66,
            Regime::Transcritical,
            right(0.15),
        )),
        CaseSpec::TwoD(Case2d {
            name: "swe2d-hump",
            description: "2D flow over a round hump",
            domain: [-4.0, 4.0, 0.0, 4.0],
            bottom: Bottom2d::RoundHump,
            boundary: BoundarySpec2d {
                west: BoundaryCondition::FixedDischarge(1.0),
                east: BoundaryCondition::FixedDepth(1.0),
                // zero normal derivative of h and hu with no flow through the side
                south: BoundaryCondition::ReflectiveWall,
                north: BoundaryCondition::ReflectiveWall,
            },
            initial: InitialCondition2d::FlatSurface {
                level: 1.0,
                hu: 1.0,
                hv: 0.0,
            },
            characteristic: true,
            expect_stall: false,
            default_cells: (64, 32),
            omega_sor: Some(0.3),
        }),
        CaseSpec::TwoD(Case2d {
            name: "wedge",
            description: "oblique hydraulic jump along an 8.95 degree wedge",
            domain: [0.0, 4.0, 0.0, 2.0],
            bottom: Bottom2d::Flat,
            boundary: BoundarySpec2d {
                west: BoundaryCondition::SupercriticalInflow(wedge_inflow()),
                east: BoundaryCondition::ZeroGradient,
                south: BoundaryCondition::ReflectiveWall,
                north: BoundaryCondition::SupercriticalInflow(wedge_inflow()),
            },
            initial: InitialCondition2d::Uniform(wedge_inflow()),
            characteristic: true,
            expect_stall: true,
            default_cells: (64, 32),
            omega_sor: None,
        }),
    ]
}

pub fn find_case(name: &str) -> Result<CaseSpec> {
    case_registry()
        .into_iter()
        .find(|c| c.name() == name)
        .ok_or_else(|| SolverError::UnknownCase(name.to_string()))
}

/// `Σ_j |Ū_j − Ū_j^exact| · measure`, per component.
pub fn l1_error<const D: usize>(field: &[State<D>], exact: &[State<D>], measure: f64) -> Result<State<D>> {
    if field.len() != exact.len() {
        return Err(SolverError::ShapeMismatch {
            expected: exact.len(),
            found: field.len(),
        });
    }
    Ok(field.iter().zip(exact).fold(State::<D>::zeros(), |acc, (u, e)| acc + (u - e).abs()) * measure)
}

/// `log₂(e_coarse / e_fine)`.
pub fn observed_order(e_coarse: f64, e_fine: f64) -> Result<f64> {
    if !(e_coarse > 0.0 && e_fine > 0.0) {
        return Err(SolverError::NonpositiveError {
            coarse: e_coarse,
            fine: e_fine,
        });
    }
    Ok((e_coarse / e_fine).log2())
}

/// `max_j |q_j − q_in|` for the discharge component.
pub fn discharge_constancy(field: &[State<2>], q_in: f64) -> f64 {
    field.iter().map(|u| (u[1] - q_in).abs()).fold(0.0, f64::max)
}

/// `(h, √(u² + v²))` of the cell containing `point`.
pub fn wedge_point_probe(mesh: &Mesh2D, field: &[State<3>], point: (f64, f64)) -> Result<(f64, f64)> {
    let (i, j) = mesh.locate(point.0, point.1).ok_or(SolverError::PointOutsideDomain { x: point.0, y: point.1 })?;
    let u = field.get(j * mesh.nx + i).ok_or(SolverError::ShapeMismatch {
        expected: mesh.nx * mesh.ny,
        found: field.len(),
    })?;
    Ok((u[0], u[1].hypot(u[2]) / u[0]))
}

/// Writes `x,b,h_exact,q_exact` at the cell centres of `mesh`.
pub fn write_oracle_csv<W: Write>(case: &Case1d, mesh: &Mesh1D, gravity: f64, mut out: W) -> std::io::Result<()> {
    let rows = case.oracle_rows(mesh, gravity).map_err(std::io::Error::other)?;
    writeln!(out, "x,b,h_exact,q_exact")?;
    for r in rows {
        writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e}", r[0], r[1], r[2], r[3])?;
    }
    Ok(())
}
