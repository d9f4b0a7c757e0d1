//! Balance-law models: physical fluxes, source densities, wave speeds,
//! eigenstructure and the two-state numerical fluxes built on them.
//!
//! Three models are provided:
//!
//! * [`ShallowWater1d`] with state `(h, hu)`,
//! * [`ChannelFlow1d`] with state `(H, Q) = (σh, σhu)` for rectangular
//!   channels of variable breadth `σ(x)`,
//! * [`ShallowWater2d`] with state `(h, hu, hv)`.
//!
//! All evaluators are pure functions of the state and the local
//! [`Geometry`].

use nalgebra::{SMatrix, SVector};

use crate::error::{Result, SolverError};

/// Default gravitational acceleration.
pub const DEFAULT_GRAVITY: f64 = 9.81;

pub type State<const D: usize> = SVector<f64, D>;
pub type Block<const D: usize> = SMatrix<f64, D, D>;

/// Coordinate direction of a flux or face normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
}

/// Bed and channel data at one evaluation point. Slopes are the exact
/// analytic derivatives of the case's bottom and breadth functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub b: f64,
    pub b_x: f64,
    pub b_y: f64,
    /// Channel breadth; 1 for plain shallow water.
    pub sigma: f64,
    pub sigma_x: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            b: 0.0,
            b_x: 0.0,
            b_y: 0.0,
            sigma: 1.0,
            sigma_x: 0.0,
        }
    }
}

impl Geometry {
    pub fn flat() -> Self {
        Self::default()
    }

    pub fn with_slope(b_x: f64) -> Self {
        Self {
            b_x,
            ..Self::default()
        }
    }
}

/// Two-state interface flux.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NumericalFlux {
    Hll,
    Llf,
}

impl std::fmt::Display for NumericalFlux {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NumericalFlux::Hll => f.write_str("hll"),
            NumericalFlux::Llf => f.write_str("llf"),
        }
    }
}

/// A hyperbolic balance law `F(U)_x [+ G(U)_y] = S(U)` with `D` conserved
/// components.
pub trait Model<const D: usize>: Send + Sync + std::fmt::Debug {
    fn gravity(&self) -> f64;

    fn numerical_flux_kind(&self) -> NumericalFlux;

    /// Whether WENO reconstruction runs on characteristic variables.
    fn characteristic(&self) -> bool;

    /// Water depth carried by `u` (for channels `H / σ`).
    fn depth(&self, u: &State<D>, geom: &Geometry) -> f64;

    /// Component holding the momentum normal to `axis`.
    fn momentum_index(&self, axis: Axis) -> usize;

    fn physical_flux(&self, u: &State<D>, geom: &Geometry, axis: Axis) -> Result<State<D>>;

    fn source_density(&self, u: &State<D>, geom: &Geometry) -> Result<State<D>>;

    /// Smallest and largest eigenvalue of the flux Jacobian along `axis`.
    fn wave_speeds(&self, u: &State<D>, geom: &Geometry, axis: Axis) -> Result<(f64, f64)>;

    /// Left (rows) and right (columns) eigenvectors of the flux Jacobian
    /// along `axis`, with `left * right = I`.
    fn eigenbasis(&self, u: &State<D>, geom: &Geometry, axis: Axis) -> Result<(Block<D>, Block<D>)>;
}

#[inline]
fn positive_depth(h: f64) -> Result<f64> {
    if h > 0.0 && h.is_finite() {
        Ok(h)
    } else {
        Err(SolverError::NonpositiveDepth {
            cell: None,
            depth: h,
        })
    }
}

/// Eigenvectors of the 2×2 system `[[0, 1], [c² − u², 2u]]`.
fn eigenbasis_2x2(u: f64, c: f64) -> (Block<2>, Block<2>) {
    let inv = 0.5 / c;
    let left = Block::<2>::new((u + c) * inv, -inv, -(u - c) * inv, inv);
    let right = Block::<2>::new(1.0, 1.0, u - c, u + c);
    (left, right)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShallowWater1d {
    pub gravity: f64,
    pub flux: NumericalFlux,
    pub characteristic: bool,
}

impl Default for ShallowWater1d {
    fn default() -> Self {
        Self {
            gravity: DEFAULT_GRAVITY,
            flux: NumericalFlux::Hll,
            characteristic: false,
        }
    }
}

impl Model<2> for ShallowWater1d {
    fn gravity(&self) -> f64 {
        self.gravity
    }

    fn numerical_flux_kind(&self) -> NumericalFlux {
        self.flux
    }

    fn characteristic(&self) -> bool {
        self.characteristic
    }

    fn depth(&self, u: &State<2>, _geom: &Geometry) -> f64 {
        u[0]
    }

    fn momentum_index(&self, _axis: Axis) -> usize {
        1
    }

    fn physical_flux(&self, u: &State<2>, _geom: &Geometry, _axis: Axis) -> Result<State<2>> {
        let h = positive_depth(u[0])?;
        let q = u[1];
        Ok(State::<2>::new(q, q * q / h + 0.5 * self.gravity * h * h))
    }

    fn source_density(&self, u: &State<2>, geom: &Geometry) -> Result<State<2>> {
        let h = positive_depth(u[0])?;
        Ok(State::<2>::new(0.0, -self.gravity * h * geom.b_x))
    }

    fn wave_speeds(&self, u: &State<2>, _geom: &Geometry, _axis: Axis) -> Result<(f64, f64)> {
        let h = positive_depth(u[0])?;
        let vel = u[1] / h;
        let c = (self.gravity * h).sqrt();
        Ok((vel - c, vel + c))
    }

    fn eigenbasis(&self, u: &State<2>, _geom: &Geometry, _axis: Axis) -> Result<(Block<2>, Block<2>)> {
        let h = u[0];
        if !(h > 0.0) {
            return Err(SolverError::SingularEigenbasis { depth: h });
        }
        Ok(eigenbasis_2x2(u[1] / h, (self.gravity * h).sqrt()))
    }
}

/// Open-channel flow in a rectangular channel of breadth `σ(x)`; state
/// `(H, Q)` with wet cross-section `H = σh` and discharge `Q = σhu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelFlow1d {
    pub gravity: f64,
    pub flux: NumericalFlux,
    pub characteristic: bool,
}

impl Default for ChannelFlow1d {
    fn default() -> Self {
        Self {
            gravity: DEFAULT_GRAVITY,
            flux: NumericalFlux::Hll,
            characteristic: false,
        }
    }
}

impl Model<2> for ChannelFlow1d {
    fn gravity(&self) -> f64 {
        self.gravity
    }

    fn numerical_flux_kind(&self) -> NumericalFlux {
        self.flux
    }

    fn characteristic(&self) -> bool {
        self.characteristic
    }

    fn depth(&self, u: &State<2>, geom: &Geometry) -> f64 {
        u[0] / geom.sigma
    }

    fn momentum_index(&self, _axis: Axis) -> usize {
        1
    }

    fn physical_flux(&self, u: &State<2>, geom: &Geometry, _axis: Axis) -> Result<State<2>> {
        let area = u[0];
        let h = positive_depth(area / geom.sigma)?;
        let q = u[1];
        Ok(State::<2>::new(
            q,
            q * q / area + 0.5 * self.gravity * geom.sigma * h * h,
        ))
    }

    fn source_density(&self, u: &State<2>, geom: &Geometry) -> Result<State<2>> {
        let h = positive_depth(u[0] / geom.sigma)?;
        let g = self.gravity;
        Ok(State::<2>::new(
            0.0,
            0.5 * g * h * h * geom.sigma_x - g * geom.sigma * h * geom.b_x,
        ))
    }

    fn wave_speeds(&self, u: &State<2>, geom: &Geometry, _axis: Axis) -> Result<(f64, f64)> {
        let h = positive_depth(u[0] / geom.sigma)?;
        let vel = u[1] / u[0];
        let c = (self.gravity * h).sqrt();
        Ok((vel - c, vel + c))
    }

    fn eigenbasis(&self, u: &State<2>, geom: &Geometry, _axis: Axis) -> Result<(Block<2>, Block<2>)> {
        let h = u[0] / geom.sigma;
        if !(h > 0.0) {
            return Err(SolverError::SingularEigenbasis { depth: h });
        }
        Ok(eigenbasis_2x2(u[1] / u[0], (self.gravity * h).sqrt()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShallowWater2d {
    pub gravity: f64,
    pub flux: NumericalFlux,
    pub characteristic: bool,
}

impl Default for ShallowWater2d {
    fn default() -> Self {
        Self {
            gravity: DEFAULT_GRAVITY,
            flux: NumericalFlux::Llf,
            characteristic: false,
        }
    }
}

impl ShallowWater2d {
    /// (normal, tangential) momentum indices for `axis`.
    #[inline]
    fn frame(axis: Axis) -> (usize, usize) {
        match axis {
            Axis::X => (1, 2),
            Axis::Y => (2, 1),
        }
    }
}

impl Model<3> for ShallowWater2d {
    fn gravity(&self) -> f64 {
        self.gravity
    }

    fn numerical_flux_kind(&self) -> NumericalFlux {
        self.flux
    }

    fn characteristic(&self) -> bool {
        self.characteristic
    }

    fn depth(&self, u: &State<3>, _geom: &Geometry) -> f64 {
        u[0]
    }

    fn momentum_index(&self, axis: Axis) -> usize {
        Self::frame(axis).0
    }

    fn physical_flux(&self, u: &State<3>, _geom: &Geometry, axis: Axis) -> Result<State<3>> {
        let h = positive_depth(u[0])?;
        let (n, t) = Self::frame(axis);
        let un = u[n] / h;
        let mut f = State::<3>::zeros();
        f[0] = u[n];
        f[n] = u[n] * un + 0.5 * self.gravity * h * h;
        f[t] = u[t] * un;
        Ok(f)
    }

    fn source_density(&self, u: &State<3>, geom: &Geometry) -> Result<State<3>> {
        let h = positive_depth(u[0])?;
        let gh = self.gravity * h;
        Ok(State::<3>::new(0.0, -gh * geom.b_x, -gh * geom.b_y))
    }

    fn wave_speeds(&self, u: &State<3>, _geom: &Geometry, axis: Axis) -> Result<(f64, f64)> {
        let h = positive_depth(u[0])?;
        let un = u[Self::frame(axis).0] / h;
        let c = (self.gravity * h).sqrt();
        Ok((un - c, un + c))
    }

    fn eigenbasis(&self, u: &State<3>, _geom: &Geometry, axis: Axis) -> Result<(Block<3>, Block<3>)> {
        let h = u[0];
        if !(h > 0.0) {
            return Err(SolverError::SingularEigenbasis { depth: h });
        }
        let (n, t) = Self::frame(axis);
        let un = u[n] / h;
        let ut = u[t] / h;
        let c = (self.gravity * h).sqrt();
        let inv = 0.5 / c;

        let mut right = Block::<3>::zeros();
        right[(0, 0)] = 1.0;
        right[(n, 0)] = un - c;
        right[(t, 0)] = ut;
        right[(t, 1)] = 1.0;
        right[(0, 2)] = 1.0;
        right[(n, 2)] = un + c;
        right[(t, 2)] = ut;

        let mut left = Block::<3>::zeros();
        left[(0, 0)] = (un + c) * inv;
        left[(0, n)] = -inv;
        left[(1, 0)] = -ut;
        left[(1, t)] = 1.0;
        left[(2, 0)] = -(un - c) * inv;
        left[(2, n)] = inv;
        Ok((left, right))
    }
}

/// One-dimensional flow model chosen at run time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model1d {
    ShallowWater(ShallowWater1d),
    Channel(ChannelFlow1d),
}

impl Model1d {
    fn inner(&self) -> &dyn Model<2> {
        match self {
            Model1d::ShallowWater(m) => m,
            Model1d::Channel(m) => m,
        }
    }

    pub fn set_characteristic(&mut self, on: bool) {
        match self {
            Model1d::ShallowWater(m) => m.characteristic = on,
            Model1d::Channel(m) => m.characteristic = on,
        }
    }
}

impl Model<2> for Model1d {
    fn gravity(&self) -> f64 {
        self.inner().gravity()
    }

    fn numerical_flux_kind(&self) -> NumericalFlux {
        self.inner().numerical_flux_kind()
    }

    fn characteristic(&self) -> bool {
        self.inner().characteristic()
    }

    fn depth(&self, u: &State<2>, geom: &Geometry) -> f64 {
        self.inner().depth(u, geom)
    }

    fn momentum_index(&self, axis: Axis) -> usize {
        self.inner().momentum_index(axis)
    }

    fn physical_flux(&self, u: &State<2>, geom: &Geometry, axis: Axis) -> Result<State<2>> {
        self.inner().physical_flux(u, geom, axis)
    }

    fn source_density(&self, u: &State<2>, geom: &Geometry) -> Result<State<2>> {
        self.inner().source_density(u, geom)
    }

    fn wave_speeds(&self, u: &State<2>, geom: &Geometry, axis: Axis) -> Result<(f64, f64)> {
        self.inner().wave_speeds(u, geom, axis)
    }

    fn eigenbasis(&self, u: &State<2>, geom: &Geometry, axis: Axis) -> Result<(Block<2>, Block<2>)> {
        self.inner().eigenbasis(u, geom, axis)
    }
}

/// HLL flux with the simple two-state speed estimates
/// `S_L = min(λ_min(U_L), λ_min(U_R))`, `S_R = max(λ_max(U_L), λ_max(U_R))`.
pub fn hll_flux<const D: usize, M: Model<D> + ?Sized>(
    model: &M,
    left: &State<D>,
    right: &State<D>,
    geom: &Geometry,
    axis: Axis,
) -> Result<State<D>> {
    let (l_min, l_max) = model.wave_speeds(left, geom, axis)?;
    let (r_min, r_max) = model.wave_speeds(right, geom, axis)?;
    let s_left = l_min.min(r_min);
    let s_right = l_max.max(r_max);
    if s_left >= 0.0 {
        return model.physical_flux(left, geom, axis);
    }
    if s_right <= 0.0 {
        return model.physical_flux(right, geom, axis);
    }
    let span = s_right - s_left;
    if !(span > f64::MIN_POSITIVE) {
        return Err(SolverError::DegenerateSpeeds { s_left, s_right });
    }
    let f_left = model.physical_flux(left, geom, axis)?;
    let f_right = model.physical_flux(right, geom, axis)?;
    Ok((f_left * s_right - f_right * s_left + (right - left) * (s_left * s_right)) / span)
}

/// Local Lax–Friedrichs flux `½(F_L + F_R) − ½a(U_R − U_L)`, where `a`
/// bounds the wave speeds of both states.
pub fn llf_flux<const D: usize, M: Model<D> + ?Sized>(
    model: &M,
    left: &State<D>,
    right: &State<D>,
    geom: &Geometry,
    axis: Axis,
) -> Result<State<D>> {
    let (l_min, l_max) = model.wave_speeds(left, geom, axis)?;
    let (r_min, r_max) = model.wave_speeds(right, geom, axis)?;
    let a = l_min.abs().max(l_max.abs()).max(r_min.abs()).max(r_max.abs());
    let f_left = model.physical_flux(left, geom, axis)?;
    let f_right = model.physical_flux(right, geom, axis)?;
    Ok((f_left + f_right) * 0.5 - (right - left) * (0.5 * a))
}

/// The model's configured numerical flux.
#[inline]
pub fn numerical_flux<const D: usize, M: Model<D> + ?Sized>(
    model: &M,
    left: &State<D>,
    right: &State<D>,
    geom: &Geometry,
    axis: Axis,
) -> Result<State<D>> {
    match model.numerical_flux_kind() {
        NumericalFlux::Hll => hll_flux(model, left, right, geom, axis),
        NumericalFlux::Llf => llf_flux(model, left, right, geom, axis),
    }
}

/// Projects `values` onto the characteristic variables of the flux
/// Jacobian at `reference`.
pub fn characteristic_transform<const D: usize, M: Model<D> + ?Sized>(
    model: &M,
    reference: &State<D>,
    geom: &Geometry,
    axis: Axis,
    values: &[State<D>],
) -> Result<Vec<State<D>>> {
    let (left, _) = model.eigenbasis(reference, geom, axis)?;
    Ok(values.iter().map(|v| left * v).collect())
}

/// Inverse of [`characteristic_transform`].
pub fn characteristic_inverse<const D: usize, M: Model<D> + ?Sized>(
    model: &M,
    reference: &State<D>,
    geom: &Geometry,
    axis: Axis,
    values: &[State<D>],
) -> Result<Vec<State<D>>> {
    let (_, right) = model.eigenbasis(reference, geom, axis)?;
    Ok(values.iter().map(|w| right * w).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const G: f64 = 9.81;

    fn swe() -> ShallowWater1d {
        ShallowWater1d::default()
    }

    #[test]
    fn swe_flux_examples() {
        let geom = Geometry::flat();
        let f = swe().physical_flux(&State::<2>::new(1.0, 1.0), &geom, Axis::X).unwrap();
        assert_relative_eq!(f[0], 1.0);
        assert_relative_eq!(f[1], 5.905, epsilon = 1e-12);
        let f = swe().physical_flux(&State::<2>::new(2.0, 0.0), &geom, Axis::X).unwrap();
        assert_eq!(f[0], 0.0);
        assert_relative_eq!(f[1], 19.62, epsilon = 1e-12);
    }

    #[test]
    fn channel_with_unit_breadth_matches_swe() {
        let ch = ChannelFlow1d::default();
        for (u, geom) in [
            (State::<2>::new(1.0, 1.0), Geometry::flat()),
            (State::<2>::new(0.7, -0.3), Geometry::with_slope(0.25)),
        ] {
            assert_eq!(
                ch.physical_flux(&u, &geom, Axis::X).unwrap(),
                swe().physical_flux(&u, &geom, Axis::X).unwrap()
            );
            assert_eq!(
                ch.source_density(&u, &geom).unwrap(),
                swe().source_density(&u, &geom).unwrap()
            );
        }
    }

    #[test]
    fn flux_rejects_dry_states() {
        let err = swe()
            .physical_flux(&State::<2>::new(0.0, 1.0), &Geometry::flat(), Axis::X)
            .unwrap_err();
        assert!(matches!(err, SolverError::NonpositiveDepth { .. }));
        let ch = ChannelFlow1d::default();
        assert!(ch.source_density(&State::<2>::new(-1.0, 0.0), &Geometry::flat()).is_err());
    }

    #[test]
    fn source_examples() {
        let u = State::<2>::new(1.3, 0.4);
        assert_eq!(swe().source_density(&u, &Geometry::flat()).unwrap(), State::<2>::zeros());

        let s = swe()
            .source_density(&State::<2>::new(1.0, 0.0), &Geometry::with_slope(0.1))
            .unwrap();
        assert_eq!(s[0], 0.0);
        assert_relative_eq!(s[1], -0.981, epsilon = 1e-14);

        let geom = Geometry {
            sigma_x: 0.2,
            ..Geometry::flat()
        };
        let s = ChannelFlow1d::default()
            .source_density(&State::<2>::new(1.0, 0.0), &geom)
            .unwrap();
        assert_relative_eq!(s[1], 0.981, epsilon = 1e-14);
    }

    #[test]
    fn wave_speed_examples() {
        let root = G.sqrt();
        let (a, b) = swe()
            .wave_speeds(&State::<2>::new(1.0, 0.0), &Geometry::flat(), Axis::X)
            .unwrap();
        assert_relative_eq!(a, -3.132091952673165, epsilon = 1e-12);
        assert_relative_eq!(b, root, epsilon = 1e-15);
        let (a, b) = swe()
            .wave_speeds(&State::<2>::new(1.0, 1.0), &Geometry::flat(), Axis::X)
            .unwrap();
        assert_relative_eq!(a, 1.0 - root);
        assert_relative_eq!(b, 1.0 + root);

        let m = ShallowWater2d::default();
        let (a, b) = m
            .wave_speeds(&State::<3>::new(1.0, 5.0, 0.0), &Geometry::flat(), Axis::Y)
            .unwrap();
        assert_relative_eq!(a, -root);
        assert_relative_eq!(b, root);
    }

    #[test]
    fn hll_consistency_and_upwinding() {
        let u = State::<2>::new(1.0, 1.0);
        let f = hll_flux(&swe(), &u, &u, &Geometry::flat(), Axis::X).unwrap();
        assert_relative_eq!(f[1], 5.905, epsilon = 1e-12);

        // Froude 3 on both sides: every wave travels right.
        let left = State::<2>::new(1.0, 3.0 * G.sqrt());
        let right = State::<2>::new(1.1, 3.0 * G.sqrt());
        let f = hll_flux(&swe(), &left, &right, &Geometry::flat(), Axis::X).unwrap();
        assert_eq!(f, swe().physical_flux(&left, &Geometry::flat(), Axis::X).unwrap());
    }

    #[test]
    fn hll_middle_branch_matches_hand_evaluation() {
        // U_L = (1, 0), U_R = (2, 0): S_L = -√(2g), S_R = √(2g).
        let s_r = (2.0 * G).sqrt();
        let s_l = -s_r;
        let f_l = [0.0, 0.5 * G];
        let f_r = [0.0, 2.0 * G];
        let du = [1.0, 0.0];
        let expect: Vec<f64> = (0..2)
            .map(|k| (s_r * f_l[k] - s_l * f_r[k] + s_l * s_r * du[k]) / (s_r - s_l))
            .collect();
        let f = hll_flux(
            &swe(),
            &State::<2>::new(1.0, 0.0),
            &State::<2>::new(2.0, 0.0),
            &Geometry::flat(),
            Axis::X,
        )
        .unwrap();
        assert_relative_eq!(f[0], expect[0], epsilon = 1e-14);
        assert_relative_eq!(f[1], expect[1], epsilon = 1e-14);
        // mass flux: −S_L S_R / (S_R − S_L) = √(2g)/2
        assert_relative_eq!(f[0], -s_r / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn llf_examples() {
        let u = State::<2>::new(0.8, -0.4);
        let f = llf_flux(&swe(), &u, &u, &Geometry::flat(), Axis::X).unwrap();
        assert_eq!(f, swe().physical_flux(&u, &Geometry::flat(), Axis::X).unwrap());

        let m = ShallowWater2d::default();
        let still = State::<3>::new(1.0, 0.0, 0.0);
        let f = llf_flux(&m, &still, &still, &Geometry::flat(), Axis::X).unwrap();
        assert_eq!(f[0], 0.0);
        assert_relative_eq!(f[1], 4.905, epsilon = 1e-14);
        assert_eq!(f[2], 0.0);

        let left = State::<2>::new(1.0, 1.0);
        let right = State::<2>::new(2.0, 1.0);
        let a = (1.0 + G.sqrt()).max(0.5 + (2.0 * G).sqrt());
        let fl = [1.0, 1.0 + 0.5 * G];
        let fr = [1.0, 0.5 + 2.0 * G];
        let f = llf_flux(&swe(), &left, &right, &Geometry::flat(), Axis::X).unwrap();
        assert_relative_eq!(f[0], 0.5 * (fl[0] + fr[0]) - 0.5 * a * 1.0, epsilon = 1e-14);
        assert_relative_eq!(f[1], 0.5 * (fl[1] + fr[1]), epsilon = 1e-14);
    }

    #[test]
    fn swe2d_y_flux_swaps_roles() {
        let m = ShallowWater2d::default();
        let u = State::<3>::new(2.0, 1.0, 3.0);
        let fy = m.physical_flux(&u, &Geometry::flat(), Axis::Y).unwrap();
        assert_relative_eq!(fy[0], 3.0);
        assert_relative_eq!(fy[1], 1.0 * 3.0 / 2.0);
        assert_relative_eq!(fy[2], 9.0 / 2.0 + 0.5 * G * 4.0);
    }

    /// Eigen-decomposition of a finite-difference flux Jacobian.
    fn fd_jacobian_2x2(m: &ShallowWater1d, u: &State<2>) -> Block<2> {
        let geom = Geometry::flat();
        let f0 = m.physical_flux(u, &geom, Axis::X).unwrap();
        let eps = 1e-7;
        let mut jac = Block::<2>::zeros();
        for k in 0..2 {
            let mut up = *u;
            up[k] += eps;
            let df = (m.physical_flux(&up, &geom, Axis::X).unwrap() - f0) / eps;
            jac.set_column(k, &df);
        }
        jac
    }

    #[test]
    fn characteristic_variables_diagonalise_the_fd_jacobian() {
        let m = swe();
        let reference = State::<2>::new(1.0, 0.0);
        let jac = fd_jacobian_2x2(&m, &reference);
        let (left, right) = m.eigenbasis(&reference, &Geometry::flat(), Axis::X).unwrap();
        let diag = left * jac * right;
        assert_relative_eq!(diag[(0, 1)], 0.0, epsilon = 1e-5);
        assert_relative_eq!(diag[(1, 0)], 0.0, epsilon = 1e-5);
        assert_relative_eq!(diag[(0, 0)], -G.sqrt(), epsilon = 1e-5);
        assert_relative_eq!(diag[(1, 1)], G.sqrt(), epsilon = 1e-5);

        // (δh, δ(hu)) = (1, 0) splits evenly across both families.
        let w = characteristic_transform(&m, &reference, &Geometry::flat(), Axis::X, &[State::<2>::new(1.0, 0.0)])
            .unwrap();
        assert_relative_eq!(w[0][0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(w[0][1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn characteristic_of_constant_sequence_is_constant() {
        let m = ShallowWater2d::default();
        let reference = State::<3>::new(1.2, 0.3, -0.1);
        let values = vec![State::<3>::new(0.9, 0.2, 0.4); 4];
        let w = characteristic_transform(&m, &reference, &Geometry::flat(), Axis::Y, &values).unwrap();
        assert!(w.windows(2).all(|p| p[0] == p[1]));
    }

    #[test]
    fn eigenbasis_rejects_dry_reference() {
        let m = ShallowWater2d::default();
        assert!(matches!(
            m.eigenbasis(&State::<3>::new(0.0, 0.0, 0.0), &Geometry::flat(), Axis::X),
            Err(SolverError::SingularEigenbasis { .. })
        ));
    }

    #[test]
    fn eigenbasis_2d_diagonalises_both_directions() {
        let m = ShallowWater2d::default();
        let u = State::<3>::new(1.5, 0.6, -0.9);
        let geom = Geometry::flat();
        for axis in [Axis::X, Axis::Y] {
            let f0 = m.physical_flux(&u, &geom, axis).unwrap();
            let mut jac = Block::<3>::zeros();
            for k in 0..3 {
                let mut up = u;
                up[k] += 1e-7;
                jac.set_column(k, &((m.physical_flux(&up, &geom, axis).unwrap() - f0) / 1e-7));
            }
            let (left, right) = m.eigenbasis(&u, &geom, axis).unwrap();
            assert_relative_eq!(left * right, Block::<3>::identity(), epsilon = 1e-14);
            let d = left * jac * right;
            for r in 0..3 {
                for c in 0..3 {
                    if r != c {
                        assert!(d[(r, c)].abs() < 1e-5, "{axis:?} {d}");
                    }
                }
            }
        }
    }
}
