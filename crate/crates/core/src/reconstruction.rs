//! Third-order WENO reconstruction and the in-cell quartic used for
//! source quadrature.
//!
//! The WENO3 building block combines the two linear two-cell
//! reconstructions of a three-cell stencil `(u_m, u_c, u_p)` with
//! nonlinear weights `ω̃_r = d_r / (ε_w + β_r)²`, `β₀ = (u_c − u_m)²`,
//! `β₁ = (u_p − u_c)²`. At the right face (`ξ = +½`) the linear weights
//! are `(1/3, 2/3)`; at interior Gauss points `ξ = ±1/(2√3)` they are
//! `(½, ½)`, which reproduces the three-cell quadratic there.

use std::sync::OnceLock;

use nalgebra::SMatrix;

use crate::error::Result;
use crate::model::{Geometry, Model, State};

/// Regulariser of the nonlinear weights.
pub const WENO_EPS: f64 = 1e-6;

/// Two-point Gauss–Legendre rule on the unit cell `ξ ∈ [−½, ½]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussRule {
    pub nodes: [f64; 2],
    pub weights: [f64; 2],
}

/// `1 / (2√3)`.
pub const GAUSS_OFFSET: f64 = 0.288_675_134_594_812_9;

pub const GAUSS2: GaussRule = GaussRule {
    nodes: [-GAUSS_OFFSET, GAUSS_OFFSET],
    weights: [0.5, 0.5],
};

#[inline]
fn nonlinear_weights(d0: f64, beta0: f64, d1: f64, beta1: f64) -> (f64, f64) {
    let a0 = d0 / ((WENO_EPS + beta0) * (WENO_EPS + beta0));
    let a1 = d1 / ((WENO_EPS + beta1) * (WENO_EPS + beta1));
    let s = a0 + a1;
    (a0 / s, a1 / s)
}

/// Left-limit trace `U⁻` at the right face of the centre cell.
#[inline]
pub fn weno3_minus(u_m: f64, u_c: f64, u_p: f64) -> f64 {
    // candidates u_c + ½(u_c − u_m) and u_c + ½(u_p − u_c), kept in
    // increment form so constant data is reproduced bit for bit
    let (dl, dr) = (u_c - u_m, u_p - u_c);
    let (w0, w1) = nonlinear_weights(1.0 / 3.0, dl * dl, 2.0 / 3.0, dr * dr);
    u_c + 0.5 * (w0 * dl + w1 * dr)
}

/// Right-limit trace `U⁺` at the left face of the centre cell (mirror of
/// [`weno3_minus`]).
#[inline]
pub fn weno3_plus(u_m: f64, u_c: f64, u_p: f64) -> f64 {
    weno3_minus(u_p, u_c, u_m)
}

/// `(U⁺ at the left face, U⁻ at the right face)` of the centre cell.
#[inline]
pub fn weno3_pair(u_m: f64, u_c: f64, u_p: f64) -> (f64, f64) {
    (weno3_plus(u_m, u_c, u_p), weno3_minus(u_m, u_c, u_p))
}

/// Point value at the interior Gauss node `ξ = ±1/(2√3)` (`upper` selects
/// the sign).
#[inline]
pub fn weno3_gauss(u_m: f64, u_c: f64, u_p: f64, upper: bool) -> f64 {
    let xi = if upper { GAUSS_OFFSET } else { -GAUSS_OFFSET };
    let (dl, dr) = (u_c - u_m, u_p - u_c);
    let (w0, w1) = nonlinear_weights(0.5, dl * dl, 0.5, dr * dr);
    u_c + xi * (w0 * dl + w1 * dr)
}

#[inline]
pub fn weno3_minus_state<const D: usize>(m: &State<D>, c: &State<D>, p: &State<D>) -> State<D> {
    State::<D>::from_fn(|k, _| weno3_minus(m[k], c[k], p[k]))
}

#[inline]
pub fn weno3_plus_state<const D: usize>(m: &State<D>, c: &State<D>, p: &State<D>) -> State<D> {
    State::<D>::from_fn(|k, _| weno3_plus(m[k], c[k], p[k]))
}

#[inline]
pub fn weno3_gauss_state<const D: usize>(m: &State<D>, c: &State<D>, p: &State<D>, upper: bool) -> State<D> {
    State::<D>::from_fn(|k, _| weno3_gauss(m[k], c[k], p[k], upper))
}

/// Reconstructed one-sided states at a set of interface points.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceStates<const D: usize> {
    pub minus: Vec<State<D>>,
    pub plus: Vec<State<D>>,
}

/// Nodes of the quartic's interpolation conditions.
const POLY_NODES: [f64; 4] = [-1.5, -0.5, 0.5, 1.5];

/// Inverse of the 5×5 interpolation matrix mapping coefficients to
/// `(p(−3/2), p(−1/2), p(½), p(3/2), mean over [−½, ½])`.
fn interpolation_inverse() -> &'static SMatrix<f64, 5, 5> {
    static INV: OnceLock<SMatrix<f64, 5, 5>> = OnceLock::new();
    INV.get_or_init(|| {
        let mut a = SMatrix::<f64, 5, 5>::zeros();
        for (r, &xi) in POLY_NODES.iter().enumerate() {
            for k in 0..5 {
                a[(r, k)] = xi.powi(k as i32);
            }
        }
        // ∫_{-1/2}^{1/2} ξ^k dξ
        a[(4, 0)] = 1.0;
        a[(4, 2)] = 1.0 / 12.0;
        a[(4, 4)] = 1.0 / 80.0;
        a.try_inverse().expect("quartic interpolation system is nonsingular")
    })
}

/// Weights giving the quartic's values at the two Gauss nodes directly
/// from the five interpolation data.
fn gauss_evaluation_weights() -> &'static [[f64; 5]; 2] {
    static W: OnceLock<[[f64; 5]; 2]> = OnceLock::new();
    W.get_or_init(|| {
        let inv = interpolation_inverse();
        let mut out = [[0.0; 5]; 2];
        for (g, &xi) in GAUSS2.nodes.iter().enumerate() {
            for (d, slot) in out[g].iter_mut().enumerate() {
                *slot = (0..5).map(|k| xi.powi(k as i32) * inv[(k, d)]).sum();
            }
        }
        out
    })
}

/// Quartic in the scaled coordinate `ξ = (x − x_j)/Δx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellPolynomial {
    /// Monomial coefficients, lowest degree first.
    pub coefficients: [f64; 5],
}

impl CellPolynomial {
    pub fn eval(&self, xi: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * xi + c)
    }

    /// Mean over `ξ ∈ [−½, ½]`.
    pub fn mean(&self) -> f64 {
        let c = &self.coefficients;
        c[0] + c[2] / 12.0 + c[4] / 80.0
    }
}

/// Quartic matching the traces at `ξ = −3/2, −1/2, ½, 3/2` and the cell
/// average.
pub fn build_cell_polynomial(trace_mm: f64, trace_m: f64, trace_p: f64, trace_pp: f64, cell_avg: f64) -> CellPolynomial {
    let rhs = nalgebra::SVector::<f64, 5>::from([trace_mm, trace_m, trace_p, trace_pp, cell_avg]);
    let c = interpolation_inverse() * rhs;
    CellPolynomial {
        coefficients: [c[0], c[1], c[2], c[3], c[4]],
    }
}

/// Values of the interpolating quartic at the two Gauss nodes, per
/// component, without forming the coefficients.
#[inline]
pub fn quartic_at_gauss_nodes<const D: usize>(data: [&State<D>; 5]) -> [State<D>; 2] {
    let w = gauss_evaluation_weights();
    let eval = |g: usize| {
        let mut out = State::<D>::zeros();
        for (k, d) in data.iter().enumerate() {
            out += *d * w[g][k];
        }
        out
    };
    [eval(0), eval(1)]
}

/// `S_j = Δx Σ_β ω_β S(U_h(ξ_β))` with the in-cell quartic built from the
/// four traces `[U⁺_{j−3/2}, U⁺_{j−1/2}, U⁻_{j+1/2}, U⁻_{j+3/2}]` and the
/// cell average.
pub fn source_integral_1d<const D: usize, M: Model<D> + ?Sized>(
    model: &M,
    dx: f64,
    traces: [&State<D>; 4],
    average: &State<D>,
    gauss_geometry: &[Geometry; 2],
) -> Result<State<D>> {
    let at_nodes = quartic_at_gauss_nodes([traces[0], traces[1], traces[2], traces[3], average]);
    let mut total = State::<D>::zeros();
    for g in 0..2 {
        total += model.source_density(&at_nodes[g], &gauss_geometry[g])? * GAUSS2.weights[g];
    }
    Ok(total * dx)
}
