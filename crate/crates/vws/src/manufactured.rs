//! Closed-form fields used by the recipes.

use std::f64::consts::PI;

use vws_core::{BoundaryData, Side, StaggeredGrid};

/// Curl of `s(x)s(y)` with `s = sin²(πt)`; vanishes on Γ.
pub fn bump_velocity(x: f64, y: f64) -> [f64; 2] {
    let s = |t: f64| (PI * t).sin().powi(2);
    let ds = |t: f64| PI * (2.0 * PI * t).sin();
    [s(x) * ds(y), -ds(x) * s(y)]
}

/// `-Δu + ∇p` for [`bump_velocity`] with `p = cos(πx)cos(πy)`.
pub fn bump_force(x: f64, y: f64) -> [f64; 2] {
    let s = |t: f64| (PI * t).sin().powi(2);
    let ds = |t: f64| PI * (2.0 * PI * t).sin();
    let dds = |t: f64| 2.0 * PI * PI * (2.0 * PI * t).cos();
    let ddds = |t: f64| -4.0 * PI.powi(3) * (2.0 * PI * t).sin();
    let lap1 = dds(x) * ds(y) + s(x) * ddds(y);
    let lap2 = -(ddds(x) * s(y) + ds(x) * dds(y));
    [-lap1 - PI * (PI * x).sin() * (PI * y).cos(), -lap2 - PI * (PI * x).cos() * (PI * y).sin()]
}

/// Rigid rotation about the centre; `u·τ = ½` on every side.
pub fn rotation(grid: StaggeredGrid) -> BoundaryData {
    BoundaryData::from_fn(grid, |_, x, y| [0.5 - y, x - 0.5])
}

/// Exact Stokes pair `u = (x², -2xy)`, `p = 2x`.
pub fn polynomial(grid: StaggeredGrid) -> BoundaryData {
    BoundaryData::from_fn(grid, |_, x, y| [x * x, -2.0 * x * y])
}

pub fn polynomial_trace(side: Side, c: f64) -> f64 {
    let (x, y) = side.point(c);
    let t = side.tangent();
    x * x * t[0] - 2.0 * x * y * t[1]
}
