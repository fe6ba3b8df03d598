#![allow(dead_code)]

use std::f64::consts::PI;

use vws_core::{BoundaryData, StaggeredGrid};

/// Curl of `s(x)s(y)` with `s = sin²(πt)`.
pub fn bump_velocity(x: f64, y: f64) -> [f64; 2] {
    let s = |t: f64| (PI * t).sin().powi(2);
    let ds = |t: f64| PI * (2.0 * PI * t).sin();
    [s(x) * ds(y), -ds(x) * s(y)]
}

/// `-Δu + ∇p` for the bump velocity and `p = cos(πx)cos(πy)`, differentiated by hand:
/// s' = π sin 2πt, s'' = 2π² cos 2πt, s''' = -4π³ sin 2πt.
pub fn bump_force(x: f64, y: f64) -> [f64; 2] {
    let s = |t: f64| (PI * t).sin().powi(2);
    let ds = |t: f64| PI * (2.0 * PI * t).sin();
    let dds = |t: f64| 2.0 * PI * PI * (2.0 * PI * t).cos();
    let ddds = |t: f64| -4.0 * PI.powi(3) * (2.0 * PI * t).sin();
    let lap1 = dds(x) * ds(y) + s(x) * ddds(y);
    let lap2 = -(ddds(x) * s(y) + ds(x) * dds(y));
    let px = -PI * (PI * x).sin() * (PI * y).cos();
    let py = -PI * (PI * x).cos() * (PI * y).sin();
    [-lap1 + px, -lap2 + py]
}

pub fn rotation(grid: StaggeredGrid) -> BoundaryData {
    BoundaryData::from_fn(grid, |_, x, y| [-(y - 0.5), x - 0.5])
}

/// `log₂` ratios of consecutive values on a halving sequence.
pub fn orders(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Dense Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(r, bi)| r.iter().copied().chain([*bi]).collect()).collect();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, piv);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..=n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = (m[r][n] - s) / m[r][r];
    }
    x
}

/// Exact Stokes pair `u = (x², -2xy)`, `p = 2x`: `-Δu + ∇p = 0`, `div u = 0`.
pub fn polynomial_flow(x: f64, y: f64) -> [f64; 2] {
    [x * x, -2.0 * x * y]
}

/// `u·τ` of `polynomial_flow` at coordinate `c` along `side`.
pub fn polynomial_trace(side: vws_core::Side, c: f64) -> f64 {
    let (x, y) = side.point(c);
    let u = polynomial_flow(x, y);
    let t = side.tangent();
    u[0] * t[0] + u[1] * t[1]
}
