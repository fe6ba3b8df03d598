//! The adjoint problem and the transposition identity behind the
//! `L²(Γ) → L²(Ω)` estimate.
//!
//! For `u` solving the boundary problem with data `g` and `(v, q)` the adjoint
//! pair with right-hand side `u` and homogeneous data, Green's formula gives
//!
//! ```text
//!   ‖u‖²_Ω = ∫_Ω u·(-Δv + ∇q) = ∫_Γ (g·n) q - g·∂v/∂n
//! ```
//!
//! The discrete versions of both sides are compared here.

use crate::boundary_data::{BoundaryData, Side};
use crate::error::{Result, VwsError};
use crate::mesh::{l2_norm_gamma, l2_norm_omega, PressureField, StaggeredGrid, VelocityField};
use crate::operators::{gradient, DirichletBC};
use crate::stokes::{SolverOptions, StokesSolution, StokesSolver, COMPATIBILITY_TOL};

/// `-Δv + ∇q = u_rhs, div v = 0, v = 0 on Γ`.
pub fn solve_adjoint(grid: StaggeredGrid, u_rhs: &VelocityField) -> Result<StokesSolution> {
    let solver = StokesSolver::new(grid, SolverOptions::default());
    adjoint_with(&solver, u_rhs)
}

fn adjoint_with(solver: &StokesSolver, u_rhs: &VelocityField) -> Result<StokesSolution> {
    let grid = solver.grid();
    if u_rhs.u1.iter().chain(u_rhs.u2.iter()).any(|v| !v.is_finite()) {
        return Err(VwsError::DomainViolation {
            value: f64::NAN,
            domain: "finite velocity",
        });
    }
    solver.solve(&DirichletBC::homogeneous(grid), Some(u_rhs), None, None)
}

/// Cartesian velocity components along one side, by position along the side
/// and distance index into the domain.
struct SideView<'a> {
    v: &'a VelocityField,
    side: Side,
}

impl SideView<'_> {
    /// Tangential component at boundary node `m` (`0..=n`), at distance `(d+½)h`.
    fn tangential(&self, m: usize, d: usize) -> f64 {
        let n = self.v.grid().n();
        match self.side {
            Side::Bottom => self.v.u1[[m, d]],
            Side::Top => self.v.u1[[m, n - 1 - d]],
            Side::Left => self.v.u2[[d, m]],
            Side::Right => self.v.u2[[n - 1 - d, m]],
        }
    }

    /// Normal component at midpoint `k`, at distance `d·h`.
    fn normal(&self, k: usize, d: usize) -> f64 {
        let n = self.v.grid().n();
        match self.side {
            Side::Bottom => self.v.u2[[k, d]],
            Side::Top => self.v.u2[[k, n - d]],
            Side::Left => self.v.u1[[d, k]],
            Side::Right => self.v.u1[[n - d, k]],
        }
    }
}

/// Outward normal derivative `∂v/∂n` at the boundary face midpoints, for `v`
/// vanishing on Γ.
///
/// The normal component uses the one-sided stencil `(-3f₀ + 4f₁ - f₂)/2h` on
/// the face values. The tangential component is fitted through the zero wall
/// value and the first two staggered rows, `(9f(h/2) - f(3h/2))/3h`, at the
/// nodes and averaged to the midpoints; corner nodes count as zero.
pub fn normal_derivative_on_gamma(v: &VelocityField) -> BoundaryData {
    let grid = v.grid();
    let n = grid.n();
    let h = grid.h();
    let mut out = BoundaryData::zeros(grid);
    for side in Side::ALL {
        let view = SideView { v, side };
        let dt: Vec<f64> = (0..=n)
            .map(|m| {
                if m == 0 || m == n {
                    0.0
                } else {
                    -(9.0 * view.tangential(m, 0) - view.tangential(m, 1)) / (3.0 * h)
                }
            })
            .collect();
        for k in 0..n {
            let tang = 0.5 * (dt[k] + dt[k + 1]);
            let norm = -(-3.0 * view.normal(k, 0) + 4.0 * view.normal(k, 1) - view.normal(k, 2)) / (2.0 * h);
            out.side_mut(side)[k] = match side {
                Side::Bottom | Side::Top => [tang, norm],
                Side::Left | Side::Right => [norm, tang],
            };
        }
    }
    out
}

/// Pressure extrapolated to the boundary midpoints from the two nearest cells.
pub fn pressure_on_gamma(q: &PressureField) -> Vec<(Side, Vec<f64>)> {
    let n = q.grid().n();
    let p = &q.p;
    let extrap = |a: f64, b: f64| 1.5 * a - 0.5 * b;
    Side::ALL
        .into_iter()
        .map(|side| {
            let vals = (0..n)
                .map(|k| match side {
                    Side::Bottom => extrap(p[[k, 0]], p[[k, 1]]),
                    Side::Top => extrap(p[[k, n - 1]], p[[k, n - 2]]),
                    Side::Left => extrap(p[[0, k]], p[[1, k]]),
                    Side::Right => extrap(p[[n - 1, k]], p[[n - 2, k]]),
                })
                .collect();
            (side, vals)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityReport {
    /// `‖u‖²_Ω`
    pub lhs: f64,
    /// `∫_Γ (g·n) q_Γ - g·∂v/∂n`
    pub rhs: f64,
    /// `|lhs - rhs| / lhs`, zero when both sides vanish.
    pub rel_gap: f64,
    /// `∫_Ω u·∇q`, which reduces to the boundary term `∫_Γ (g·n) q`.
    pub interior_pressure_term: f64,
}

/// Both sides of the transposition identity for compatible data `g`.
pub fn lemma11_identity(grid: StaggeredGrid, g: &BoundaryData) -> Result<IdentityReport> {
    lemma11_identity_with(grid, g, &SolverOptions::default())
}

pub fn lemma11_identity_with(grid: StaggeredGrid, g: &BoundaryData, opts: &SolverOptions) -> Result<IdentityReport> {
    grid.ensure_same(&g.grid())?;
    let defect = crate::boundary_data::compatibility_defect(g);
    if defect.abs() > COMPATIBILITY_TOL {
        return Err(VwsError::IncompatibleBoundaryData(defect));
    }
    let solver = StokesSolver::new(grid, *opts);
    let u = solver.solve(&DirichletBC::from_boundary(g), None, None, None)?.velocity;
    let adj = adjoint_with(&solver, &u)?;

    let lhs = l2_norm_omega(&u).powi(2);
    let h = grid.h();
    let dvdn = normal_derivative_on_gamma(&adj.velocity);
    let q_gamma = pressure_on_gamma(&adj.pressure);
    let mut rhs = 0.0;
    for (side, qs) in &q_gamma {
        for (k, q) in qs.iter().enumerate() {
            let gv = g.side(*side)[k];
            let dv = dvdn.side(*side)[k];
            rhs += (g.normal_component(*side, k) * q - (gv[0] * dv[0] + gv[1] * dv[1])) * h;
        }
    }
    let rel_gap = if lhs == 0.0 && rhs == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / lhs
    };
    Ok(IdentityReport {
        lhs,
        rhs,
        rel_gap,
        interior_pressure_term: u.dot(&gradient(&adj.pressure)),
    })
}

/// `‖u‖_Ω / ‖g‖_Γ` for the boundary solution with data `g`.
pub fn estimate_ratio(grid: StaggeredGrid, g: &BoundaryData) -> Result<f64> {
    estimate_ratio_with(grid, g, &SolverOptions::default()).map(|(r, _)| r)
}

/// Ratio together with the solution it was computed from.
pub fn estimate_ratio_with(grid: StaggeredGrid, g: &BoundaryData, opts: &SolverOptions) -> Result<(f64, StokesSolution)> {
    let gn = l2_norm_gamma(g);
    if gn == 0.0 {
        return Err(VwsError::ZeroBoundaryData);
    }
    let sol = crate::stokes::solve_boundary_with(grid, g, opts)?;
    Ok((l2_norm_omega(&sol.velocity) / gn, sol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary_data::cavity_g_eps;
    use crate::mesh::build_grid;

    fn rotation(g: StaggeredGrid) -> BoundaryData {
        BoundaryData::from_fn(g, |_, x, y| [-(y - 0.5), x - 0.5])
    }

    #[test]
    fn zero_adjoint() {
        let g = build_grid(8).unwrap();
        let s = solve_adjoint(g, &VelocityField::zeros(g)).unwrap();
        assert_eq!(s.velocity.max_abs(), 0.0);
        assert_eq!(s.pressure.max_abs(), 0.0);
    }

    #[test]
    fn normal_derivative_of_bubble() {
        // v = (x(1-x)y(1-y), 0); at the bottom ∂v₁/∂n = -x(1-x)
        let errs: Vec<f64> = [16, 32, 64]
            .iter()
            .map(|&n| {
                let g = build_grid(n).unwrap();
                let v = VelocityField::from_fn(g, |x, y| [x * (1.0 - x) * y * (1.0 - y), 0.0]);
                let d = normal_derivative_on_gamma(&v);
                (0..n)
                    .map(|k| {
                        let x = d.coordinate(k);
                        (d.side(Side::Bottom)[k][0] + x * (1.0 - x)).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.8, "{errs:?}");
        }
        let g = build_grid(8).unwrap();
        let d = normal_derivative_on_gamma(&VelocityField::zeros(g));
        assert_eq!(d, BoundaryData::zeros(g));
    }

    #[test]
    fn normal_derivative_exact_on_linear_profiles() {
        let g = build_grid(10).unwrap();
        // bottom: tangential u1 = y, normal u2 = 3y (wall values 0 and 0)
        let v = VelocityField::from_fn(g, |_, y| [y, 3.0 * y]);
        let d = normal_derivative_on_gamma(&v);
        for k in 1..9 {
            let s = d.side(Side::Bottom)[k];
            assert!((s[0] + 1.0).abs() < 1e-12 && (s[1] + 3.0).abs() < 1e-12, "{s:?}");
        }
        // left: normal u1 = 2 - 5x (wall value is read from the face)
        let v = VelocityField::from_fn(g, |x, _| [2.0 - 5.0 * x, 0.0]);
        let d = normal_derivative_on_gamma(&v);
        for k in 0..10 {
            assert!((d.side(Side::Left)[k][0] - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_trivial_for_zero_data() {
        let g = build_grid(16).unwrap();
        let r = lemma11_identity(g, &BoundaryData::zeros(g)).unwrap();
        assert!(r.lhs.abs() < 1e-16 && r.rhs.abs() < 1e-16);
        assert!(r.interior_pressure_term.abs() <= 1e-10);
    }

    #[test]
    fn identity_gap_shrinks_for_rotation() {
        let gaps: Vec<f64> = [32, 64, 128]
            .iter()
            .map(|&n| {
                let g = build_grid(n).unwrap();
                lemma11_identity(g, &rotation(g)).unwrap().rel_gap
            })
            .collect();
        for w in gaps.windows(2) {
            assert!(w[1] < w[0] && (w[0] / w[1]).log2() >= 0.8, "{gaps:?}");
        }
    }

    #[test]
    fn ratio_rejects_zero_and_is_scale_invariant() {
        let g = build_grid(16).unwrap();
        assert!(matches!(
            estimate_ratio(g, &BoundaryData::zeros(g)),
            Err(VwsError::ZeroBoundaryData)
        ));
        let data = cavity_g_eps(g, 0.1).unwrap();
        let r1 = estimate_ratio(g, &data).unwrap();
        let r2 = estimate_ratio(g, &data.scaled(7.3)).unwrap();
        assert!((r1 - r2).abs() <= 1e-10 * r1);
    }
}
