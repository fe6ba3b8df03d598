//! Stationary Stokes solvers on the MAC grid.
//!
//! The saddle-point system
//!
//! ```text
//!   (σI + νA)·u + G·p = F        A = -Δ_h,  G = discrete gradient
//!               D·u   = r        D = -Gᵀ on interior faces
//! ```
//!
//! is solved by conjugate gradients on the pressure Schur complement
//! `S = Gᵀ(σI + νA)⁻¹G` (an Uzawa iteration with optimal step sizes). Each
//! outer step needs one velocity solve, done either by the sine-transform
//! direct solver or by Jacobi-preconditioned CG on the assembled matrix.
//! The pressure is kept in the zero-mean gauge.

use std::time::{Duration, Instant};

use crate::boundary_data::{compatibility_defect, BoundaryData};
use crate::error::{Result, VwsError};
use crate::mesh::{l2_norm_gamma, PressureField, StaggeredGrid, VelocityField};
use crate::operators::{
    assemble_velocity_laplacian, divergence, divergence_packed, gradient, gradient_packed, norm, neg_laplacian, pcg,
    DirichletBC, SparseMatrix, SpectralLaplacian,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerSolver {
    /// Sine-transform direct solve of the velocity block.
    Spectral,
    /// Jacobi-preconditioned CG on the assembled velocity block.
    Cg,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Max-norm bound on the divergence residual.
    pub div_tol: f64,
    /// Relative bound on the momentum residual `‖Mu + Gp - F‖/‖F‖`.
    pub mom_tol: f64,
    pub max_outer: usize,
    pub inner: InnerSolver,
    pub inner_rel_tol: f64,
    pub inner_max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            div_tol: 1e-8,
            mom_tol: 1e-8,
            max_outer: 500,
            inner: InnerSolver::Spectral,
            inner_rel_tol: 1e-13,
            inner_max_iter: 50_000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// `max |D·u - r|` at exit.
    pub divergence_max: f64,
    /// `‖Mu + Gp - F‖ / ‖F‖` (absolute when `F = 0`).
    pub momentum_residual: f64,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StokesSolution {
    pub velocity: VelocityField,
    pub pressure: PressureField,
    pub diagnostics: Diagnostics,
}

impl StokesSolution {
    pub fn zero(grid: StaggeredGrid) -> Self {
        Self {
            velocity: VelocityField::zeros(grid),
            pressure: PressureField::zeros(grid),
            diagnostics: Diagnostics::default(),
        }
    }
}

enum Inner {
    Spectral(SpectralLaplacian),
    Cg { inv_diag: Vec<f64> },
}

/// Reusable solver for `(σI + νA)u + Gp = F, Du = r` on one grid.
pub struct StokesSolver {
    grid: StaggeredGrid,
    shift: f64,
    scale: f64,
    opts: SolverOptions,
    matrix: SparseMatrix,
    inner: Inner,
}

impl StokesSolver {
    pub fn new(grid: StaggeredGrid, opts: SolverOptions) -> Self {
        Self::shifted(grid, 0.0, 1.0, opts)
    }

    /// Solver for the shifted operator `shift·I + scale·(-Δ_h)`.
    pub fn shifted(grid: StaggeredGrid, shift: f64, scale: f64, opts: SolverOptions) -> Self {
        let (a, _) = assemble_velocity_laplacian(grid, &DirichletBC::homogeneous(grid));
        let matrix = a.scaled_shifted(scale, shift);
        let inner = match opts.inner {
            InnerSolver::Spectral => Inner::Spectral(SpectralLaplacian::new(grid, shift, scale)),
            InnerSolver::Cg => Inner::Cg {
                inv_diag: matrix.diagonal().iter().map(|d| 1.0 / d).collect(),
            },
        };
        Self {
            grid,
            shift,
            scale,
            opts,
            matrix,
            inner,
        }
    }

    pub fn grid(&self) -> StaggeredGrid {
        self.grid
    }

    pub fn options(&self) -> &SolverOptions {
        &self.opts
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// The assembled velocity block `shift·I + scale·A`.
    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    fn velocity_solve(&self, b: &[f64], x: &mut [f64]) -> Result<usize> {
        match &self.inner {
            Inner::Spectral(s) => {
                s.solve(b, x);
                Ok(0)
            }
            Inner::Cg { inv_diag } => {
                let rep = pcg(
                    &self.matrix,
                    Some(inv_diag),
                    b,
                    None,
                    self.opts.inner_rel_tol,
                    self.opts.inner_max_iter,
                )
                .map_err(|e| e.with_context("inner velocity solve"))?;
                x.copy_from_slice(&rep.x);
                Ok(rep.iterations)
            }
        }
    }

    /// Solves the packed saddle-point system. `rhs_div` must have zero sum.
    pub fn solve_packed(&self, rhs_u: &[f64], rhs_div: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Diagnostics)> {
        let start = Instant::now();
        let g = self.grid;
        let nu = g.num_velocity_unknowns();
        let np = g.num_cells();
        assert_eq!(rhs_u.len(), nu);
        assert_eq!(rhs_div.len(), np);

        let mut diag = Diagnostics::default();
        let mut u = vec![0.0; nu];
        diag.inner_iterations += self.velocity_solve(rhs_u, &mut u)?;
        let mut p = vec![0.0; np];

        let mut du = vec![0.0; np];
        let true_residual = |u: &[f64], du: &mut Vec<f64>| -> Vec<f64> {
            divergence_packed(g, u, du);
            let mut res: Vec<f64> = rhs_div.iter().zip(du.iter()).map(|(r, d)| r - d).collect();
            remove_mean(&mut res);
            res
        };
        let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));

        let mut res = true_residual(&u, &mut du);
        let mut gd = vec![0.0; nu];
        let mut z = vec![0.0; nu];
        let mut sd = vec![0.0; np];
        let mut outer = 0usize;

        // restarts recompute the residual from the current iterate
        'restart: loop {
            if max_abs(&res) <= self.opts.div_tol {
                break;
            }
            let mut d = res.clone();
            let mut rr = dot(&res, &res);
            loop {
                if outer >= self.opts.max_outer {
                    return Err(VwsError::NonConvergence {
                        iterations: outer,
                        residual: max_abs(&res),
                        best: Some(u),
                        context: Some("Schur complement iteration".into()),
                    });
                }
                outer += 1;
                gradient_packed(g, &d, &mut gd);
                diag.inner_iterations += self.velocity_solve(&gd, &mut z)?;
                divergence_packed(g, &z, &mut sd);
                sd.iter_mut().for_each(|v| *v = -*v);
                let dsd = dot(&d, &sd);
                if !(dsd > 0.0) {
                    // S is SPD on mean-zero vectors; a nonpositive curvature means round-off took over
                    res = true_residual(&u, &mut du);
                    if max_abs(&res) <= self.opts.div_tol {
                        break 'restart;
                    }
                    return Err(VwsError::NonConvergence {
                        iterations: outer,
                        residual: max_abs(&res),
                        best: Some(u),
                        context: Some("Schur complement lost positivity".into()),
                    });
                }
                let alpha = rr / dsd;
                for (pi, di) in p.iter_mut().zip(&d) {
                    *pi += alpha * di;
                }
                for (ui, zi) in u.iter_mut().zip(&z) {
                    *ui -= alpha * zi;
                }
                for (ri, si) in res.iter_mut().zip(&sd) {
                    *ri -= alpha * si;
                }
                remove_mean(&mut res);
                if max_abs(&res) <= self.opts.div_tol {
                    res = true_residual(&u, &mut du);
                    if max_abs(&res) <= self.opts.div_tol {
                        break 'restart;
                    }
                    continue 'restart;
                }
                let rr_new = dot(&res, &res);
                let beta = rr_new / rr;
                rr = rr_new;
                for (di, ri) in d.iter_mut().zip(&res) {
                    *di = ri + beta * *di;
                }
            }
        }
        remove_mean(&mut p);

        // momentum residual ‖Mu + Gp - F‖ / ‖F‖
        let mut mu = vec![0.0; nu];
        self.matrix.mul_vec(&u, &mut mu);
        gradient_packed(g, &p, &mut gd);
        let mom: Vec<f64> = mu
            .iter()
            .zip(&gd)
            .zip(rhs_u)
            .map(|((a, b), f)| a + b - f)
            .collect();
        let fnorm = norm(rhs_u);
        diag.momentum_residual = if fnorm > 0.0 { norm(&mom) / fnorm } else { norm(&mom) };
        diag.outer_iterations = outer;
        diag.divergence_max = max_abs(&res);
        diag.wall_time = start.elapsed();

        if diag.momentum_residual > self.opts.mom_tol {
            return Err(VwsError::NonConvergence {
                iterations: outer,
                residual: diag.momentum_residual,
                best: Some(u),
                context: Some("momentum residual above tolerance".into()),
            });
        }
        Ok((u, p, diag))
    }

    /// Solves with Dirichlet data `bc`, optional body force and divergence source.
    ///
    /// `extra_rhs` is added to the packed momentum right-hand side (used by time
    /// stepping for explicit terms).
    pub fn solve(
        &self,
        bc: &DirichletBC,
        force: Option<&VelocityField>,
        div_src: Option<&PressureField>,
        extra_rhs: Option<&[f64]>,
    ) -> Result<StokesSolution> {
        let g = self.grid;
        g.ensure_same(&bc.grid())?;
        let n = g.n();
        let ih = 1.0 / g.h();

        let mut rhs_u = crate::operators::laplacian_load(bc);
        if self.scale != 1.0 {
            rhs_u.iter_mut().for_each(|v| *v *= self.scale);
        }
        if let Some(f) = force {
            g.ensure_same(&f.grid())?;
            for (r, fv) in rhs_u.iter_mut().zip(f.interior_vector()) {
                *r += fv;
            }
        }
        if let Some(extra) = extra_rhs {
            for (r, e) in rhs_u.iter_mut().zip(extra) {
                *r += e;
            }
        }

        let mut rhs_div = match div_src {
            Some(h) => {
                g.ensure_same(&h.grid())?;
                let mean = h.mean();
                if mean.abs() > 1e-12 {
                    return Err(VwsError::IncompatibleSource(mean));
                }
                h.to_vector()
            }
            None => vec![0.0; g.num_cells()],
        };
        for j in 0..n {
            rhs_div[g.cell_index(0, j)] += bc.u1_left[j] * ih;
            rhs_div[g.cell_index(n - 1, j)] -= bc.u1_right[j] * ih;
        }
        for i in 0..n {
            rhs_div[g.cell_index(i, 0)] += bc.u2_bottom[i] * ih;
            rhs_div[g.cell_index(i, n - 1)] -= bc.u2_top[i] * ih;
        }

        let (u, p, diagnostics) = self.solve_packed(&rhs_u, &rhs_div)?;
        let mut velocity = VelocityField::zeros(g);
        velocity.set_interior(&u);
        bc.impose_normal(&mut velocity);
        Ok(StokesSolution {
            velocity,
            pressure: PressureField::from_vector(g, &p),
            diagnostics,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    crate::operators::dot(a, b)
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// `-ΔU + ∇P = f, div U = h, U = 0 on Γ`.
pub fn solve_homogeneous(grid: StaggeredGrid, f: &VelocityField, h_src: &PressureField) -> Result<StokesSolution> {
    solve_homogeneous_with(grid, f, h_src, &SolverOptions::default())
}

pub fn solve_homogeneous_with(
    grid: StaggeredGrid,
    f: &VelocityField,
    h_src: &PressureField,
    opts: &SolverOptions,
) -> Result<StokesSolution> {
    let solver = StokesSolver::new(grid, *opts);
    solver.solve(&DirichletBC::homogeneous(grid), Some(f), Some(h_src), None)
}

/// Tolerance on `|∫_Γ g·n|` accepted by [`solve_boundary`].
pub const COMPATIBILITY_TOL: f64 = 1e-10;

/// `-Δu + ∇p = 0, div u = 0, u = g on Γ`; requires `∫_Γ g·n = 0`.
pub fn solve_boundary(grid: StaggeredGrid, g: &BoundaryData) -> Result<StokesSolution> {
    solve_boundary_with(grid, g, &SolverOptions::default())
}

pub fn solve_boundary_with(grid: StaggeredGrid, g: &BoundaryData, opts: &SolverOptions) -> Result<StokesSolution> {
    grid.ensure_same(&g.grid())?;
    let defect = compatibility_defect(g);
    if defect.abs() > COMPATIBILITY_TOL {
        return Err(VwsError::IncompatibleBoundaryData(defect));
    }
    let solver = StokesSolver::new(grid, *opts);
    solver.solve(&DirichletBC::from_boundary(g), None, None, None)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualReport {
    /// Discrete `L²(Ω)` norm of `-Δ_h u + ∇p - f` on interior faces.
    pub momentum_l2: f64,
    pub momentum_max: f64,
    pub divergence_max: f64,
    pub divergence_l2: f64,
    /// `L²(Γ)` norm of the normal boundary faces minus `g·n`.
    pub boundary_mismatch: f64,
}

/// Residuals of `(u, p)` against `-Δu + ∇p = f, div u = 0, u = g`.
pub fn residual_report(sol: &StokesSolution, f: Option<&VelocityField>, g: &BoundaryData) -> ResidualReport {
    let grid = sol.velocity.grid();
    let bc = DirichletBC::from_boundary(g);
    let mut mom = neg_laplacian(&sol.velocity, &bc);
    mom.axpy(1.0, &gradient(&sol.pressure));
    if let Some(f) = f {
        let mut fi = f.clone();
        fi.clear_boundary_faces();
        mom.axpy(-1.0, &fi);
    }
    let div = divergence(&sol.velocity);

    let n = grid.n();
    let mut mismatch = BoundaryData::zeros(grid);
    for j in 0..n {
        mismatch.side_mut(crate::Side::Left)[j][0] = sol.velocity.u1[[0, j]] - bc.u1_left[j];
        mismatch.side_mut(crate::Side::Right)[j][0] = sol.velocity.u1[[n, j]] - bc.u1_right[j];
    }
    for i in 0..n {
        mismatch.side_mut(crate::Side::Bottom)[i][1] = sol.velocity.u2[[i, 0]] - bc.u2_bottom[i];
        mismatch.side_mut(crate::Side::Top)[i][1] = sol.velocity.u2[[i, n]] - bc.u2_top[i];
    }

    ResidualReport {
        momentum_l2: crate::mesh::l2_norm_omega(&mom),
        momentum_max: mom.max_abs(),
        divergence_max: div.max_abs(),
        divergence_l2: crate::mesh::l2_norm_omega(&div),
        boundary_mismatch: l2_norm_gamma(&mismatch),
    }
}
