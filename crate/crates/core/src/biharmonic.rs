//! Stream-function formulation of the boundary problem for tangential data:
//! `Δ²Ψ = 0` with `Ψ = 0` and `∂Ψ/∂n = s` on Γ, and `u = (∂Ψ/∂y, -∂Ψ/∂x)`.
//!
//! With this orientation `u·τ = -∂Ψ/∂n`, so the prescribed slope is
//! `s = -(g·τ)`; for the cavity lid `(1, 0)` on top this gives
//! `∂Ψ/∂y = 1` and a rightward lid flow.
//!
//! The 13-point stencil acts on the interior nodes. The slope enters through
//! ghost nodes one row outside the wall, `Ψ_ghost = Ψ_mirror + 2h·s`, which
//! adds one to the diagonal of the adjacent row and keeps the matrix SPD.

use std::path::Path;

use ndarray::Array2;

use crate::boundary_data::{BoundaryData, Side};
use crate::error::{Result, VwsError};
use crate::mesh::{read_component, write_component, ComponentTag, StaggeredGrid, VelocityField};
use crate::operators::{cg_solve, curl_of_nodes, SparseMatrix};

/// Node values `Ψ(ih, jh)`, `0 ≤ i, j ≤ n`; boundary nodes hold zero.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamFunction {
    grid: StaggeredGrid,
    pub psi: Array2<f64>,
}

impl StreamFunction {
    pub fn zeros(grid: StaggeredGrid) -> Self {
        let n = grid.n();
        Self {
            grid,
            psi: Array2::zeros((n + 1, n + 1)),
        }
    }

    pub fn from_fn(grid: StaggeredGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let h = grid.h();
        let n = grid.n();
        Self {
            grid,
            psi: Array2::from_shape_fn((n + 1, n + 1), |(i, j)| f(i as f64 * h, j as f64 * h)),
        }
    }

    pub fn grid(&self) -> StaggeredGrid {
        self.grid
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_component(path, self.grid.n(), ComponentTag::Node, &self.psi)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (n, tag, psi) = read_component(path)?;
        if tag != ComponentTag::Node {
            return Err(VwsError::Format(format!("expected node dump, found {tag:?}")));
        }
        Ok(Self {
            grid: StaggeredGrid::new(n)?,
            psi,
        })
    }

    /// Node index and value of the largest `|Ψ|`.
    pub fn extremum(&self) -> ((usize, usize), f64) {
        self.psi
            .indexed_iter()
            .fold(((0, 0), 0.0), |best, (ij, v)| if v.abs() > best.1.abs() { (ij, *v) } else { best })
    }
}

/// Largest `|g·n|` accepted by [`solve_biharmonic`].
pub const TANGENTIAL_TOL: f64 = 1e-12;
/// Relative residual for the plate solve.
pub const BIHARMONIC_REL_TOL: f64 = 1e-10;

fn interior_index(n: usize, i: usize, j: usize) -> usize {
    (i - 1) * (n - 1) + (j - 1)
}

/// Assembled clamped-plate operator `Δ_h²` on the interior nodes, scaled by `h⁴`.
pub fn assemble_biharmonic(grid: StaggeredGrid) -> SparseMatrix {
    let n = grid.n();
    let m = n - 1;
    let mut trip = Vec::with_capacity(13 * m * m);
    let inside = |k: isize| k >= 1 && k <= m as isize;
    for i in 1..=m {
        for j in 1..=m {
            let row = interior_index(n, i, j);
            let mut diag = 20.0;
            let mut push = |di: isize, dj: isize, c: f64, diag: &mut f64| {
                let (a, b) = (i as isize + di, j as isize + dj);
                if inside(a) && inside(b) {
                    trip.push((row, interior_index(n, a as usize, b as usize), c));
                } else if a == -1 || b == -1 || a == n as isize + 1 || b == n as isize + 1 {
                    // ghost node: mirror of this node across the wall
                    *diag += c;
                }
                // wall nodes carry Ψ = 0
            };
            for (di, dj) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
                push(di, dj, -8.0, &mut diag);
            }
            for (di, dj) in [(-1, -1), (-1, 1), (1, -1), (1, 1)] {
                push(di, dj, 2.0, &mut diag);
            }
            for (di, dj) in [(-2, 0), (2, 0), (0, -2), (0, 2)] {
                push(di, dj, 1.0, &mut diag);
            }
            trip.push((row, row, diag));
        }
    }
    SparseMatrix::from_triplets(m * m, m * m, trip)
}

/// Slope `∂Ψ/∂n = -(g·τ)` at the interior nodes of each side, indexed `m - 1`.
fn wall_slopes(g: &BoundaryData) -> [Vec<f64>; 4] {
    let n = g.grid().n();
    Side::ALL.map(|s| (1..n).map(|m| -g.tangential_at_node(s, m)).collect())
}

/// `Δ²Ψ = 0, Ψ = 0, ∂Ψ/∂n = -(g·τ)` for tangential data `g`.
pub fn solve_biharmonic(grid: StaggeredGrid, g: &BoundaryData) -> Result<StreamFunction> {
    solve_biharmonic_with_source(grid, g, |_, _| 0.0)
}

/// Same with a source: `Δ²Ψ = f`.
pub fn solve_biharmonic_with_source(
    grid: StaggeredGrid,
    g: &BoundaryData,
    f: impl Fn(f64, f64) -> f64,
) -> Result<StreamFunction> {
    grid.ensure_same(&g.grid())?;
    let normal = g.max_abs_normal();
    if normal > TANGENTIAL_TOL {
        return Err(VwsError::NonTangentialData(normal));
    }
    let n = grid.n();
    let m = n - 1;
    let h = grid.h();
    let h4 = h.powi(4);
    let slopes = wall_slopes(g);

    let mut rhs = vec![0.0; m * m];
    for i in 1..=m {
        for j in 1..=m {
            rhs[interior_index(n, i, j)] = h4 * f(i as f64 * h, j as f64 * h);
        }
    }
    // ghost value = mirror + 2h·s; the mirror part sits in the matrix
    for k in 1..=m {
        rhs[interior_index(n, k, 1)] -= 2.0 * h * slopes[Side::Bottom.index()][k - 1];
        rhs[interior_index(n, k, m)] -= 2.0 * h * slopes[Side::Top.index()][k - 1];
        rhs[interior_index(n, 1, k)] -= 2.0 * h * slopes[Side::Left.index()][k - 1];
        rhs[interior_index(n, m, k)] -= 2.0 * h * slopes[Side::Right.index()][k - 1];
    }

    let a = assemble_biharmonic(grid);
    let max_iter = 20 * m * m + 1000;
    let rep = cg_solve(&a, &rhs, BIHARMONIC_REL_TOL, max_iter).map_err(|e| e.with_context("biharmonic"))?;
    let mut out = StreamFunction::zeros(grid);
    for i in 1..=m {
        for j in 1..=m {
            out.psi[[i, j]] = rep.x[interior_index(n, i, j)];
        }
    }
    log::debug!("biharmonic n={n}: {} CG iterations", rep.iterations);
    Ok(out)
}

/// `u = ∂Ψ/∂y, v = -∂Ψ/∂x` by face-centered differences; discretely solenoidal.
pub fn velocity_from_stream(psi: &StreamFunction) -> VelocityField {
    curl_of_nodes(psi.grid, &psi.psi)
}
