//! Discrete operators on the staggered grid and the linear-algebra kernels
//! behind the solvers.
//!
//! Sign conventions: the assembled velocity matrix is `A = -Δ_h` (SPD) acting
//! on the packed interior unknowns, and the load vector moves all known
//! boundary values to the right-hand side, so `A·u = load + f` is the discrete
//! form of `-Δu = f, u = g on Γ`.
//!
//! Normal boundary values sit exactly on boundary faces. Tangential boundary
//! values enter through a ghost row outside the wall with
//! `ghost = 2·g - interior`.

mod cg;
mod sparse;
mod spectral;

pub use cg::{cg_solve, pcg, CgReport, DEFAULT_REL_TOL};
pub use sparse::SparseMatrix;
pub use spectral::SpectralLaplacian;

pub(crate) use cg::{dot, norm};

use crate::boundary_data::{BoundaryData, Side};
use crate::mesh::{PressureField, StaggeredGrid, VelocityField};

/// Anything that can act as `y = A·x`.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// Velocity boundary values in the form the stencils consume.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletBC {
    grid: StaggeredGrid,
    /// `u1` on the faces `x = 0` and `x = 1` (normal component), indexed by `j`.
    pub u1_left: Vec<f64>,
    pub u1_right: Vec<f64>,
    /// `u2` on the faces `y = 0` and `y = 1`, indexed by `i`.
    pub u2_bottom: Vec<f64>,
    pub u2_top: Vec<f64>,
    /// Tangential `u1` at the interior boundary nodes `(ih, 0)` / `(ih, 1)`,
    /// `i = 1..n-1`, stored at `i - 1`.
    pub u1_bottom: Vec<f64>,
    pub u1_top: Vec<f64>,
    /// Tangential `u2` at `(0, jh)` / `(1, jh)`, `j = 1..n-1`, stored at `j - 1`.
    pub u2_left: Vec<f64>,
    pub u2_right: Vec<f64>,
}

impl DirichletBC {
    pub fn homogeneous(grid: StaggeredGrid) -> Self {
        let n = grid.n();
        Self {
            grid,
            u1_left: vec![0.0; n],
            u1_right: vec![0.0; n],
            u2_bottom: vec![0.0; n],
            u2_top: vec![0.0; n],
            u1_bottom: vec![0.0; n - 1],
            u1_top: vec![0.0; n - 1],
            u2_left: vec![0.0; n - 1],
            u2_right: vec![0.0; n - 1],
        }
    }

    /// Normal components are copied from the midpoint samples; tangential node
    /// values average the two neighbouring samples.
    pub fn from_boundary(g: &BoundaryData) -> Self {
        let grid = g.grid();
        let n = grid.n();
        let comp = |side: Side, c: usize| -> Vec<f64> { g.side(side).iter().map(|v| v[c]).collect() };
        let at_nodes = |side: Side, c: usize| -> Vec<f64> {
            let s = g.side(side);
            (1..n).map(|m| 0.5 * (s[m - 1][c] + s[m][c])).collect()
        };
        Self {
            grid,
            u1_left: comp(Side::Left, 0),
            u1_right: comp(Side::Right, 0),
            u2_bottom: comp(Side::Bottom, 1),
            u2_top: comp(Side::Top, 1),
            u1_bottom: at_nodes(Side::Bottom, 0),
            u1_top: at_nodes(Side::Top, 0),
            u2_left: at_nodes(Side::Left, 1),
            u2_right: at_nodes(Side::Right, 1),
        }
    }

    pub fn grid(&self) -> StaggeredGrid {
        self.grid
    }

    /// Writes the normal boundary values into the boundary faces of `v`.
    pub fn impose_normal(&self, v: &mut VelocityField) {
        let n = self.grid.n();
        for j in 0..n {
            v.u1[[0, j]] = self.u1_left[j];
            v.u1[[n, j]] = self.u1_right[j];
        }
        for i in 0..n {
            v.u2[[i, 0]] = self.u2_bottom[i];
            v.u2[[i, n]] = self.u2_top[i];
        }
    }

    /// `α·self` with every stored value scaled.
    pub fn scaled(&self, alpha: f64) -> Self {
        let s = |v: &Vec<f64>| v.iter().map(|x| alpha * x).collect::<Vec<_>>();
        Self {
            grid: self.grid,
            u1_left: s(&self.u1_left),
            u1_right: s(&self.u1_right),
            u2_bottom: s(&self.u2_bottom),
            u2_top: s(&self.u2_top),
            u1_bottom: s(&self.u1_bottom),
            u1_top: s(&self.u1_top),
            u2_left: s(&self.u2_left),
            u2_right: s(&self.u2_right),
        }
    }
}

/// Load vector carrying the boundary terms of `-Δ_h` (see module docs).
pub fn laplacian_load(bc: &DirichletBC) -> Vec<f64> {
    let grid = bc.grid;
    let n = grid.n();
    let ih2 = 1.0 / grid.h().powi(2);
    let mut load = vec![0.0; grid.num_velocity_unknowns()];
    for j in 0..n {
        load[grid.u1_index(1, j)] += bc.u1_left[j] * ih2;
        load[grid.u1_index(n - 1, j)] += bc.u1_right[j] * ih2;
    }
    for i in 1..n {
        load[grid.u1_index(i, 0)] += 2.0 * bc.u1_bottom[i - 1] * ih2;
        load[grid.u1_index(i, n - 1)] += 2.0 * bc.u1_top[i - 1] * ih2;
    }
    for i in 0..n {
        load[grid.u2_index(i, 1)] += bc.u2_bottom[i] * ih2;
        load[grid.u2_index(i, n - 1)] += bc.u2_top[i] * ih2;
    }
    for j in 1..n {
        load[grid.u2_index(0, j)] += 2.0 * bc.u2_left[j - 1] * ih2;
        load[grid.u2_index(n - 1, j)] += 2.0 * bc.u2_right[j - 1] * ih2;
    }
    load
}

/// Assembles `-Δ_h` on the interior velocity unknowns (5-point stencil per
/// component, ghost elimination at tangential walls) and its boundary load.
pub fn assemble_velocity_laplacian(grid: StaggeredGrid, bc: &DirichletBC) -> (SparseMatrix, Vec<f64>) {
    let n = grid.n();
    let ih2 = 1.0 / grid.h().powi(2);
    let mut trip = Vec::with_capacity(5 * grid.num_velocity_unknowns());

    // u1: x-direction neighbours are faces (Dirichlet on i = 0, n), y-direction uses ghosts.
    for i in 1..n {
        for j in 0..n {
            let row = grid.u1_index(i, j);
            let mut diag = 4.0;
            if i > 1 {
                trip.push((row, grid.u1_index(i - 1, j), -ih2));
            }
            if i + 1 < n {
                trip.push((row, grid.u1_index(i + 1, j), -ih2));
            }
            if j > 0 {
                trip.push((row, grid.u1_index(i, j - 1), -ih2));
            } else {
                diag += 1.0;
            }
            if j + 1 < n {
                trip.push((row, grid.u1_index(i, j + 1), -ih2));
            } else {
                diag += 1.0;
            }
            trip.push((row, row, diag * ih2));
        }
    }
    for i in 0..n {
        for j in 1..n {
            let row = grid.u2_index(i, j);
            let mut diag = 4.0;
            if j > 1 {
                trip.push((row, grid.u2_index(i, j - 1), -ih2));
            }
            if j + 1 < n {
                trip.push((row, grid.u2_index(i, j + 1), -ih2));
            }
            if i > 0 {
                trip.push((row, grid.u2_index(i - 1, j), -ih2));
            } else {
                diag += 1.0;
            }
            if i + 1 < n {
                trip.push((row, grid.u2_index(i + 1, j), -ih2));
            } else {
                diag += 1.0;
            }
            trip.push((row, row, diag * ih2));
        }
    }
    let m = grid.num_velocity_unknowns();
    (SparseMatrix::from_triplets(m, m, trip), laplacian_load(bc))
}

/// Matrix-free `-Δ_h v` on interior faces. Normal boundary values are read
/// from the boundary faces of `v`; tangential wall values come from `bc`.
/// Boundary faces of the result are zero.
pub fn neg_laplacian(v: &VelocityField, bc: &DirichletBC) -> VelocityField {
    let grid = v.grid();
    let n = grid.n();
    let ih2 = 1.0 / grid.h().powi(2);
    let mut out = VelocityField::zeros(grid);
    let u1 = &v.u1;
    let u2 = &v.u2;
    for i in 1..n {
        for j in 0..n {
            let c = u1[[i, j]];
            let below = if j > 0 { u1[[i, j - 1]] } else { 2.0 * bc.u1_bottom[i - 1] - c };
            let above = if j + 1 < n { u1[[i, j + 1]] } else { 2.0 * bc.u1_top[i - 1] - c };
            out.u1[[i, j]] = (4.0 * c - u1[[i - 1, j]] - u1[[i + 1, j]] - below - above) * ih2;
        }
    }
    for i in 0..n {
        for j in 1..n {
            let c = u2[[i, j]];
            let left = if i > 0 { u2[[i - 1, j]] } else { 2.0 * bc.u2_left[j - 1] - c };
            let right = if i + 1 < n { u2[[i + 1, j]] } else { 2.0 * bc.u2_right[j - 1] - c };
            out.u2[[i, j]] = (4.0 * c - u2[[i, j - 1]] - u2[[i, j + 1]] - left - right) * ih2;
        }
    }
    out
}

/// Cell-centered divergence using every stored face (boundary faces included).
pub fn divergence(vel: &VelocityField) -> PressureField {
    let grid = vel.grid();
    let n = grid.n();
    let ih = 1.0 / grid.h();
    let mut out = PressureField::zeros(grid);
    for i in 0..n {
        for j in 0..n {
            out.p[[i, j]] =
                (vel.u1[[i + 1, j]] - vel.u1[[i, j]] + vel.u2[[i, j + 1]] - vel.u2[[i, j]]) * ih;
        }
    }
    out
}

/// Face-centered gradient on interior faces; boundary faces are left at zero.
pub fn gradient(p: &PressureField) -> VelocityField {
    let grid = p.grid();
    let n = grid.n();
    let ih = 1.0 / grid.h();
    let mut out = VelocityField::zeros(grid);
    for i in 1..n {
        for j in 0..n {
            out.u1[[i, j]] = (p.p[[i, j]] - p.p[[i - 1, j]]) * ih;
        }
    }
    for i in 0..n {
        for j in 1..n {
            out.u2[[i, j]] = (p.p[[i, j]] - p.p[[i, j - 1]]) * ih;
        }
    }
    out
}

/// Gradient from packed cell values into packed interior-face values.
pub fn gradient_packed(grid: StaggeredGrid, p: &[f64], out: &mut [f64]) {
    let n = grid.n();
    let ih = 1.0 / grid.h();
    for i in 1..n {
        for j in 0..n {
            out[grid.u1_index(i, j)] = (p[grid.cell_index(i, j)] - p[grid.cell_index(i - 1, j)]) * ih;
        }
    }
    for i in 0..n {
        for j in 1..n {
            out[grid.u2_index(i, j)] = (p[grid.cell_index(i, j)] - p[grid.cell_index(i, j - 1)]) * ih;
        }
    }
}

/// Divergence of packed interior faces with zero boundary faces (`= -Gᵀ`).
pub fn divergence_packed(grid: StaggeredGrid, u: &[f64], out: &mut [f64]) {
    let n = grid.n();
    let ih = 1.0 / grid.h();
    out.iter_mut().for_each(|v| *v = 0.0);
    for i in 1..n {
        for j in 0..n {
            let f = u[grid.u1_index(i, j)] * ih;
            out[grid.cell_index(i - 1, j)] += f;
            out[grid.cell_index(i, j)] -= f;
        }
    }
    for i in 0..n {
        for j in 1..n {
            let f = u[grid.u2_index(i, j)] * ih;
            out[grid.cell_index(i, j - 1)] += f;
            out[grid.cell_index(i, j)] -= f;
        }
    }
}

/// Discrete velocity from node stream values: `u1 = Δ_yΨ/h`, `u2 = -Δ_xΨ/h`.
/// Divergence vanishes identically by telescoping.
pub fn curl_of_nodes(grid: StaggeredGrid, psi: &ndarray::Array2<f64>) -> VelocityField {
    let n = grid.n();
    assert_eq!(psi.dim(), (n + 1, n + 1));
    let ih = 1.0 / grid.h();
    let mut v = VelocityField::zeros(grid);
    for i in 0..=n {
        for j in 0..n {
            v.u1[[i, j]] = (psi[[i, j + 1]] - psi[[i, j]]) * ih;
        }
    }
    for i in 0..n {
        for j in 0..=n {
            v.u2[[i, j]] = -(psi[[i + 1, j]] - psi[[i, j]]) * ih;
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_grid;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn exact_bc(grid: StaggeredGrid, f: impl Fn(f64, f64) -> [f64; 2]) -> DirichletBC {
        // node values taken exactly, not averaged
        let n = grid.n();
        let h = grid.h();
        let mut bc = DirichletBC::from_boundary(&BoundaryData::from_fn(grid, |_, x, y| f(x, y)));
        for m in 1..n {
            let s = m as f64 * h;
            bc.u1_bottom[m - 1] = f(s, 0.0)[0];
            bc.u1_top[m - 1] = f(s, 1.0)[0];
            bc.u2_left[m - 1] = f(0.0, s)[1];
            bc.u2_right[m - 1] = f(1.0, s)[1];
        }
        bc
    }

    #[test]
    fn interior_row_sums_vanish() {
        let g = build_grid(4).unwrap();
        let (a, load) = assemble_velocity_laplacian(g, &DirichletBC::homogeneous(g));
        assert!(load.iter().all(|v| *v == 0.0));
        // u1 faces with i in 2..=2 and j in 1..=2 have all four neighbours interior
        for (i, j) in [(2, 1), (2, 2)] {
            let s: f64 = a.row(g.u1_index(i, j)).map(|(_, v)| v).sum();
            assert!(s.abs() < 1e-12);
        }
        let s: f64 = a.row(g.u2_index(1, 2)).map(|(_, v)| v).sum();
        assert!(s.abs() < 1e-12);
        assert!(a.check_invariants());
    }

    #[test]
    fn laplacian_is_symmetric_and_positive_definite() {
        for n in [4, 7, 16] {
            let g = build_grid(n).unwrap();
            let (a, _) = assemble_velocity_laplacian(g, &DirichletBC::homogeneous(g));
            assert_eq!(a.max_abs_diff(&a.transpose()), 0.0);
            let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
            let b: Vec<f64> = (0..a.nrows()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let rep = cg_solve(&a, &b, 1e-10, 10_000).unwrap();
            assert!(rep.residual <= 1e-9);
            let mut ax = vec![0.0; b.len()];
            a.mul_vec(&rep.x, &mut ax);
            assert!(dot(&rep.x, &ax) > 0.0);
        }
    }

    #[test]
    fn linear_field_is_discretely_harmonic() {
        let g = build_grid(8).unwrap();
        let f = |x: f64, y: f64| [x, 2.0 * y - x];
        let bc = exact_bc(g, f);
        let v = VelocityField::from_fn(g, f);
        let (a, load) = assemble_velocity_laplacian(g, &bc);
        let mut au = vec![0.0; a.nrows()];
        a.mul_vec(&v.interior_vector(), &mut au);
        let max = au.iter().zip(&load).map(|(x, l)| (x - l).abs()).fold(0.0, f64::max);
        assert!(max < 1e-10, "{max}");
        let mf = neg_laplacian(&v, &bc);
        assert!(mf.max_abs() < 1e-10);
    }

    /// Oracle: -Δ(sin πx sin πy) = 2π² sin πx sin πy, both components.
    fn eigen_error(n: usize) -> f64 {
        let g = build_grid(n).unwrap();
        let f = |x: f64, y: f64| {
            let s = (PI * x).sin() * (PI * y).sin();
            [s, s]
        };
        let v = VelocityField::from_fn(g, f);
        let bc = exact_bc(g, f);
        let (a, load) = assemble_velocity_laplacian(g, &bc);
        let u = v.interior_vector();
        let mut au = vec![0.0; u.len()];
        a.mul_vec(&u, &mut au);
        let lam = 2.0 * PI * PI;
        let scale = lam;
        au.iter()
            .zip(&load)
            .zip(&u)
            .map(|((x, l), ui)| ((x - l) - lam * ui).abs() / scale)
            .fold(0.0, f64::max)
    }

    #[test]
    fn eigenfunction_second_order() {
        let e32 = eigen_error(32);
        let e64 = eigen_error(64);
        let order = (e32 / e64).log2();
        assert!(order >= 1.8, "order {order} ({e32}, {e64})");
    }

    #[test]
    fn matrix_free_matches_assembled() {
        let g = build_grid(9).unwrap();
        let f = |x: f64, y: f64| [(3.0 * x).sin() + y * y, x * y.cos()];
        let bcdata = BoundaryData::from_fn(g, |_, x, y| f(x, y));
        let bc = DirichletBC::from_boundary(&bcdata);
        let mut v = VelocityField::from_fn(g, f);
        bc.impose_normal(&mut v);
        let (a, load) = assemble_velocity_laplacian(g, &bc);
        let mut au = vec![0.0; a.nrows()];
        a.mul_vec(&v.interior_vector(), &mut au);
        let mf = neg_laplacian(&v, &bc).interior_vector();
        for ((x, l), m) in au.iter().zip(&load).zip(&mf) {
            assert!((x - l - m).abs() < 1e-9 * (1.0 + m.abs()));
        }
    }

    #[test]
    fn divergence_examples() {
        let g = build_grid(10).unwrap();
        let c = VelocityField::from_fn(g, |_, _| [2.0, -3.0]);
        assert_eq!(divergence(&c).max_abs(), 0.0);
        let lin = VelocityField::from_fn(g, |x, y| [x, -y]);
        assert!(divergence(&lin).max_abs() < 1e-12);
        let quad = VelocityField::from_fn(g, |x, _| [x * x, 0.0]);
        let d = divergence(&quad);
        for i in 0..10 {
            for j in 0..10 {
                let (x, _) = g.cell_center(i, j);
                assert!((d.p[[i, j]] - 2.0 * x).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradient_examples() {
        let g = build_grid(10).unwrap();
        let c = PressureField::from_fn(g, |_, _| 4.2);
        assert_eq!(gradient(&c).max_abs(), 0.0);
        let px = gradient(&PressureField::from_fn(g, |x, _| x));
        for i in 1..10 {
            for j in 0..10 {
                assert!((px.u1[[i, j]] - 1.0).abs() < 1e-12);
            }
        }
        assert!(px.u2.iter().all(|v| v.abs() < 1e-12));
    }

    fn random_pair(n: usize, seed: u64) -> (PressureField, VelocityField) {
        let g = build_grid(n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = PressureField::from_array(g, Array2::from_shape_fn((n, n), |_| rng.gen_range(-1.0..1.0))).unwrap();
        let mut w = VelocityField::zeros(g);
        w.u1.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        w.u2.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        w.clear_boundary_faces();
        (p, w)
    }

    #[test]
    fn gradient_and_divergence_are_adjoint() {
        for seed in 0..5 {
            let (p, w) = random_pair(16, seed);
            let lhs = gradient(&p).dot(&w);
            let rhs = -p.dot(&divergence(&w));
            let scale = p.dot(&p).sqrt() * w.dot(&w).sqrt();
            assert!((lhs - rhs).abs() <= 1e-12 * scale, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn packed_operators_match_field_operators() {
        let (p, w) = random_pair(7, 11);
        let g = p.grid();
        let mut gp = vec![0.0; g.num_velocity_unknowns()];
        gradient_packed(g, &p.to_vector(), &mut gp);
        assert_eq!(gp, gradient(&p).interior_vector());
        let mut dw = vec![0.0; g.num_cells()];
        divergence_packed(g, &w.interior_vector(), &mut dw);
        let expected = divergence(&w).to_vector();
        for (a, b) in dw.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn stream_differences_are_solenoidal() {
        let n = 12;
        let g = build_grid(n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let psi = Array2::from_shape_fn((n + 1, n + 1), |_| rng.gen_range(-1.0..1.0));
        let v = curl_of_nodes(g, &psi);
        assert!(divergence(&v).max_abs() <= 1e-13 * n as f64, "{}", divergence(&v).max_abs());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            #[test]
            fn adjointness_holds_on_every_grid(n in 4usize..24, seed in any::<u64>()) {
                let (p, w) = random_pair(n, seed);
                let lhs = gradient(&p).dot(&w);
                let rhs = -p.dot(&divergence(&w));
                let scale = p.dot(&p).sqrt() * w.dot(&w).sqrt();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
            }

            #[test]
            fn stream_field_divergence_free(n in 4usize..24, seed in any::<u64>()) {
                let g = build_grid(n).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let psi = Array2::from_shape_fn((n + 1, n + 1), |_| rand::Rng::gen_range(&mut rng, -1.0..1.0));
                let d = divergence(&curl_of_nodes(g, &psi)).max_abs();
                // node values are O(1), so differences are O(1/h); relative bound
                prop_assert!(d * g.h() <= 1e-13);
            }
        }
    }
}
