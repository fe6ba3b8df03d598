//! Direct solver for `(shift·I + scale·A₀)·x = b`, where `A₀` is the
//! homogeneous velocity Laplacian of [`super::assemble_velocity_laplacian`].
//!
//! Each velocity component diagonalizes in a separable sine basis: along the
//! direction where the component sits on faces the wall values are Dirichlet
//! on grid points (DST-I), across the ghost-reflected direction the
//! eigenvectors are `sin(πl(j+½)/n)` (DST-II/III). All transforms go through
//! a complex FFT of an odd extension.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::LinearOperator;
use crate::mesh::StaggeredGrid;

pub struct SpectralLaplacian {
    grid: StaggeredGrid,
    shift: f64,
    scale: f64,
    fft_2n: Arc<dyn Fft<f64>>,
    fft_4n: Arc<dyn Fft<f64>>,
    /// Eigenvalues of the point-Dirichlet 1-D operator, `k = 1..n-1`.
    lam_point: Vec<f64>,
    /// Eigenvalues of the ghost-reflected 1-D operator, `l = 1..n`.
    lam_ghost: Vec<f64>,
}

impl std::fmt::Debug for SpectralLaplacian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralLaplacian")
            .field("n", &self.grid.n())
            .field("shift", &self.shift)
            .field("scale", &self.scale)
            .finish()
    }
}

impl SpectralLaplacian {
    pub fn new(grid: StaggeredGrid, shift: f64, scale: f64) -> Self {
        let n = grid.n();
        let ih2 = 1.0 / grid.h().powi(2);
        let mut planner = FftPlanner::new();
        let eig = |k: usize| (2.0 - 2.0 * (std::f64::consts::PI * k as f64 / n as f64).cos()) * ih2;
        Self {
            grid,
            shift,
            scale,
            fft_2n: planner.plan_fft_forward(2 * n),
            fft_4n: planner.plan_fft_forward(4 * n),
            lam_point: (1..n).map(eig).collect(),
            lam_ghost: (1..=n).map(eig).collect(),
        }
    }

    pub fn grid(&self) -> StaggeredGrid {
        self.grid
    }

    /// Solves in place on a packed velocity vector.
    pub fn solve(&self, b: &[f64], x: &mut [f64]) {
        let g = self.grid;
        let n = g.n();
        let m1 = g.num_interior_u1();
        assert_eq!(b.len(), g.num_velocity_unknowns());
        // u1 block stored as [i-1][j]: rows along x (point), columns along y (ghost)
        self.solve_block(&b[..m1], &mut x[..m1], n - 1, n, false);
        // u2 block stored as [i][j-1]: rows along x (ghost), columns along y (point)
        self.solve_block(&b[m1..], &mut x[m1..], n, n - 1, true);
    }

    /// `rows × cols` row-major block. `transposed = false`: the row index is
    /// the point direction and the column index the ghost direction.
    fn solve_block(&self, b: &[f64], x: &mut [f64], rows: usize, cols: usize, transposed: bool) {
        let n = self.grid.n();
        let mut work = b.to_vec();
        let mut scratch = Transforms::new(n, &self.fft_2n, &self.fft_4n);

        // forward along rows (contiguous) and columns (strided)
        let (row_kind, col_kind) = if transposed {
            (Kind::Ghost, Kind::Point)
        } else {
            (Kind::Point, Kind::Ghost)
        };
        let mut line = vec![0.0; rows.max(cols)];
        for r in 0..rows {
            let seg = &mut work[r * cols..(r + 1) * cols];
            scratch.forward(col_kind, seg, &mut line[..cols]);
            seg.copy_from_slice(&line[..cols]);
        }
        let mut column = vec![0.0; rows];
        for c in 0..cols {
            for r in 0..rows {
                column[r] = work[r * cols + c];
            }
            scratch.forward(row_kind, &column, &mut line[..rows]);
            for r in 0..rows {
                work[r * cols + c] = line[r];
            }
        }

        for r in 0..rows {
            for c in 0..cols {
                let (lx, ly) = if transposed {
                    (self.lam_ghost[r], self.lam_point[c])
                } else {
                    (self.lam_point[r], self.lam_ghost[c])
                };
                work[r * cols + c] /= self.shift + self.scale * (lx + ly);
            }
        }

        for c in 0..cols {
            for r in 0..rows {
                column[r] = work[r * cols + c];
            }
            scratch.inverse(row_kind, &column, &mut line[..rows]);
            for r in 0..rows {
                work[r * cols + c] = line[r];
            }
        }
        for r in 0..rows {
            let seg = &mut work[r * cols..(r + 1) * cols];
            scratch.inverse(col_kind, seg, &mut line[..cols]);
            seg.copy_from_slice(&line[..cols]);
        }
        x.copy_from_slice(&work);
    }
}

impl LinearOperator for SpectralLaplacian {
    fn dim(&self) -> usize {
        self.grid.num_velocity_unknowns()
    }

    /// Applies the inverse operator.
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.solve(x, y);
    }
}

#[derive(Clone, Copy)]
enum Kind {
    /// values at `i = 1..n-1`, basis `sin(πki/n)`
    Point,
    /// values at `j = 0..n-1`, basis `sin(πl(j+½)/n)`, `l = 1..n`
    Ghost,
}

struct Transforms<'a> {
    n: usize,
    fft_2n: &'a Arc<dyn Fft<f64>>,
    fft_4n: &'a Arc<dyn Fft<f64>>,
    buf2: Vec<Complex64>,
    buf4: Vec<Complex64>,
    fft_scratch: Vec<Complex64>,
}

impl<'a> Transforms<'a> {
    fn new(n: usize, fft_2n: &'a Arc<dyn Fft<f64>>, fft_4n: &'a Arc<dyn Fft<f64>>) -> Self {
        let scratch_len = fft_2n
            .get_inplace_scratch_len()
            .max(fft_4n.get_inplace_scratch_len());
        Self {
            n,
            fft_2n,
            fft_4n,
            buf2: vec![Complex64::new(0.0, 0.0); 2 * n],
            buf4: vec![Complex64::new(0.0, 0.0); 4 * n],
            fft_scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    /// `Σ_k a_k sin(2πkm/L)` for all `m`, after odd extension in a length-`L` buffer.
    fn run(&mut self, long: bool) -> &[Complex64] {
        if long {
            self.fft_4n.process_with_scratch(&mut self.buf4, &mut self.fft_scratch);
            &self.buf4
        } else {
            self.fft_2n.process_with_scratch(&mut self.buf2, &mut self.fft_scratch);
            &self.buf2
        }
    }

    fn forward(&mut self, kind: Kind, input: &[f64], out: &mut [f64]) {
        let n = self.n;
        match kind {
            Kind::Point => {
                // X_k = Σ_{i=1}^{n-1} x_i sin(πki/n), L = 2n
                self.buf2.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
                for (a, &v) in input.iter().enumerate() {
                    let i = a + 1;
                    self.buf2[i].re = v;
                    self.buf2[2 * n - i].re = -v;
                }
                let y = self.run(false);
                for k in 1..n {
                    out[k - 1] = -0.5 * y[k].im;
                }
            }
            Kind::Ghost => {
                // X_l = Σ_{j=0}^{n-1} x_j sin(πl(2j+1)/2n), L = 4n
                self.buf4.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
                for (j, &v) in input.iter().enumerate() {
                    let idx = 2 * j + 1;
                    self.buf4[idx].re = v;
                    self.buf4[4 * n - idx].re = -v;
                }
                let y = self.run(true);
                for l in 1..=n {
                    out[l - 1] = -0.5 * y[l].im;
                }
            }
        }
    }

    fn inverse(&mut self, kind: Kind, input: &[f64], out: &mut [f64]) {
        let n = self.n;
        let nf = n as f64;
        match kind {
            Kind::Point => {
                self.forward(Kind::Point, input, out);
                out.iter_mut().for_each(|v| *v *= 2.0 / nf);
            }
            Kind::Ghost => {
                // x_j = Σ_l w_l X_l sin(πl(2j+1)/2n), w_l = 2/n (l < n), 1/n (l = n)
                self.buf4.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
                for (a, &v) in input.iter().enumerate() {
                    let l = a + 1;
                    let w = if l == n { 1.0 / nf } else { 2.0 / nf };
                    self.buf4[l].re = w * v;
                    self.buf4[4 * n - l].re = -w * v;
                }
                let y = self.run(true);
                for j in 0..n {
                    out[j] = -0.5 * y[2 * j + 1].im;
                }
            }
        }
    }
}
