//! Uniform MAC discretization of the unit square.
//!
//! Layout (cell `(i, j)` spans `[ih, (i+1)h] × [jh, (j+1)h]`):
//!
//! ```text
//!   pressure p[i, j]   at ((i+½)h, (j+½)h)   shape (n,   n)
//!   u1[i, j]           at (ih,     (j+½)h)   shape (n+1, n)
//!   u2[i, j]           at ((i+½)h, jh    )   shape (n,   n+1)
//!   nodes              at (ih,     jh    )   shape (n+1, n+1)
//! ```
//!
//! Faces with `i ∈ {0, n}` (for `u1`) or `j ∈ {0, n}` (for `u2`) sit on Γ and
//! carry the normal component of the boundary data. Tangential boundary
//! values are never stored; operators realize them through ghost cells.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::boundary_data::BoundaryData;
use crate::error::{Result, VwsError};

/// Uniform staggered grid with `n` cells per side and `h = 1/n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StaggeredGrid {
    n: usize,
}

impl StaggeredGrid {
    pub const MIN_CELLS: usize = 4;

    pub fn new(n: usize) -> Result<Self> {
        if n < Self::MIN_CELLS {
            return Err(VwsError::InvalidGrid(n));
        }
        Ok(Self { n })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn num_cells(&self) -> usize {
        self.n * self.n
    }

    /// Interior (unknown) `u1` faces: `(n-1)·n`.
    pub fn num_interior_u1(&self) -> usize {
        (self.n - 1) * self.n
    }

    /// Interior (unknown) `u2` faces: `n·(n-1)`.
    pub fn num_interior_u2(&self) -> usize {
        self.n * (self.n - 1)
    }

    pub fn num_velocity_unknowns(&self) -> usize {
        self.num_interior_u1() + self.num_interior_u2()
    }

    pub fn u1_face(&self, i: usize, j: usize) -> (f64, f64) {
        let h = self.h();
        (i as f64 * h, (j as f64 + 0.5) * h)
    }

    pub fn u2_face(&self, i: usize, j: usize) -> (f64, f64) {
        let h = self.h();
        ((i as f64 + 0.5) * h, j as f64 * h)
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        let h = self.h();
        ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h)
    }

    pub fn node(&self, i: usize, j: usize) -> (f64, f64) {
        let h = self.h();
        (i as f64 * h, j as f64 * h)
    }

    /// Position of interior face `u1[i, j]` (`1 ≤ i ≤ n-1`) in the packed unknown vector.
    #[inline]
    pub fn u1_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i >= 1 && i < self.n && j < self.n);
        (i - 1) * self.n + j
    }

    /// Position of interior face `u2[i, j]` (`1 ≤ j ≤ n-1`) in the packed unknown vector.
    #[inline]
    pub fn u2_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n && j >= 1 && j < self.n);
        self.num_interior_u1() + i * (self.n - 1) + (j - 1)
    }

    #[inline]
    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    pub(crate) fn ensure_same(&self, other: &StaggeredGrid) -> Result<()> {
        if self.n != other.n {
            return Err(VwsError::GridMismatch(self.n, other.n));
        }
        Ok(())
    }
}

pub fn build_grid(n: usize) -> Result<StaggeredGrid> {
    StaggeredGrid::new(n)
}

/// Velocity on the faces of a [`StaggeredGrid`], boundary faces included.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    grid: StaggeredGrid,
    pub u1: Array2<f64>,
    pub u2: Array2<f64>,
}

impl VelocityField {
    pub fn zeros(grid: StaggeredGrid) -> Self {
        let n = grid.n();
        Self {
            grid,
            u1: Array2::zeros((n + 1, n)),
            u2: Array2::zeros((n, n + 1)),
        }
    }

    pub fn from_arrays(grid: StaggeredGrid, u1: Array2<f64>, u2: Array2<f64>) -> Result<Self> {
        let n = grid.n();
        if u1.dim() != (n + 1, n) || u2.dim() != (n, n + 1) {
            return Err(VwsError::Format(format!(
                "velocity arrays {:?}/{:?} do not match grid n={n}",
                u1.dim(),
                u2.dim()
            )));
        }
        Ok(Self { grid, u1, u2 })
    }

    /// Samples `f(x, y) = (f1, f2)`: `f1` on x-faces, `f2` on y-faces.
    pub fn from_fn(grid: StaggeredGrid, f: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let n = grid.n();
        let u1 = Array2::from_shape_fn((n + 1, n), |(i, j)| {
            let (x, y) = grid.u1_face(i, j);
            f(x, y)[0]
        });
        let u2 = Array2::from_shape_fn((n, n + 1), |(i, j)| {
            let (x, y) = grid.u2_face(i, j);
            f(x, y)[1]
        });
        Self { grid, u1, u2 }
    }

    #[inline]
    pub fn grid(&self) -> StaggeredGrid {
        self.grid
    }

    /// Packs the interior faces into the solver ordering (all `u1`, then all `u2`).
    pub fn interior_vector(&self) -> Vec<f64> {
        let g = self.grid;
        let n = g.n();
        let mut out = vec![0.0; g.num_velocity_unknowns()];
        for i in 1..n {
            for j in 0..n {
                out[g.u1_index(i, j)] = self.u1[[i, j]];
            }
        }
        for i in 0..n {
            for j in 1..n {
                out[g.u2_index(i, j)] = self.u2[[i, j]];
            }
        }
        out
    }

    /// Overwrites interior faces from a packed vector; boundary faces are untouched.
    pub fn set_interior(&mut self, values: &[f64]) {
        let g = self.grid;
        let n = g.n();
        assert_eq!(values.len(), g.num_velocity_unknowns());
        for i in 1..n {
            for j in 0..n {
                self.u1[[i, j]] = values[g.u1_index(i, j)];
            }
        }
        for i in 0..n {
            for j in 1..n {
                self.u2[[i, j]] = values[g.u2_index(i, j)];
            }
        }
    }

    /// Zeroes the faces lying on Γ.
    pub fn clear_boundary_faces(&mut self) {
        let n = self.grid.n();
        for j in 0..n {
            self.u1[[0, j]] = 0.0;
            self.u1[[n, j]] = 0.0;
        }
        for i in 0..n {
            self.u2[[i, 0]] = 0.0;
            self.u2[[i, n]] = 0.0;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.u1 *= alpha;
        self.u2 *= alpha;
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.scale(alpha);
        out
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &VelocityField) {
        self.u1.scaled_add(alpha, &other.u1);
        self.u2.scaled_add(alpha, &other.u2);
    }

    pub fn sub(&self, other: &VelocityField) -> VelocityField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.u1
            .iter()
            .chain(self.u2.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Weighted inner product matching [`l2_norm_omega`]: weight `h²` on interior
    /// faces and `h²/2` on boundary faces (trapezoid across the normal direction).
    pub fn dot(&self, other: &VelocityField) -> f64 {
        let n = self.grid.n();
        let h2 = self.grid.h().powi(2);
        let mut s = 0.0;
        for ((i, j), a) in self.u1.indexed_iter() {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            s += w * a * other.u1[[i, j]];
        }
        for ((i, j), a) in self.u2.indexed_iter() {
            let w = if j == 0 || j == n { 0.5 } else { 1.0 };
            s += w * a * other.u2[[i, j]];
        }
        s * h2
    }
}

/// Pressure (or any scalar) at cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureField {
    grid: StaggeredGrid,
    pub p: Array2<f64>,
}

impl PressureField {
    pub fn zeros(grid: StaggeredGrid) -> Self {
        let n = grid.n();
        Self {
            grid,
            p: Array2::zeros((n, n)),
        }
    }

    pub fn from_fn(grid: StaggeredGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.n();
        let p = Array2::from_shape_fn((n, n), |(i, j)| {
            let (x, y) = grid.cell_center(i, j);
            f(x, y)
        });
        Self { grid, p }
    }

    pub fn from_array(grid: StaggeredGrid, p: Array2<f64>) -> Result<Self> {
        let n = grid.n();
        if p.dim() != (n, n) {
            return Err(VwsError::Format(format!(
                "pressure array {:?} does not match grid n={n}",
                p.dim()
            )));
        }
        Ok(Self { grid, p })
    }

    /// Builds a field from the solver ordering (`cell_index`).
    pub fn from_vector(grid: StaggeredGrid, values: &[f64]) -> Self {
        let n = grid.n();
        assert_eq!(values.len(), n * n);
        let p = Array2::from_shape_fn((n, n), |(i, j)| values[grid.cell_index(i, j)]);
        Self { grid, p }
    }

    pub fn to_vector(&self) -> Vec<f64> {
        let n = self.grid.n();
        let mut out = vec![0.0; n * n];
        for ((i, j), v) in self.p.indexed_iter() {
            out[self.grid.cell_index(i, j)] = *v;
        }
        out
    }

    #[inline]
    pub fn grid(&self) -> StaggeredGrid {
        self.grid
    }

    pub fn mean(&self) -> f64 {
        self.p.mean().unwrap_or(0.0)
    }

    /// Removes the mean so the field represents the zero-mean gauge.
    pub fn normalize(&mut self) {
        let m = self.mean();
        self.p -= m;
    }

    pub fn max_abs(&self) -> f64 {
        self.p.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn sub(&self, other: &PressureField) -> PressureField {
        Self {
            grid: self.grid,
            p: &self.p - &other.p,
        }
    }

    pub fn dot(&self, other: &PressureField) -> f64 {
        let h2 = self.grid.h().powi(2);
        self.p
            .iter()
            .zip(other.p.iter())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * h2
    }
}

/// Fields with a discrete `L²(Ω)` norm.
pub trait OmegaNorm {
    fn l2_norm(&self) -> f64;
}

impl OmegaNorm for VelocityField {
    fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

impl OmegaNorm for PressureField {
    fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

pub fn l2_norm_omega<F: OmegaNorm + ?Sized>(field: &F) -> f64 {
    field.l2_norm()
}

/// Midpoint rule over the `4n` boundary face midpoints (corners carry no weight).
pub fn l2_norm_gamma(g: &BoundaryData) -> f64 {
    let h = g.grid().h();
    let sum: f64 = g.samples().map(|(_, _, v)| v[0] * v[0] + v[1] * v[1]).sum();
    (sum * h).sqrt()
}

// ---------------------------------------------------------------------------
// Binary field dumps

const MAGIC: &[u8; 4] = b"MACF";

/// What a dumped array holds; determines its expected shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComponentTag {
    U1,
    U2,
    P,
    Node,
}

impl ComponentTag {
    fn bytes(self) -> [u8; 4] {
        match self {
            ComponentTag::U1 => *b"U1\0\0",
            ComponentTag::U2 => *b"U2\0\0",
            ComponentTag::P => *b"P\0\0\0",
            ComponentTag::Node => *b"NODE",
        }
    }

    fn from_bytes(b: [u8; 4]) -> Result<Self> {
        match &b {
            b"U1\0\0" => Ok(ComponentTag::U1),
            b"U2\0\0" => Ok(ComponentTag::U2),
            b"P\0\0\0" => Ok(ComponentTag::P),
            b"NODE" => Ok(ComponentTag::Node),
            _ => Err(VwsError::Format(format!("unknown component tag {b:?}"))),
        }
    }

    pub fn shape(self, n: usize) -> (usize, usize) {
        match self {
            ComponentTag::U1 => (n + 1, n),
            ComponentTag::U2 => (n, n + 1),
            ComponentTag::P => (n, n),
            ComponentTag::Node => (n + 1, n + 1),
        }
    }
}

/// Sidecar record written next to each binary dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub n: usize,
    pub kind: ComponentTag,
    pub rows: usize,
    pub cols: usize,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".toml");
    PathBuf::from(s)
}

/// Writes `data` as: `"MACF"`, `n` (u64 LE), 4-byte tag, then the values as
/// little-endian f64 in row-major order of the array's `(i, j)` index. A TOML
/// sidecar `<path>.toml` records grid size and field kind.
pub fn write_component(path: &Path, n: usize, tag: ComponentTag, data: &Array2<f64>) -> Result<()> {
    let (rows, cols) = tag.shape(n);
    if data.dim() != (rows, cols) {
        return Err(VwsError::Format(format!(
            "{tag:?} array has shape {:?}, expected {:?}",
            data.dim(),
            (rows, cols)
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(n as u64).to_le_bytes())?;
    w.write_all(&tag.bytes())?;
    for v in data.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;

    let meta = FieldMeta {
        n,
        kind: tag,
        rows,
        cols,
    };
    let text = toml::to_string(&meta).map_err(|e| VwsError::Format(e.to_string()))?;
    std::fs::write(sidecar_path(path), text)?;
    Ok(())
}

pub fn read_component(path: &Path) -> Result<(usize, ComponentTag, Array2<f64>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header = [0u8; 16];
    r.read_exact(&mut header)?;
    if &header[..4] != MAGIC {
        return Err(VwsError::Format("missing MACF magic".into()));
    }
    let n = u64::from_le_bytes(header[4..12].try_into().unwrap()) as usize;
    let tag = ComponentTag::from_bytes(header[12..16].try_into().unwrap())?;
    let (rows, cols) = tag.shape(n);
    let mut raw = Vec::new();
    r.read_to_end(&mut raw)?;
    if raw.len() != rows * cols * 8 {
        return Err(VwsError::Format(format!(
            "payload has {} bytes, expected {}",
            raw.len(),
            rows * cols * 8
        )));
    }
    let values: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let data = Array2::from_shape_vec((rows, cols), values)
        .map_err(|e| VwsError::Format(e.to_string()))?;
    Ok((n, tag, data))
}

pub fn read_meta(path: &Path) -> Result<FieldMeta> {
    let text = std::fs::read_to_string(sidecar_path(path))?;
    toml::from_str(&text).map_err(|e| VwsError::Format(e.to_string()))
}

impl VelocityField {
    /// Writes `<prefix>.u1.macf` and `<prefix>.u2.macf` (plus sidecars).
    pub fn save(&self, prefix: &Path) -> Result<()> {
        let n = self.grid.n();
        write_component(&with_suffix(prefix, "u1.macf"), n, ComponentTag::U1, &self.u1)?;
        write_component(&with_suffix(prefix, "u2.macf"), n, ComponentTag::U2, &self.u2)
    }

    pub fn load(prefix: &Path) -> Result<Self> {
        let (n1, t1, u1) = read_component(&with_suffix(prefix, "u1.macf"))?;
        let (n2, t2, u2) = read_component(&with_suffix(prefix, "u2.macf"))?;
        if t1 != ComponentTag::U1 || t2 != ComponentTag::U2 {
            return Err(VwsError::Format("velocity dump has wrong component tags".into()));
        }
        if n1 != n2 {
            return Err(VwsError::GridMismatch(n1, n2));
        }
        VelocityField::from_arrays(StaggeredGrid::new(n1)?, u1, u2)
    }
}

impl PressureField {
    pub fn save(&self, path: &Path) -> Result<()> {
        write_component(path, self.grid.n(), ComponentTag::P, &self.p)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (n, tag, p) = read_component(path)?;
        if tag != ComponentTag::P {
            return Err(VwsError::Format(format!("expected pressure dump, found {tag:?}")));
        }
        PressureField::from_array(StaggeredGrid::new(n)?, p)
    }
}

pub(crate) fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn grid_counts() {
        let g = build_grid(4).unwrap();
        assert_eq!(g.h(), 0.25);
        assert_eq!(g.num_cells(), 16);
        let g = build_grid(8).unwrap();
        assert_eq!(g.num_interior_u1(), 56);
        assert_eq!(g.num_interior_u2(), 56);
        assert!(matches!(build_grid(3), Err(VwsError::InvalidGrid(3))));
    }

    #[test]
    fn face_coordinates_follow_mac_layout() {
        let g = build_grid(4).unwrap();
        assert_eq!(g.u1_face(0, 0), (0.0, 0.125));
        assert_eq!(g.u2_face(3, 4), (0.875, 1.0));
        assert_eq!(g.cell_center(1, 2), (0.375, 0.625));
    }

    #[test]
    fn constant_fields_have_unit_norm() {
        for n in [4, 7, 32] {
            let g = build_grid(n).unwrap();
            let p = PressureField::from_fn(g, |_, _| 1.0);
            assert!((l2_norm_omega(&p) - 1.0).abs() < 1e-14);
            let v = VelocityField::from_fn(g, |_, _| [1.0, 0.0]);
            assert!((l2_norm_omega(&v) - 1.0).abs() < 1e-14);
            let v = VelocityField::from_fn(g, |_, _| [0.0, 1.0]);
            assert!((l2_norm_omega(&v) - 1.0).abs() < 1e-14);
            assert_eq!(l2_norm_omega(&VelocityField::zeros(g)), 0.0);
        }
    }

    #[test]
    fn sine_product_norm() {
        let g = build_grid(64).unwrap();
        let v = VelocityField::from_fn(g, |x, y| [(2.0 * PI * x).sin() * (2.0 * PI * y).sin(), 0.0]);
        assert!((l2_norm_omega(&v) - 0.5).abs() < 0.01);
    }

    #[test]
    fn smooth_norm_converges_second_order() {
        // ∫∫ e^{2(x+y)} = ((e² - 1)/2)²
        let exact = (1f64.exp().powi(2) - 1.0) / 2.0;
        let errs: Vec<f64> = [16, 32, 64, 128]
            .iter()
            .map(|&n| {
                let g = build_grid(n).unwrap();
                let v = VelocityField::from_fn(g, |x, y| [(x + y).exp(), 0.0]);
                (l2_norm_omega(&v) - exact).abs()
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 1.8, "order {order} from {errs:?}");
        }
    }

    #[test]
    fn packing_roundtrip() {
        let g = build_grid(5).unwrap();
        let v = VelocityField::from_fn(g, |x, y| [x + 3.0 * y, x * y]);
        let mut w = VelocityField::zeros(g);
        w.set_interior(&v.interior_vector());
        let mut expected = v.clone();
        expected.clear_boundary_faces();
        assert_eq!(w, expected);
    }

    #[test]
    fn binary_dump_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let g = build_grid(6).unwrap();
        let v = VelocityField::from_fn(g, |x, y| [x.sin(), y * y - x]);
        let prefix = dir.path().join("vel");
        v.save(&prefix).unwrap();
        assert_eq!(VelocityField::load(&prefix).unwrap(), v);

        let bytes = std::fs::read(with_suffix(&prefix, "u1.macf")).unwrap();
        assert_eq!(&bytes[..4], b"MACF");
        assert_eq!(u64::from_le_bytes(bytes[4..12].try_into().unwrap()), 6);
        assert_eq!(&bytes[12..16], b"U1\0\0");
        assert_eq!(bytes.len(), 16 + 7 * 6 * 8);
        let first = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
        assert_eq!(first, v.u1[[0, 0]]);
        let second = f64::from_le_bytes(bytes[24..32].try_into().unwrap());
        assert_eq!(second, v.u1[[0, 1]]);

        let meta = read_meta(&with_suffix(&prefix, "u2.macf")).unwrap();
        assert_eq!(meta.kind, ComponentTag::U2);
        assert_eq!((meta.rows, meta.cols), (6, 7));
    }

    #[test]
    fn corrupt_dump_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.macf");
        std::fs::write(&path, b"NOPE0000000000000000").unwrap();
        assert!(matches!(read_component(&path), Err(VwsError::Format(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn norm_is_absolutely_homogeneous(alpha in -1e3f64..1e3, n in 4usize..20, a in -2.0f64..2.0) {
                let g = build_grid(n).unwrap();
                let v = VelocityField::from_fn(g, |x, y| [(a * x).cos() + y, x * y - a]);
                let base = l2_norm_omega(&v);
                let scaled = l2_norm_omega(&v.scaled(alpha));
                prop_assert!((scaled - alpha.abs() * base).abs() <= 1e-13 * (alpha.abs() * base).max(1e-300));
                let p = PressureField::from_fn(g, |x, y| x - a * y);
                let mut q = p.clone();
                q.p *= alpha;
                prop_assert!((l2_norm_omega(&q) - alpha.abs() * l2_norm_omega(&p)).abs()
                    <= 1e-13 * (alpha.abs() * l2_norm_omega(&p)).max(1e-300));
            }
        }
    }
}
