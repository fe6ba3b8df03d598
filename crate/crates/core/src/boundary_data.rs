//! Boundary data on Γ = ∂Ω sampled at boundary face midpoints.
//!
//! Each of the four sides holds `n` samples of the vector `g = (g1, g2)`. Side
//! coordinates run with the Cartesian axis (left to right on bottom/top,
//! bottom to top on left/right), independent of orientation. The unit tangent
//! is counterclockwise: `τ = (-n2, n1)`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Result, VwsError};
use crate::mesh::StaggeredGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Bottom, Side::Right, Side::Top, Side::Left];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn normal(self) -> [f64; 2] {
        match self {
            Side::Bottom => [0.0, -1.0],
            Side::Right => [1.0, 0.0],
            Side::Top => [0.0, 1.0],
            Side::Left => [-1.0, 0.0],
        }
    }

    pub fn tangent(self) -> [f64; 2] {
        let n = self.normal();
        [-n[1], n[0]]
    }

    /// Point on the side at coordinate `s ∈ [0, 1]`.
    pub fn point(self, s: f64) -> (f64, f64) {
        match self {
            Side::Bottom => (s, 0.0),
            Side::Right => (1.0, s),
            Side::Top => (s, 1.0),
            Side::Left => (0.0, s),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Bottom => "bottom",
            Side::Right => "right",
            Side::Top => "top",
            Side::Left => "left",
        }
    }

    pub fn from_name(name: &str) -> Option<Side> {
        Side::ALL.into_iter().find(|s| s.name() == name)
    }
}

/// Which corner singularity a [`corner_variant`] keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Corner {
    /// Corner (0,1): ramp `y` on the right side, regularization near `x = 0`.
    Corner01,
    /// Corner (1,1): ramp `y` on the left side, regularization near `x = 1`.
    Corner11,
}

impl std::str::FromStr for Corner {
    type Err = VwsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "corner_01" | "01" => Ok(Corner::Corner01),
            "corner_11" | "11" => Ok(Corner::Corner11),
            other => Err(VwsError::Format(format!("invalid corner tag {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    grid: StaggeredGrid,
    sides: [Vec<[f64; 2]>; 4],
}

impl BoundaryData {
    pub fn zeros(grid: StaggeredGrid) -> Self {
        let n = grid.n();
        Self {
            grid,
            sides: std::array::from_fn(|_| vec![[0.0; 2]; n]),
        }
    }

    /// Samples `f(side, x, y)` at every boundary face midpoint.
    pub fn from_fn(grid: StaggeredGrid, f: impl Fn(Side, f64, f64) -> [f64; 2]) -> Self {
        let n = grid.n();
        let h = grid.h();
        let sides = Side::ALL.map(|side| {
            (0..n)
                .map(|k| {
                    let (x, y) = side.point((k as f64 + 0.5) * h);
                    f(side, x, y)
                })
                .collect()
        });
        Self { grid, sides }
    }

    pub fn from_sides(grid: StaggeredGrid, sides: [Vec<[f64; 2]>; 4]) -> Result<Self> {
        for s in &sides {
            if s.len() != grid.n() {
                return Err(VwsError::Format(format!(
                    "side has {} samples, grid needs {}",
                    s.len(),
                    grid.n()
                )));
            }
        }
        Ok(Self { grid, sides })
    }

    #[inline]
    pub fn grid(&self) -> StaggeredGrid {
        self.grid
    }

    pub fn side(&self, side: Side) -> &[[f64; 2]] {
        &self.sides[side.index()]
    }

    pub fn side_mut(&mut self, side: Side) -> &mut [[f64; 2]] {
        &mut self.sides[side.index()]
    }

    /// Iterates `(side, k, g)` over all samples.
    pub fn samples(&self) -> impl Iterator<Item = (Side, usize, [f64; 2])> + '_ {
        Side::ALL
            .into_iter()
            .flat_map(move |s| self.sides[s.index()].iter().enumerate().map(move |(k, v)| (s, k, *v)))
    }

    /// Side coordinate of sample `k`.
    pub fn coordinate(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.grid.h()
    }

    /// `g·n` at sample `k` of `side`.
    pub fn normal_component(&self, side: Side, k: usize) -> f64 {
        let v = self.sides[side.index()][k];
        let n = side.normal();
        v[0] * n[0] + v[1] * n[1]
    }

    /// `g·τ` at sample `k` of `side`.
    pub fn tangential_component(&self, side: Side, k: usize) -> f64 {
        let v = self.sides[side.index()][k];
        let t = side.tangent();
        v[0] * t[0] + v[1] * t[1]
    }

    /// Tangential value of `g` at interior node `m` (`1 ≤ m ≤ n-1`) of `side`,
    /// averaged from the two neighbouring midpoint samples.
    pub fn tangential_at_node(&self, side: Side, m: usize) -> f64 {
        0.5 * (self.tangential_component(side, m - 1) + self.tangential_component(side, m))
    }

    pub fn max_abs_normal(&self) -> f64 {
        self.samples()
            .map(|(s, k, _)| self.normal_component(s, k).abs())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        for side in out.sides.iter_mut() {
            for v in side.iter_mut() {
                v[0] *= alpha;
                v[1] *= alpha;
            }
        }
        out
    }

    /// `alpha·self + beta·other`
    pub fn combine(&self, alpha: f64, other: &BoundaryData, beta: f64) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        let mut out = self.clone();
        for (a, b) in out.sides.iter_mut().zip(other.sides.iter()) {
            for (x, y) in a.iter_mut().zip(b.iter()) {
                x[0] = alpha * x[0] + beta * y[0];
                x[1] = alpha * x[1] + beta * y[1];
            }
        }
        Ok(out)
    }

    pub fn max_sample_difference(&self, other: &BoundaryData) -> f64 {
        self.sides
            .iter()
            .zip(other.sides.iter())
            .flat_map(|(a, b)| a.iter().zip(b.iter()))
            .map(|(x, y)| (x[0] - y[0]).abs().max((x[1] - y[1]).abs()))
            .fold(0.0, f64::max)
    }

    /// Text form: one line per sample, `side,index,g1,g2`.
    pub fn to_text(&self) -> String {
        let mut out = format!("# n={}\nside,index,g1,g2\n", self.grid.n());
        for (side, k, v) in self.samples() {
            writeln!(out, "{},{},{:e},{:e}", side.name(), k, v[0], v[1]).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut n = None;
        let mut entries = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(rest) = line.strip_prefix("# n=") {
                n = Some(rest.parse::<usize>().map_err(|e| VwsError::Format(e.to_string()))?);
                continue;
            }
            if line.starts_with('#') || line.starts_with("side,") {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 4 {
                return Err(VwsError::Format(format!("bad boundary line {line:?}")));
            }
            let side = Side::from_name(parts[0])
                .ok_or_else(|| VwsError::Format(format!("unknown side {:?}", parts[0])))?;
            let parse = |s: &str| s.parse::<f64>().map_err(|e| VwsError::Format(e.to_string()));
            let k = parts[1].parse::<usize>().map_err(|e| VwsError::Format(e.to_string()))?;
            entries.push((side, k, [parse(parts[2])?, parse(parts[3])?]));
        }
        let n = n.ok_or_else(|| VwsError::Format("missing '# n=' header".into()))?;
        let grid = StaggeredGrid::new(n)?;
        let mut out = BoundaryData::zeros(grid);
        let mut seen = vec![false; 4 * n];
        for (side, k, v) in entries {
            if k >= n {
                return Err(VwsError::Format(format!("sample index {k} out of range")));
            }
            out.sides[side.index()][k] = v;
            seen[side.index() * n + k] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(VwsError::Format("missing boundary samples".into()));
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

pub(crate) fn smoothstep5(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

/// Cutoff: 1 on `[0, ½]`, 0 on `[¾, 1]`, quintic (C²) transition between.
pub fn sigma(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(VwsError::DomainViolation {
            value: x,
            domain: "[0, 1]",
        });
    }
    Ok(1.0 - smoothstep5((x - 0.5) / 0.25))
}

/// Lid-driven cavity data: `(1, 0)` on the top side, zero elsewhere.
pub fn cavity_g(grid: StaggeredGrid) -> BoundaryData {
    BoundaryData::from_fn(grid, |side, _, _| match side {
        Side::Top => [1.0, 0.0],
        _ => [0.0, 0.0],
    })
}

fn check_eps(grid: StaggeredGrid, eps: f64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(VwsError::InvalidEpsilon(eps));
    }
    if eps < 4.0 * grid.h() {
        log::warn!(
            "boundary layer under-resolved: eps={eps} < 4h={} (n={})",
            4.0 * grid.h(),
            grid.n()
        );
    }
    Ok(())
}

/// Regularized lid profile `1 - σ(x)e^{-x/ε} - σ(1-x)e^{-(1-x)/ε}`.
pub fn lid_profile(x: f64, eps: f64) -> f64 {
    let left = sigma(x).unwrap_or(0.0) * (-x / eps).exp();
    let right = sigma(1.0 - x).unwrap_or(0.0) * (-(1.0 - x) / eps).exp();
    1.0 - left - right
}

/// Cavity data with the lid smoothed near both top corners.
pub fn cavity_g_eps(grid: StaggeredGrid, eps: f64) -> Result<BoundaryData> {
    check_eps(grid, eps)?;
    Ok(BoundaryData::from_fn(grid, |side, x, _| match side {
        Side::Top => [lid_profile(x, eps), 0.0],
        _ => [0.0, 0.0],
    }))
}

/// Single-corner variants of the cavity data, projected onto compatible data.
///
/// `Corner01`: first component `y` on the right side, lid factor
/// `1 - σ(x)e^{-x/ε}`. `Corner11`: first component `y` on the left side, lid
/// factor `1 - σ(1-x)e^{-(1-x)/ε}`. `eps = 0` leaves the lid at 1.
///
/// The ramp sits on a side where the first component is normal, so the raw
/// data has `∫ g·n = ±½`; the result is passed through [`project_compatible`].
pub fn corner_variant(grid: StaggeredGrid, which: Corner, eps: f64) -> Result<BoundaryData> {
    if eps < 0.0 || !eps.is_finite() {
        return Err(VwsError::InvalidEpsilon(eps));
    }
    if eps > 0.0 {
        check_eps(grid, eps)?;
    }
    let lid = |s: f64| -> f64 {
        if eps == 0.0 {
            1.0
        } else {
            1.0 - sigma(s).unwrap_or(0.0) * (-s / eps).exp()
        }
    };
    let raw = BoundaryData::from_fn(grid, |side, x, y| match (which, side) {
        (Corner::Corner01, Side::Top) => [lid(x), 0.0],
        (Corner::Corner01, Side::Right) => [y, 0.0],
        (Corner::Corner11, Side::Top) => [lid(1.0 - x), 0.0],
        (Corner::Corner11, Side::Left) => [y, 0.0],
        _ => [0.0, 0.0],
    });
    Ok(project_compatible(&raw))
}

/// Midpoint value of `∫_Γ g·n dΓ`.
pub fn compatibility_defect(g: &BoundaryData) -> f64 {
    let h = g.grid.h();
    Side::ALL
        .into_iter()
        .map(|s| (0..g.grid.n()).map(|k| g.normal_component(s, k)).sum::<f64>())
        .sum::<f64>()
        * h
}

/// `g - (defect/|Γ|)·n`, with `|Γ| = 4`.
pub fn project_compatible(g: &BoundaryData) -> BoundaryData {
    let shift = compatibility_defect(g) / 4.0;
    let mut out = g.clone();
    if shift == 0.0 {
        return out;
    }
    for side in Side::ALL {
        let n = side.normal();
        for v in out.sides[side.index()].iter_mut() {
            v[0] -= shift * n[0];
            v[1] -= shift * n[1];
        }
    }
    out
}
