//! Boundary traces of velocity fields, a tangential lifting and the
//! generalized Stokes pairing `L_u(g₁) = ∫_Ω u·Δv`.
//!
//! The lift of a tangential profile `t` is the discrete curl of the node
//! stream function
//!
//! ```text
//!   Ψ = Σ_sides -½ d² t(c) κ(c) χ(d)
//! ```
//!
//! with `d` the distance to the side, `c` the coordinate along it, `χ` a
//! cutoff in the distance and `κ` a taper vanishing at the corners. The lift is
//! exactly divergence free, vanishes on Γ, and has `∂v/∂n = κ·t·τ`; the taper
//! makes the lift smooth across corners, so the trace actually realized is
//! [`TangentialBoundaryData::effective`].

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::boundary_data::{smoothstep5, BoundaryData, Side};
use crate::error::{Result, VwsError};
use crate::mesh::{StaggeredGrid, VelocityField};
use crate::operators::{curl_of_nodes, neg_laplacian, DirichletBC};

/// Width of the corner taper `κ`.
pub const CORNER_TAPER: f64 = 0.25;
/// The cutoff `χ` is 1 below this distance...
pub const CUTOFF_INNER: f64 = 0.125;
/// ...and 0 beyond this one.
pub const CUTOFF_OUTER: f64 = 0.25;

/// Corner taper along a side: 0 at both ends with two vanishing
/// derivatives, 1 in the middle.
pub fn corner_taper(c: f64) -> f64 {
    smoothstep5(c / CORNER_TAPER) * smoothstep5((1.0 - c) / CORNER_TAPER)
}

/// Distance cutoff: 1 for `d ≤ 1/8`, 0 for `d ≥ 1/4`, C² in between.
pub fn distance_cutoff(d: f64) -> f64 {
    1.0 - smoothstep5((d - CUTOFF_INNER) / (CUTOFF_OUTER - CUTOFF_INNER))
}

/// Scalar samples of `g₁·τ` at the boundary face midpoints; the vector field
/// is `g₁ = (g₁·τ) τ`, so `g₁·n = 0` by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentialBoundaryData {
    grid: StaggeredGrid,
    sides: [Vec<f64>; 4],
}

impl TangentialBoundaryData {
    pub fn zeros(grid: StaggeredGrid) -> Self {
        Self {
            grid,
            sides: std::array::from_fn(|_| vec![0.0; grid.n()]),
        }
    }

    /// Samples `f(side, c)` at the midpoints, `c` the side coordinate.
    pub fn from_fn(grid: StaggeredGrid, f: impl Fn(Side, f64) -> f64) -> Self {
        let h = grid.h();
        Self {
            grid,
            sides: Side::ALL.map(|s| (0..grid.n()).map(|k| f(s, (k as f64 + 0.5) * h)).collect()),
        }
    }

    /// Keeps only the tangential part of `g`.
    pub fn from_boundary_data(g: &BoundaryData) -> Self {
        let grid = g.grid();
        Self {
            grid,
            sides: Side::ALL.map(|s| (0..grid.n()).map(|k| g.tangential_component(s, k)).collect()),
        }
    }

    pub fn grid(&self) -> StaggeredGrid {
        self.grid
    }

    pub fn side(&self, side: Side) -> &[f64] {
        &self.sides[side.index()]
    }

    pub fn to_boundary_data(&self) -> BoundaryData {
        let sides = Side::ALL.map(|s| {
            let t = s.tangent();
            self.side(s).iter().map(|v| [v * t[0], v * t[1]]).collect()
        });
        BoundaryData::from_sides(self.grid, sides).expect("side lengths match grid")
    }

    /// The tangential trace realized by [`lift_tangential`]: `κ·(g₁·τ)`.
    pub fn effective(&self) -> Self {
        let h = self.grid.h();
        let mut out = self.clone();
        for s in &mut out.sides {
            for (k, v) in s.iter_mut().enumerate() {
                *v *= corner_taper((k as f64 + 0.5) * h);
            }
        }
        out
    }

    pub fn combine(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        let mut out = self.clone();
        for (a, b) in out.sides.iter_mut().zip(&other.sides) {
            for (x, y) in a.iter_mut().zip(b) {
                *x = alpha * *x + beta * y;
            }
        }
        Ok(out)
    }

    /// Profile value at boundary node `m` of `side`, linear between midpoints.
    fn at_node(&self, side: Side, m: usize) -> f64 {
        let s = self.side(side);
        let n = s.len();
        match m {
            0 => s[0],
            m if m == n => s[n - 1],
            m => 0.5 * (s[m - 1] + s[m]),
        }
    }
}

/// `u·n` at the boundary face midpoints, indexed by [`Side::index`].
pub fn normal_trace(u: &VelocityField) -> [Vec<f64>; 4] {
    let n = u.grid().n();
    Side::ALL.map(|side| {
        (0..n)
            .map(|k| match side {
                Side::Bottom => -u.u2[[k, 0]],
                Side::Top => u.u2[[k, n]],
                Side::Left => -u.u1[[0, k]],
                Side::Right => u.u1[[n, k]],
            })
            .collect()
    })
}

/// Node values of the lifting stream function.
pub fn lift_stream_function(g1: &TangentialBoundaryData) -> Array2<f64> {
    let grid = g1.grid();
    let n = grid.n();
    let h = grid.h();
    let mut psi = Array2::zeros((n + 1, n + 1));
    for i in 0..=n {
        for j in 0..=n {
            let (x, y) = (i as f64 * h, j as f64 * h);
            let mut v = 0.0;
            for side in Side::ALL {
                let (d, c, m) = match side {
                    Side::Bottom => (y, x, i),
                    Side::Top => (1.0 - y, x, i),
                    Side::Left => (x, y, j),
                    Side::Right => (1.0 - x, y, j),
                };
                if d >= CUTOFF_OUTER {
                    continue;
                }
                v -= 0.5 * d * d * g1.at_node(side, m) * corner_taper(c) * distance_cutoff(d);
            }
            psi[[i, j]] = v;
        }
    }
    psi
}

/// Divergence-free lift `v` with `v = 0` on Γ and `∂v/∂n ≈ κ·g₁`.
pub fn lift_tangential(g1: &TangentialBoundaryData) -> VelocityField {
    curl_of_nodes(g1.grid(), &lift_stream_function(g1))
}

/// `⟨u, Δ_h v⟩` over the interior faces for a lift `v` vanishing on Γ.
pub fn pairing_with_lift(u: &VelocityField, v: &VelocityField) -> f64 {
    let grid = u.grid();
    let mut lap = neg_laplacian(v, &DirichletBC::homogeneous(grid));
    lap.scale(-1.0);
    u.dot(&lap)
}

/// Discrete `L_u(g₁) = ∫_Ω u·Δv` with `v = lift_tangential(g₁)`.
pub fn pairing_l(u: &VelocityField, g1: &TangentialBoundaryData) -> Result<f64> {
    u.grid().ensure_same(&g1.grid())?;
    Ok(pairing_with_lift(u, &lift_tangential(g1)))
}

/// Stream function `(x(1-x)y(1-y))³·R(x,y)` with `R` a seeded random cosine
/// combination; its curl vanishes on Γ together with its normal derivative.
pub fn random_interior_stream(grid: StaggeredGrid, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coef: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let n = grid.n();
    let h = grid.h();
    // the bubble peaks at 4^-6; rescale to O(1) velocities
    let amp = 4f64.powi(6);
    Array2::from_shape_fn((n + 1, n + 1), |(i, j)| {
        let (x, y) = (i as f64 * h, j as f64 * h);
        let bubble = (x * (1.0 - x) * y * (1.0 - y)).powi(3);
        let r: f64 = (0..3)
            .flat_map(|k| (0..3).map(move |l| (k, l)))
            .zip(&coef)
            .map(|((k, l), a)| {
                a * (std::f64::consts::PI * k as f64 * x).cos() * (std::f64::consts::PI * l as f64 * y).cos()
            })
            .sum();
        amp * bubble * r
    })
}

/// `|L via v₁ - L via v₁ + w|` for a random admissible perturbation `w`.
///
/// `seed = None` uses `w = 0`.
pub fn lifting_independence_gap(u: &VelocityField, g1: &TangentialBoundaryData, seed: Option<u64>) -> Result<f64> {
    let grid = u.grid();
    grid.ensure_same(&g1.grid())?;
    let v1 = lift_tangential(g1);
    let mut v2 = v1.clone();
    if let Some(seed) = seed {
        let w = curl_of_nodes(grid, &random_interior_stream(grid, seed));
        v2.axpy(1.0, &w);
    }
    Ok((pairing_with_lift(u, &v1) - pairing_with_lift(u, &v2)).abs())
}

/// Smooth non-Stokes velocity used as a negative control: a seeded random
/// low-mode cosine field with nonzero divergence and boundary values.
pub fn random_smooth_field(grid: StaggeredGrid, seed: u64) -> VelocityField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<f64> = (0..18).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let pi = std::f64::consts::PI;
    VelocityField::from_fn(grid, |x, y| {
        let mut v = [0.0; 2];
        for k in 0..3 {
            for l in 0..3 {
                let b = (pi * k as f64 * x).cos() * (pi * l as f64 * y).cos();
                v[0] += c[3 * k + l] * b;
                v[1] += c[9 + 3 * k + l] * b;
            }
        }
        v
    })
}

/// Per-side tangential probe profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeMode {
    One,
    Sin(u32),
    Cos(u32),
}

impl ProbeMode {
    pub const ALL: [ProbeMode; 5] = [
        ProbeMode::One,
        ProbeMode::Sin(1),
        ProbeMode::Cos(1),
        ProbeMode::Sin(2),
        ProbeMode::Cos(2),
    ];

    pub fn eval(self, s: f64) -> f64 {
        let pi = std::f64::consts::PI;
        match self {
            ProbeMode::One => 1.0,
            ProbeMode::Sin(k) => (k as f64 * pi * s).sin(),
            ProbeMode::Cos(k) => (k as f64 * pi * s).cos(),
        }
    }

    pub fn label(self) -> String {
        match self {
            ProbeMode::One => "1".into(),
            ProbeMode::Sin(k) => format!("sin{k}"),
            ProbeMode::Cos(k) => format!("cos{k}"),
        }
    }
}

/// A probe: one profile supported on one side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Probe {
    pub side: Side,
    pub mode: ProbeMode,
}

impl Probe {
    pub fn id(&self) -> String {
        format!("{}:{}", self.side.name(), self.mode.label())
    }

    pub fn data(&self, grid: StaggeredGrid) -> TangentialBoundaryData {
        TangentialBoundaryData::from_fn(grid, |s, c| if s == self.side { self.mode.eval(c) } else { 0.0 })
    }

    /// `∫_side f(c)·κ(c)·p(c) dc` by composite Gauss–Legendre quadrature,
    /// for the reference value of the pairing against a trace `f`.
    pub fn reference(&self, f: impl Fn(f64) -> f64) -> f64 {
        gauss_legendre_01(|c| f(c) * corner_taper(c) * self.mode.eval(c), 400)
    }
}

/// All 20 probes: five modes on each side.
pub fn probe_set() -> Vec<Probe> {
    Side::ALL
        .into_iter()
        .flat_map(|side| ProbeMode::ALL.into_iter().map(move |mode| Probe { side, mode }))
        .collect()
}

/// Composite 4-point Gauss–Legendre rule on `[0, 1]` with `panels` panels.
pub fn gauss_legendre_01(f: impl Fn(f64) -> f64, panels: usize) -> f64 {
    const X: [f64; 4] = [-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
    const W: [f64; 4] = [0.347_854_845_137_453_9, 0.652_145_154_862_546_1, 0.652_145_154_862_546_1, 0.347_854_845_137_453_9];
    let w = 1.0 / panels as f64;
    (0..panels)
        .map(|p| {
            let mid = (p as f64 + 0.5) * w;
            X.iter().zip(W).map(|(x, wt)| wt * f(mid + 0.5 * w * x)).sum::<f64>() * 0.5 * w
        })
        .sum()
}

/// Per-probe report row.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceReport {
    pub probe: String,
    pub pairing: f64,
    pub reference: f64,
    pub gap: f64,
}

/// Pairs `u` against every probe and compares with the reference trace
/// `trace(side, c) = (u·τ)` on Γ.
pub fn trace_reports(u: &VelocityField, trace: impl Fn(Side, f64) -> f64) -> Result<Vec<TraceReport>> {
    let grid = u.grid();
    probe_set()
        .into_iter()
        .map(|p| {
            let pairing = pairing_l(u, &p.data(grid))?;
            let reference = p.reference(|c| trace(p.side, c));
            if !pairing.is_finite() {
                return Err(VwsError::DomainViolation {
                    value: pairing,
                    domain: "finite pairing",
                });
            }
            Ok(TraceReport {
                probe: p.id(),
                pairing,
                reference,
                gap: (pairing - reference).abs(),
            })
        })
        .collect()
}
