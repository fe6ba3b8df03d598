//! Time-dependent Stokes problem with boundary data,
//! `∂u/∂t - Δu + ∇p = f, div u = 0, u = g on Γ, u(0) = 0`,
//! its backward adjoint, and the space-time trace pairing.
//!
//! Each step is a shifted saddle-point solve with the stationary kernel:
//!
//! ```text
//!   Euler:  (I/dt + A) u¹ + ∇p¹     = u⁰/dt + f¹                  + load(g¹)
//!   CN:     (I/dt + ½A) u¹ + ∇p^½   = u⁰/dt + ½Δ_h u⁰ + ½(f⁰+f¹)  + ½load(g¹)
//! ```
//!
//! where `Δ_h u⁰` uses the ghost values of `g⁰`, so the tangential data enters
//! as the average of both time levels. The new level always carries the
//! normal values of `g¹`.

use std::io::Write as _;
use std::path::Path;

use crate::boundary_data::{compatibility_defect, BoundaryData, Side};
use crate::error::{Result, VwsError};
use crate::mesh::{l2_norm_gamma, l2_norm_omega, StaggeredGrid, VelocityField};
use crate::operators::{curl_of_nodes, neg_laplacian, DirichletBC};
use crate::stokes::{SolverOptions, StokesSolution, StokesSolver, COMPATIBILITY_TOL};
use crate::traces::{corner_taper, gauss_legendre_01, lift_tangential, random_interior_stream, Probe, TangentialBoundaryData};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    ImplicitEuler,
    CrankNicolson,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::ImplicitEuler => "euler",
            Scheme::CrankNicolson => "cn",
        }
    }

    /// Formal order in time.
    pub fn order(self) -> f64 {
        match self {
            Scheme::ImplicitEuler => 1.0,
            Scheme::CrankNicolson => 2.0,
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = VwsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euler" | "implicit-euler" | "be" => Ok(Scheme::ImplicitEuler),
            "cn" | "crank-nicolson" => Ok(Scheme::CrankNicolson),
            other => Err(VwsError::Format(format!("unknown time scheme {other:?}"))),
        }
    }
}

/// Scalar time profile multiplying a spatial boundary profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ramp {
    /// `r ≡ 1`, switched on at `t = 0` (stress testing only).
    Hard,
    /// `sin²(πt/2t_r)` up to `t_r`, then 1. C¹.
    Smooth { rise: f64 },
    /// `sin²(πt/t_p)` up to `t_p`, then 0. C¹.
    Pulse { duration: f64 },
}

impl Ramp {
    pub fn value(self, t: f64) -> f64 {
        let pi = std::f64::consts::PI;
        match self {
            Ramp::Hard => 1.0,
            Ramp::Smooth { rise } => {
                if t >= rise {
                    1.0
                } else {
                    (0.5 * pi * t / rise).sin().powi(2)
                }
            }
            Ramp::Pulse { duration } => {
                if t >= duration {
                    0.0
                } else {
                    (pi * t / duration).sin().powi(2)
                }
            }
        }
    }
}

/// Boundary data on `Γ × [0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeBoundaryData {
    /// `r(t)·g(x)`.
    Separable { spatial: BoundaryData, ramp: Ramp },
    /// One slice per time node `t_k = k·dt`.
    Slices { dt: f64, slices: Vec<BoundaryData> },
}

impl TimeBoundaryData {
    pub fn zero(grid: StaggeredGrid) -> Self {
        TimeBoundaryData::Separable {
            spatial: BoundaryData::zeros(grid),
            ramp: Ramp::Hard,
        }
    }

    pub fn ramped(spatial: BoundaryData, ramp: Ramp) -> Self {
        TimeBoundaryData::Separable { spatial, ramp }
    }

    pub fn grid(&self) -> StaggeredGrid {
        match self {
            TimeBoundaryData::Separable { spatial, .. } => spatial.grid(),
            TimeBoundaryData::Slices { slices, .. } => slices[0].grid(),
        }
    }

    pub fn at(&self, t: f64) -> Result<BoundaryData> {
        match self {
            TimeBoundaryData::Separable { spatial, ramp } => Ok(spatial.scaled(ramp.value(t))),
            TimeBoundaryData::Slices { dt, slices } => {
                let k = (t / dt).round();
                if (k * dt - t).abs() > 1e-9 * dt.max(t.abs()) || k < 0.0 || k as usize >= slices.len() {
                    return Err(VwsError::InvalidTimeGrid(format!("no boundary slice at t={t}")));
                }
                Ok(slices[k as usize].clone())
            }
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        match self {
            TimeBoundaryData::Separable { spatial, ramp } => TimeBoundaryData::Separable {
                spatial: spatial.scaled(alpha),
                ramp: *ramp,
            },
            TimeBoundaryData::Slices { dt, slices } => TimeBoundaryData::Slices {
                dt: *dt,
                slices: slices.iter().map(|s| s.scaled(alpha)).collect(),
            },
        }
    }
}

/// Number of steps `M = T/dt`, rejecting non-integral ratios.
pub fn time_steps(t_final: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t_final > 0.0) || !dt.is_finite() || !t_final.is_finite() {
        return Err(VwsError::InvalidTimeGrid(format!("T={t_final}, dt={dt}")));
    }
    let m = (t_final / dt).round();
    if m < 1.0 || (m * dt - t_final).abs() > 1e-9 * t_final {
        return Err(VwsError::InvalidTimeGrid(format!("T={t_final} is not a multiple of dt={dt}")));
    }
    Ok(m as usize)
}

/// Body force by step index and time.
pub type Forcing<'a> = dyn Fn(usize, f64) -> VelocityField + 'a;

#[derive(Debug, Clone)]
pub struct Trajectory {
    grid: StaggeredGrid,
    scheme: Scheme,
    dt: f64,
    pub states: Vec<StokesSolution>,
}

impl Trajectory {
    pub fn grid(&self) -> StaggeredGrid {
        self.grid
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of steps `M`; there are `M + 1` states.
    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn final_time(&self) -> f64 {
        self.steps() as f64 * self.dt
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn velocity(&self, k: usize) -> &VelocityField {
        &self.states[k].velocity
    }

    pub fn final_velocity(&self) -> &VelocityField {
        &self.states[self.steps()].velocity
    }

    /// `‖u(t_k)‖_Ω` for every state.
    pub fn norms(&self) -> Vec<f64> {
        self.states.iter().map(|s| l2_norm_omega(&s.velocity)).collect()
    }

    /// `‖u‖_{L²(Q_T)}` by the trapezoidal rule in time.
    pub fn l2_qt_norm(&self) -> f64 {
        trapezoid(self.dt, &self.norms().iter().map(|v| v * v).collect::<Vec<_>>()).sqrt()
    }

    pub fn max_divergence(&self) -> f64 {
        self.states
            .iter()
            .map(|s| crate::operators::divergence(&s.velocity).max_abs())
            .fold(0.0, f64::max)
    }

    /// Writes every `stride`-th state as `step_<k>` field dumps plus `index.csv`.
    pub fn save(&self, dir: &Path, stride: usize) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut index = std::fs::File::create(dir.join("index.csv"))?;
        writeln!(index, "step,time,u_l2,div_max")?;
        for (k, s) in self.states.iter().enumerate() {
            if k % stride.max(1) != 0 && k != self.steps() {
                continue;
            }
            let prefix = dir.join(format!("step_{k:05}"));
            s.velocity.save(&prefix)?;
            s.pressure.save(&crate::mesh::with_suffix(&prefix, "p.macf"))?;
            writeln!(
                index,
                "{k},{:.17e},{:.17e},{:.17e}",
                self.time(k),
                l2_norm_omega(&s.velocity),
                crate::operators::divergence(&s.velocity).max_abs()
            )?;
        }
        Ok(())
    }
}

fn trapezoid(dt: f64, values: &[f64]) -> f64 {
    let m = values.len();
    if m < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..m - 1].iter().sum();
    dt * (inner + 0.5 * (values[0] + values[m - 1]))
}

/// Forward solve with `u(0) = 0` and no body force.
pub fn evolve(grid: StaggeredGrid, g: &TimeBoundaryData, t_final: f64, dt: f64, scheme: Scheme) -> Result<Trajectory> {
    evolve_with(grid, g, t_final, dt, scheme, None, None, &SolverOptions::default())
}

fn checked_slice(g: &TimeBoundaryData, t: f64, k: usize) -> Result<BoundaryData> {
    let slice = g.at(t)?;
    let defect = compatibility_defect(&slice);
    if defect.abs() > COMPATIBILITY_TOL {
        log::error!("boundary slice {k} (t={t}) violates compatibility: {defect:e}");
        return Err(VwsError::IncompatibleBoundaryData(defect));
    }
    Ok(slice)
}

/// Forward solve with optional body force and initial velocity.
#[allow(clippy::too_many_arguments)]
pub fn evolve_with(
    grid: StaggeredGrid,
    g: &TimeBoundaryData,
    t_final: f64,
    dt: f64,
    scheme: Scheme,
    force: Option<&Forcing<'_>>,
    initial: Option<&VelocityField>,
    opts: &SolverOptions,
) -> Result<Trajectory> {
    grid.ensure_same(&g.grid())?;
    let m = time_steps(t_final, dt)?;
    let solver = match scheme {
        Scheme::ImplicitEuler => StokesSolver::shifted(grid, 1.0 / dt, 1.0, *opts),
        Scheme::CrankNicolson => StokesSolver::shifted(grid, 1.0 / dt, 0.5, *opts),
    };

    let mut first = StokesSolution::zero(grid);
    if let Some(u0) = initial {
        grid.ensure_same(&u0.grid())?;
        first.velocity = u0.clone();
    }
    let mut states = Vec::with_capacity(m + 1);
    states.push(first);
    let mut bc_prev = DirichletBC::from_boundary(&checked_slice(g, 0.0, 0)?);
    let mut f_prev = force.map(|f| f(0, 0.0).interior_vector());

    for k in 0..m {
        let t1 = (k + 1) as f64 * dt;
        let bc1 = DirichletBC::from_boundary(&checked_slice(g, t1, k + 1)?);
        let u0 = &states[k].velocity;
        let mut extra: Vec<f64> = u0.interior_vector().into_iter().map(|v| v / dt).collect();
        let f1 = force.map(|f| f(k + 1, t1).interior_vector());
        match scheme {
            Scheme::ImplicitEuler => {
                if let Some(f1) = &f1 {
                    extra.iter_mut().zip(f1).for_each(|(e, f)| *e += f);
                }
            }
            Scheme::CrankNicolson => {
                let lap = neg_laplacian(u0, &bc_prev).interior_vector();
                extra.iter_mut().zip(&lap).for_each(|(e, l)| *e -= 0.5 * l);
                if let (Some(f0), Some(f1)) = (&f_prev, &f1) {
                    extra.iter_mut().zip(f0.iter().zip(f1)).for_each(|(e, (a, b))| *e += 0.5 * (a + b));
                }
            }
        }
        let sol = solver
            .solve(&bc1, None, None, Some(&extra))
            .map_err(|e| e.with_context(format!("time step {}", k + 1)))?;
        states.push(sol);
        bc_prev = bc1;
        f_prev = f1;
    }
    Ok(Trajectory {
        grid,
        scheme,
        dt,
        states,
    })
}

/// Backward adjoint `-∂v/∂t - Δv + ∇q = u, div v = 0, v = 0 on Γ, v(T) = 0`,
/// solved forward in reversed time with the scheme of `u_traj`. The result is
/// indexed by the original time levels.
pub fn solve_adjoint_backward(grid: StaggeredGrid, u_traj: &Trajectory) -> Result<Trajectory> {
    solve_adjoint_backward_with(grid, u_traj, &SolverOptions::default())
}

pub fn solve_adjoint_backward_with(grid: StaggeredGrid, u_traj: &Trajectory, opts: &SolverOptions) -> Result<Trajectory> {
    grid.ensure_same(&u_traj.grid)?;
    let m = u_traj.steps();
    let force = |k: usize, _s: f64| u_traj.velocity(m - k).clone();
    let mut rev = evolve_with(
        grid,
        &TimeBoundaryData::zero(grid),
        u_traj.final_time(),
        u_traj.dt,
        u_traj.scheme,
        Some(&force),
        None,
        opts,
    )?;
    rev.states.reverse();
    Ok(rev)
}

/// `‖g‖_{L²(0,T; L²(Γ))}` on the time nodes, trapezoidal in time.
pub fn boundary_qt_norm(g: &TimeBoundaryData, t_final: f64, dt: f64) -> Result<f64> {
    let m = time_steps(t_final, dt)?;
    let sq: Vec<f64> = (0..=m)
        .map(|k| g.at(k as f64 * dt).map(|s| l2_norm_gamma(&s).powi(2)))
        .collect::<Result<_>>()?;
    Ok(trapezoid(dt, &sq).sqrt())
}

/// `‖u‖_{L²(Q_T)} / ‖g‖_{L²(0,T;L²(Γ))}`.
pub fn spacetime_estimate_ratio(
    grid: StaggeredGrid,
    g: &TimeBoundaryData,
    t_final: f64,
    dt: f64,
    scheme: Scheme,
) -> Result<f64> {
    let gn = boundary_qt_norm(g, t_final, dt)?;
    if gn == 0.0 {
        return Err(VwsError::ZeroBoundaryData);
    }
    Ok(evolve(grid, g, t_final, dt, scheme)?.l2_qt_norm() / gn)
}

/// Default probe modulation `cos(πt/2T)`, vanishing at `T`.
pub fn default_modulation(t_final: f64) -> impl Fn(f64) -> f64 {
    move |t| (0.5 * std::f64::consts::PI * t / t_final).cos()
}

/// `Σ_k w_k ⟨u^k, ∂_t v + Δ_h v⟩` for `v(t) = Σ_i m_i(t)·V_i`, each
/// `V_i` vanishing on Γ. Time derivatives of the modulations are centered
/// differences on the time grid (one-sided second order at the ends).
pub fn spacetime_pairing_general(u_traj: &Trajectory, parts: &[(&VelocityField, &dyn Fn(f64) -> f64)]) -> Result<f64> {
    let grid = u_traj.grid;
    let m = u_traj.steps();
    let dt = u_traj.dt;
    if m < 2 {
        return Err(VwsError::InvalidTimeGrid("space-time pairing needs at least 2 steps".into()));
    }
    let mut integrand = vec![0.0; m + 1];
    for (v, modulation) in parts {
        grid.ensure_same(&v.grid())?;
        let mut lap = neg_laplacian(v, &DirichletBC::homogeneous(grid));
        lap.scale(-1.0);
        let mv: Vec<f64> = (0..=m).map(|k| modulation(k as f64 * dt)).collect();
        for k in 0..=m {
            let dm = if k == 0 {
                (-3.0 * mv[0] + 4.0 * mv[1] - mv[2]) / (2.0 * dt)
            } else if k == m {
                (3.0 * mv[m] - 4.0 * mv[m - 1] + mv[m - 2]) / (2.0 * dt)
            } else {
                (mv[k + 1] - mv[k - 1]) / (2.0 * dt)
            };
            let u = u_traj.velocity(k);
            integrand[k] += dm * u.dot(v) + mv[k] * u.dot(&lap);
        }
    }
    Ok(trapezoid(dt, &integrand))
}

/// Space-time pairing against the lift of `g1` modulated by `cos(πt/2T)`.
pub fn spacetime_pairing(u_traj: &Trajectory, g1: &TangentialBoundaryData) -> Result<f64> {
    let modulation = default_modulation(u_traj.final_time());
    let lift = lift_tangential(g1);
    spacetime_pairing_general(u_traj, &[(&lift, &modulation)])
}

/// Difference between the pairings through `m·V` and `m·V + sin(πt/T)·w`,
/// `w` a random admissible interior field.
pub fn spacetime_lifting_independence_gap(u_traj: &Trajectory, g1: &TangentialBoundaryData, seed: u64) -> Result<f64> {
    let grid = u_traj.grid;
    let t_final = u_traj.final_time();
    let w = curl_of_nodes(grid, &random_interior_stream(grid, seed));
    let bump = move |t: f64| (std::f64::consts::PI * t / t_final).sin();
    let modulation = default_modulation(t_final);
    let lift = lift_tangential(g1);
    let a = spacetime_pairing_general(u_traj, &[(&lift, &modulation)])?;
    let b = spacetime_pairing_general(u_traj, &[(&lift, &modulation), (&w, &bump)])?;
    Ok((a - b).abs())
}

/// Reference value `∫_0^T r(t)m(t) dt · ∫_side (g·τ)κ p ds` for separable
/// data `r(t)·g` and a single-side probe.
pub fn spacetime_reference(
    ramp: Ramp,
    t_final: f64,
    trace: impl Fn(Side, f64) -> f64,
    probe: &Probe,
) -> f64 {
    let modulation = default_modulation(t_final);
    let time = t_final * gauss_legendre_01(|s| ramp.value(s * t_final) * modulation(s * t_final), 400);
    time * probe.reference(|c| trace(probe.side, c))
}

/// Effective spatial weight of a probe, for diagnostics.
pub fn probe_taper(c: f64) -> f64 {
    corner_taper(c)
}
