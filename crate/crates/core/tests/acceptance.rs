//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on failure.

mod common;

use std::cell::RefCell;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use common::{bump_force, bump_velocity, dense_solve, orders, polynomial_flow, polynomial_trace, rotation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vws_core::biharmonic::{solve_biharmonic, velocity_from_stream};
use vws_core::boundary_data::{cavity_g, cavity_g_eps, compatibility_defect, project_compatible};
use vws_core::evolution::{
    evolve, evolve_with, spacetime_estimate_ratio, spacetime_lifting_independence_gap, spacetime_pairing,
    spacetime_reference, Ramp, Scheme, TimeBoundaryData,
};
use vws_core::mesh::{build_grid, l2_norm_gamma, l2_norm_omega};
use vws_core::operators::{cg_solve, divergence, gradient, SparseMatrix};
use vws_core::stokes::{solve_boundary, solve_homogeneous, SolverOptions};
use vws_core::traces::{lifting_independence_gap, probe_set, random_smooth_field, trace_reports};
use vws_core::transposition::lemma11_identity;
use vws_core::{BoundaryData, PressureField, Side, StaggeredGrid, VelocityField};

#[derive(Default)]
struct Checks {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Checks {
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        if ok {
            self.notes.push(what);
        } else {
            self.failures.push(what);
        }
    }
}

fn fmt(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

const EPS_SWEEP: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];

struct Sweep {
    n: usize,
    ratios: Vec<f64>,
    du: Vec<f64>,
    dg: Vec<f64>,
    elapsed: Duration,
}

/// Regularized cavity solves on one grid resolving every ε (n ≥ 8/ε).
fn eps_sweep() -> &'static Sweep {
    static SWEEP: OnceLock<Sweep> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let start = Instant::now();
        let n = (8.0 / EPS_SWEEP[EPS_SWEEP.len() - 1]).ceil() as usize;
        let g = build_grid(n).unwrap();
        let data: Vec<BoundaryData> = EPS_SWEEP.iter().map(|&e| cavity_g_eps(g, e).unwrap()).collect();
        let sols: Vec<VelocityField> = data.iter().map(|d| solve_boundary(g, d).unwrap().velocity).collect();
        let ratios = sols.iter().zip(&data).map(|(u, d)| l2_norm_omega(u) / l2_norm_gamma(d)).collect();
        let du = sols.windows(2).map(|w| l2_norm_omega(&w[0].sub(&w[1]))).collect();
        let dg = data
            .windows(2)
            .map(|w| l2_norm_gamma(&w[0].combine(1.0, &w[1], -1.0).unwrap()))
            .collect();
        Sweep {
            n,
            ratios,
            du,
            dg,
            elapsed: start.elapsed(),
        }
    })
}

fn c1_manufactured(c: &mut Checks) {
    let start = Instant::now();
    let errs: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&n| {
            let g = build_grid(n).unwrap();
            let f = VelocityField::from_fn(g, bump_force);
            let sol = solve_homogeneous(g, &f, &PressureField::zeros(g)).unwrap();
            l2_norm_omega(&sol.velocity.sub(&VelocityField::from_fn(g, bump_velocity)))
        })
        .collect();
    let ord = orders(&errs);
    c.check(ord.iter().all(|o| *o >= 1.8), format!("errors {} orders {}", fmt(&errs), fmt(&ord)));
    let t = start.elapsed();
    c.check(t < Duration::from_secs(120), format!("runtime {t:.2?}"));
}

fn c2_uniqueness(c: &mut Checks) {
    let opts = SolverOptions::default();
    let bound = 10.0 * opts.mom_tol;
    for n in [16, 32, 64] {
        let g = build_grid(n).unwrap();
        let u = solve_boundary(g, &BoundaryData::zeros(g)).unwrap().velocity;
        let nu = l2_norm_omega(&u);
        c.check(nu <= bound, format!("stationary n={n} ‖u‖={nu:.1e}"));
    }
    let t_final = 0.5;
    for scheme in [Scheme::ImplicitEuler, Scheme::CrankNicolson] {
        for n in [16, 32] {
            let g = build_grid(n).unwrap();
            let tr = evolve(g, &TimeBoundaryData::zero(g), t_final, 1.0 / 32.0, scheme).unwrap();
            let nq = tr.l2_qt_norm();
            c.check(
                nq <= bound * t_final.sqrt(),
                format!("{} n={n} ‖u‖_QT={nq:.1e}", scheme.name()),
            );
        }
    }
}

fn c3_compatibility(c: &mut Checks) {
    for n in [8, 33, 128] {
        let g = build_grid(n).unwrap();
        let d = compatibility_defect(&cavity_g(g));
        c.check(d == 0.0, format!("defect(cavity_g) n={n} = {d:e}"));
    }
    let mut worst: f64 = 0.0;
    for &e in &EPS_SWEEP {
        for n in [(8.0 / e).ceil() as usize, 64] {
            let g = build_grid(n).unwrap();
            worst = worst.max(compatibility_defect(&cavity_g_eps(g, e).unwrap()).abs());
        }
    }
    c.check(worst <= 1e-14, format!("max |defect(g_ε)| = {worst:.1e}"));
    let mut idem: f64 = 0.0;
    let mut proj_defect: f64 = 0.0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(4..40);
        let g = build_grid(n).unwrap();
        let rng = RefCell::new(rng);
        let raw = BoundaryData::from_fn(g, |_, _, _| {
            let mut r = rng.borrow_mut();
            [r.gen_range(-3.0..3.0), r.gen_range(-3.0..3.0)]
        });
        let p = project_compatible(&raw);
        idem = idem.max(project_compatible(&p).max_sample_difference(&p));
        proj_defect = proj_defect.max(compatibility_defect(&p).abs());
    }
    c.check(
        idem <= 1e-14 && proj_defect <= 1e-12,
        format!("projection idempotence {idem:.1e}, projected defect {proj_defect:.1e}"),
    );
}

fn c4_a_priori(c: &mut Checks) {
    let s = eps_sweep();
    let bound = 2.0 * s.ratios[0];
    let max_ratio = s.ratios.iter().cloned().fold(0.0, f64::max);
    c.check(
        max_ratio <= bound,
        format!("n={} ratios {} bound {bound:.3e}", s.n, fmt(&s.ratios)),
    );
    let cs: Vec<f64> = s.du.iter().zip(&s.dg).map(|(a, b)| a / b).collect();
    let cmax = cs.iter().cloned().fold(0.0, f64::max);
    c.check(cmax <= bound, format!("difference constants {} within the same bound", fmt(&cs)));
    c.check(s.elapsed < Duration::from_secs(600), format!("runtime {:.2?}", s.elapsed));
}

fn c5_transposition(c: &mut Checks) {
    let rot: Vec<f64> = [32, 64, 128]
        .iter()
        .map(|&n| {
            let g = build_grid(n).unwrap();
            lemma11_identity(g, &rotation(g)).unwrap().rel_gap
        })
        .collect();
    let ord = orders(&rot);
    c.check(ord.iter().all(|o| *o >= 0.8), format!("rotation rel_gap {} orders {}", fmt(&rot), fmt(&ord)));
    let cav: Vec<f64> = [32, 64, 128]
        .iter()
        .map(|&n| {
            let g = build_grid(n).unwrap();
            lemma11_identity(g, &cavity_g_eps(g, 0.1).unwrap()).unwrap().rel_gap
        })
        .collect();
    let ord = orders(&cav);
    c.check(ord.iter().all(|o| *o >= 0.8), format!("g_0.1 rel_gap {} orders {}", fmt(&cav), fmt(&ord)));
    c.check(cav[2] <= 0.05, format!("g_0.1 n=128 rel_gap {:.4} ≤ 0.05", cav[2]));
}

fn c6_cauchy(c: &mut Checks) {
    let s = eps_sweep();
    c.check(
        s.du.windows(2).all(|w| w[1] < w[0]),
        format!("n={} ‖u_εk − u_εk+1‖ = {}", s.n, fmt(&s.du)),
    );
}

fn c7_traces(c: &mut Checks) {
    let ns = [32, 64, 128];
    let cases: [(&str, &dyn Fn(StaggeredGrid) -> BoundaryData, &dyn Fn(Side, f64) -> f64); 2] = [
        ("rotation", &rotation, &|_, _| 0.5),
        ("polynomial", &|g| BoundaryData::from_fn(g, |_, x, y| polynomial_flow(x, y)), &polynomial_trace),
    ];
    let mut ind_rot = Vec::new();
    let mut ind_cav = Vec::new();
    let mut ind_neg = Vec::new();
    for (label, data, trace) in cases {
        let mut per_probe: Vec<Vec<f64>> = vec![Vec::new(); probe_set().len()];
        for &n in &ns {
            let g = build_grid(n).unwrap();
            let u = solve_boundary(g, &data(g)).unwrap().velocity;
            for (k, r) in trace_reports(&u, trace).unwrap().into_iter().enumerate() {
                per_probe[k].push(r.gap);
            }
        }
        // probes orthogonal to the trace by symmetry are recovered to round-off on every grid
        let exact = per_probe.iter().filter(|g| g.iter().all(|v| *v <= 1e-12)).count();
        let worst = per_probe
            .iter()
            .filter(|g| g.iter().any(|v| *v > 1e-12))
            .flat_map(|g| orders(g))
            .fold(f64::INFINITY, f64::min);
        let max_gaps: Vec<f64> = (0..ns.len())
            .map(|i| per_probe.iter().map(|g| g[i]).fold(0.0, f64::max))
            .collect();
        c.check(
            worst >= 0.8,
            format!(
                "{label}: {} probes, max gap {} worst order {worst:.2}, {exact} exact to round-off",
                per_probe.len(),
                fmt(&max_gaps)
            ),
        );
    }
    for &n in &ns {
        let g = build_grid(n).unwrap();
        let probe = probe_set()[2].data(g);
        let u = solve_boundary(g, &rotation(g)).unwrap().velocity;
        ind_rot.push(lifting_independence_gap(&u, &probe, Some(7)).unwrap());
        let cav = solve_boundary(g, &cavity_g_eps(g, 0.1).unwrap()).unwrap().velocity;
        ind_cav.push(lifting_independence_gap(&cav, &probe, Some(7)).unwrap());
        ind_neg.push(lifting_independence_gap(&random_smooth_field(g, 5), &probe, Some(7)).unwrap());
    }
    let o_rot = orders(&ind_rot);
    let o_cav = orders(&ind_cav);
    c.check(
        o_rot.iter().chain(&o_cav).all(|o| *o >= 0.8),
        format!("independence gap rotation {} cavity {}", fmt(&ind_rot), fmt(&ind_cav)),
    );
    // a convergent gap would halve per refinement; over two refinements require < 20% decay
    let decay = ind_neg[2] / ind_neg[0];
    c.check(
        decay > 0.8 && ind_neg[2] > 10.0 * ind_rot[2],
        format!("negative control gap {} (no convergence)", fmt(&ind_neg)),
    );
}

fn c8_biharmonic(c: &mut Checks) {
    let mut gaps = Vec::new();
    let mut floors = Vec::new();
    let mut max_div: f64 = 0.0;
    for n in [16, 32, 64, 128] {
        let g = build_grid(n).unwrap();
        let data = cavity_g_eps(g, 0.1).unwrap();
        let v = velocity_from_stream(&solve_biharmonic(g, &data).unwrap());
        let u = solve_boundary(g, &data).unwrap().velocity;
        gaps.push(l2_norm_omega(&v.sub(&u)));
        floors.push(1e-8 * l2_norm_omega(&u));
        max_div = max_div.max(divergence(&v).max_abs());
    }
    let ord = orders(&gaps);
    let at_floor = gaps.iter().zip(&floors).all(|(g, f)| g <= f);
    let detail = format!("L² gaps {} orders {}", fmt(&gaps), fmt(&ord));
    if ord.iter().all(|o| *o >= 0.8) {
        c.check(true, detail);
    } else {
        // both discretizations share the same ghost treatment and coincide to solver tolerance
        c.check(at_floor, format!("{detail}; gaps at solver tolerance (≤ 1e-8·‖u‖) on every grid"));
    }
    c.check(max_div <= 1e-13, format!("stream velocity max divergence {max_div:.1e}"));
}

fn c9_evolution(c: &mut Checks) {
    // temporal self-convergence on φ(t)·bump with matching force
    let g = build_grid(32).unwrap();
    let uu = VelocityField::from_fn(g, bump_velocity);
    let ff = VelocityField::from_fn(g, bump_force);
    let phi = |t: f64| (0.5 * PI * t).sin();
    let dphi = |t: f64| 0.5 * PI * (0.5 * PI * t).cos();
    let force = |_k: usize, t: f64| {
        let mut f = uu.scaled(dphi(t));
        f.axpy(phi(t), &ff);
        f
    };
    for scheme in [Scheme::ImplicitEuler, Scheme::CrankNicolson] {
        let finals: Vec<VelocityField> = [16, 32, 64, 128]
            .iter()
            .map(|&m| {
                let dt = 1.0 / m as f64;
                let zero = TimeBoundaryData::zero(g);
                evolve_with(g, &zero, 1.0, dt, scheme, Some(&force), None, &SolverOptions::default())
                    .unwrap()
                    .final_velocity()
                    .clone()
            })
            .collect();
        let diffs: Vec<f64> = finals.windows(2).map(|w| l2_norm_omega(&w[0].sub(&w[1]))).collect();
        let ord = orders(&diffs);
        c.check(
            ord.iter().all(|o| (o - scheme.order()).abs() <= 0.3),
            format!("{} temporal orders {}", scheme.name(), fmt(&ord)),
        );
    }

    // space-time estimate over the ε-sweep on the resolved grid n = 8/ε_min
    let n = (8.0 / EPS_SWEEP[EPS_SWEEP.len() - 1]).ceil() as usize;
    let g = build_grid(n).unwrap();
    let t_final = 0.25;
    let ratios: Vec<f64> = EPS_SWEEP
        .iter()
        .map(|&e| {
            let tb = TimeBoundaryData::ramped(cavity_g_eps(g, e).unwrap(), Ramp::Smooth { rise: 0.25 * t_final });
            spacetime_estimate_ratio(g, &tb, t_final, 1.0 / 32.0, Scheme::ImplicitEuler).unwrap()
        })
        .collect();
    let bound = 2.0 * ratios[0];
    c.check(
        ratios.iter().all(|r| *r <= bound),
        format!("space-time ratios (n={n}) {} bound {bound:.3e}", fmt(&ratios)),
    );

    // space-time pairing under joint (h, dt) refinement
    let ramp = Ramp::Smooth { rise: 0.25 };
    let mut gaps = Vec::new();
    let mut ind = Vec::new();
    for n in [16, 32, 64] {
        let g = build_grid(n).unwrap();
        let tr = evolve(g, &TimeBoundaryData::ramped(rotation(g), ramp), 1.0, 1.0 / n as f64, Scheme::CrankNicolson)
            .unwrap();
        let worst = probe_set()
            .iter()
            .map(|p| (spacetime_pairing(&tr, &p.data(g)).unwrap() - spacetime_reference(ramp, 1.0, |_, _| 0.5, p)).abs())
            .fold(0.0, f64::max);
        gaps.push(worst);
        ind.push(spacetime_lifting_independence_gap(&tr, &probe_set()[0].data(g), 3).unwrap());
    }
    let ord = orders(&gaps);
    c.check(ord.iter().all(|o| *o >= 0.8), format!("space-time pairing gaps {} orders {}", fmt(&gaps), fmt(&ord)));
    let ord = orders(&ind);
    c.check(ord.iter().all(|o| *o >= 0.8), format!("space-time independence gaps {}", fmt(&ind)));

    // relaxation to the stationary cavity
    let g = build_grid(32).unwrap();
    let data = cavity_g_eps(g, 0.1).unwrap();
    let stat = solve_boundary(g, &data).unwrap().velocity;
    let tr = evolve(g, &TimeBoundaryData::ramped(data, Ramp::Hard), 1.0, 1.0 / 64.0, Scheme::ImplicitEuler).unwrap();
    let rel = l2_norm_omega(&tr.final_velocity().sub(&stat)) / l2_norm_omega(&stat);
    c.check(rel <= 0.05, format!("relaxation gap at T=1 {rel:.1e}"));
}

fn c10_operators(c: &mut Checks) {
    let mut worst: f64 = 0.0;
    for seed in 0..25u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(4..48);
        let g = build_grid(n).unwrap();
        let rng = RefCell::new(rng);
        let p = PressureField::from_fn(g, |_, _| rng.borrow_mut().gen_range(-1.0..1.0));
        let mut w = VelocityField::from_fn(g, |_, _| {
            let mut r = rng.borrow_mut();
            [r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)]
        });
        w.clear_boundary_faces();
        let lhs = gradient(&p).dot(&w);
        let rhs = -p.dot(&divergence(&w));
        let scale = p.dot(&p).sqrt() * w.dot(&w).sqrt();
        worst = worst.max((lhs - rhs).abs() / scale);
    }
    c.check(worst <= 1e-12, format!("⟨∇p, w⟩ + ⟨p, div w⟩ relative {worst:.1e}"));

    let mut cg_worst: f64 = 0.0;
    let hand = vec![vec![4.0, 1.0, 0.0], vec![1.0, 4.0, 1.0], vec![0.0, 1.0, 4.0]];
    let mut systems = vec![(hand, vec![1.0, 2.0, 3.0])];
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let n = rng.gen_range(2..9);
        let b: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        // BᵀB + I is SPD
        let a: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|k| b[k][i] * b[k][j]).sum::<f64>() + if i == j { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        let rhs = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        systems.push((a, rhs));
    }
    for (a, b) in &systems {
        let x = cg_solve(&SparseMatrix::from_dense(a), b, 1e-15, 100).unwrap().x;
        let oracle = dense_solve(a, b);
        cg_worst = cg_worst.max(x.iter().zip(&oracle).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max));
    }
    c.check(cg_worst <= 1e-12, format!("CG vs dense elimination on {} systems {cg_worst:.1e}", systems.len()));
}

fn main() {
    let criteria: [(&str, fn(&mut Checks)); 10] = [
        ("manufactured stationary convergence", c1_manufactured),
        ("uniqueness for zero data", c2_uniqueness),
        ("compatibility machinery", c3_compatibility),
        ("a priori estimate over the ε-sweep", c4_a_priori),
        ("transposition identity", c5_transposition),
        ("Cauchy convergence of the regularized cavity", c6_cauchy),
        ("trace pairing and lifting independence", c7_traces),
        ("biharmonic cross-check", c8_biharmonic),
        ("evolution", c9_evolution),
        ("operator algebra", c10_operators),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut checks = Checks::default();
        let outcome = catch_unwind(AssertUnwindSafe(|| run(&mut checks)));
        if let Err(e) = outcome {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            checks.failures.push(format!("panicked: {msg}"));
        }
        let ok = checks.failures.is_empty();
        if !ok {
            failed += 1;
        }
        println!(
            "{} criterion {:>2}: {name} ({:.1?})",
            if ok { "PASS" } else { "FAIL" },
            k + 1,
            start.elapsed()
        );
        for f in &checks.failures {
            println!("       ✗ {f}");
        }
        for n in &checks.notes {
            println!("       · {n}");
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
