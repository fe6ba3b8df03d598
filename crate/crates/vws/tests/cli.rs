use std::path::Path;
use std::process::{Command, Output};

use vws::compare::{compare_runs, CompareError};
use vws::report::{FailureRecord, Summary};
use vws::Recipe;

fn vws(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vws"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn run(recipe: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![recipe, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    vws(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn passing_recipe_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mms");
    let o = run("mms-stationary", &out, &["--n", "8,16,32"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = Summary::load(&out).unwrap();
    assert!(s.passed);
    assert_eq!(s.recipe, Recipe::MmsStationary);
    assert_eq!(s.config.n, vec![8, 16, 32]);
    for f in s.tables.iter().chain(&s.plots) {
        assert!(out.join(f).is_file(), "{f}");
    }
    let csv = std::fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("n,h,error_l2"));
    let svg = std::fs::read_to_string(out.join("convergence.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert!(out.join("summary.txt").is_file());
    assert!(!out.join("failure.json").exists());
    assert!(String::from_utf8_lossy(&o.stdout).contains("recipe mms-stationary: PASS"));
}

#[test]
fn failed_assertions_exit_nonzero_with_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("one-grid");
    // a single grid cannot yield an order; every assertion is still evaluated and reported
    let o = run("traces", &out, &["--n", "16"]);
    assert_eq!(o.status.code(), Some(1));
    let rec: FailureRecord = serde_json::from_str(&std::fs::read_to_string(out.join("failure.json")).unwrap()).unwrap();
    assert_eq!(rec.recipe, Some(Recipe::Traces));
    assert!(rec.error.is_none());
    let names: Vec<&str> = rec.failed_assertions.iter().map(|a| a.name.as_str()).collect();
    assert!(names.contains(&"rotation.refinement"), "{names:?}");
    assert!(names.contains(&"polynomial.refinement"), "{names:?}");
    assert!(names.contains(&"independence.refinement"), "{names:?}");
    let line: FailureRecord = serde_json::from_str(stderr(&o).trim().lines().last().unwrap()).unwrap();
    assert_eq!(line.failed_assertions.len(), rec.failed_assertions.len());
    assert!(rec.failed_assertions.iter().any(|a| a.measured.is_nan()));
    assert!(!Summary::load(&out).unwrap().passed);
}

#[test]
fn resolution_guard_and_override() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("guard");
    let o = run("eps-sweep", &out, &["--n", "16", "--eps", "0.5,0.25"]);
    assert_eq!(o.status.code(), Some(2));
    let rec: FailureRecord = serde_json::from_str(&std::fs::read_to_string(out.join("failure.json")).unwrap()).unwrap();
    assert!(rec.error.unwrap().contains("eps=0.25, n=16"));

    let o = run("eps-sweep", &out, &["--n", "16", "--eps", "0.5,0.25", "--allow-underresolved"]);
    assert!(matches!(o.status.code(), Some(0 | 1)), "{}", stderr(&o));
    assert!(!out.join("failure.json").exists() || o.status.code() == Some(1));
    assert!(Summary::load(&out).unwrap().config.allow_underresolved);

    let o = run("eps-sweep", &out, &["--n", "32", "--eps", "0.5,0.25"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    let out = dir.path().join("from-file");
    std::fs::write(
        &cfg,
        format!(
            "[run]\nrecipe = \"uniqueness\"\nout = {:?}\nseed = 5\n[grid]\nn = [8, 16]\n[time]\nT = 0.25\ndt = 0.125\nscheme = \"cn\"\n",
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    let o = vws(&["uniqueness", "--config", cfg.to_str().unwrap(), "--n", "8", "--seed", "9"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = Summary::load(&out).unwrap();
    assert_eq!(s.config.n, vec![8]);
    assert_eq!(s.config.seed, 9);
    assert_eq!(s.config.t_final, 0.25);
    assert_eq!(s.assertions.len(), 2);

    std::fs::write(&cfg, "[grid]\nsizes = [8]\n").unwrap();
    let o = vws(&["uniqueness", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sizes"));
}

#[test]
fn reruns_are_deterministic_and_seeds_only_move_randomized_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    assert_eq!(run("traces", &a, &["--seed", "1"]).status.code(), Some(0));
    let o = Command::new(env!("CARGO_BIN_EXE_vws"))
        .args(["traces", "--seed", "1", "--out", b.to_str().unwrap()])
        .env("VWS_WORKERS", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(run("traces", &c, &["--seed", "2"]).status.code(), Some(0));

    let same = compare_runs(&a, &b, 1e-12).unwrap();
    assert_eq!(same.regressions(), 0);
    assert!(same.metrics.iter().all(|m| m.rel_diff == 0.0));

    let seeds = compare_runs(&a, &c, 1e-8).unwrap();
    assert_eq!(seeds.regressions(), 0);
    assert!(seeds.metrics.iter().filter(|m| !m.randomized).all(|m| m.rel_diff <= 1e-8));
    assert!(seeds.metrics.iter().any(|m| m.randomized && m.rel_diff > 0.0));

    let o = vws(&["compare", a.to_str().unwrap(), c.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("compare.csv").is_file());
}

#[test]
fn compare_rejects_different_recipes_and_flags_regressions() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(run("mms-stationary", &a, &["--n", "8,16"]).status.code(), Some(0));
    assert_eq!(run("uniqueness", &b, &["--n", "8"]).status.code(), Some(0));
    let err = compare_runs(&a, &b, 1e-8).unwrap_err();
    assert!(matches!(err.downcast_ref::<CompareError>(), Some(CompareError::RecipeMismatch { .. })));
    let o = vws(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("different recipes"));

    let identical = compare_runs(&a, &a, 0.0).unwrap();
    assert_eq!(identical.regressions(), 0);

    let c = dir.path().join("c");
    assert_eq!(run("mms-stationary", &c, &["--n", "8,32"]).status.code(), Some(0));
    let r = compare_runs(&a, &c, 1e-8).unwrap();
    // n=16 only in a, n=32 only in c
    assert!(r.regressions() >= 2);
    assert_eq!(vws(&["compare", a.to_str().unwrap(), c.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn list_names_every_recipe() {
    let o = vws(&["list"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for r in Recipe::ALL {
        assert!(text.contains(r.name()), "{}", r.name());
    }
}

#[test]
fn bad_flags_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bad");
    assert_eq!(run("uniqueness", &out, &["--n", "2"]).status.code(), Some(2));
    assert!(out.join("failure.json").is_file());
    assert_ne!(vws(&["no-such-recipe"]).status.code(), Some(0));
    assert_ne!(vws(&["uniqueness", "--scheme", "rk4"]).status.code(), Some(0));
}
