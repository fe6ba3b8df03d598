use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use vws::config::ConfigFile;
use vws::report::render_text;
use vws::{compare_runs, run_recipe, ExperimentConfig, FailureRecord, Overrides, Recipe, SchemeName, Summary};

/// Desk-scale experiments for very weak Stokes solutions on the unit square.
#[derive(Parser)]
#[command(name = "vws", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Zero boundary data gives the zero solution (stationary and evolution)
    Uniqueness(RunArgs),
    /// Manufactured-solution convergence of the stationary solver
    MmsStationary(RunArgs),
    /// Flux defect of cavity data and idempotence of the projection
    Compatibility(RunArgs),
    /// Regularized cavity over eps: estimate ratios and Cauchy differences
    EpsSweep(RunArgs),
    /// Transposition identity gap under refinement
    Lemma11(RunArgs),
    /// Tangential trace recovery, lifting independence, negative control
    Traces(RunArgs),
    /// Stream-function cross-check against the primitive-variable solver
    Biharmonic(RunArgs),
    /// Space-time estimate ratios over eps
    EvolutionEstimate(RunArgs),
    /// Temporal self-convergence order of Euler and Crank-Nicolson
    EvolutionOrder(RunArgs),
    /// Space-time trace pairing under joint refinement (dt = T/n)
    EvolutionPairing(RunArgs),
    /// Time-constant data relaxes to the stationary solution
    Relaxation(RunArgs),
    /// grad/div adjointness and CG against a dense LU oracle
    Operators(RunArgs),
    /// Every recipe with its defaults, one subdirectory each
    All(AllArgs),
    /// Compare the summaries of two runs of the same recipe
    Compare(CompareArgs),
    /// List recipes with their default settings
    List,
}

#[derive(Args, Default)]
struct RunArgs {
    /// TOML file with [run], [grid], [time] and [tolerances] sections; flags win
    #[arg(long)]
    config: Option<PathBuf>,
    /// Grid sizes, comma separated
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Regularization parameters, comma separated
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Final time
    #[arg(long = "T")]
    t_final: Option<f64>,
    /// Time step
    #[arg(long)]
    dt: Option<f64>,
    /// Time scheme; evolution recipes run both when unset and the recipe has no default
    #[arg(long, value_enum)]
    scheme: Option<SchemeName>,
    /// Output directory [default: runs/<recipe>]
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (capped by VWS_WORKERS)
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    div_tol: Option<f64>,
    #[arg(long)]
    mom_tol: Option<f64>,
    /// Permit eps sweeps with n < 8/eps
    #[arg(long)]
    allow_underresolved: bool,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            n: self.n.clone(),
            eps: self.eps.clone(),
            t_final: self.t_final,
            dt: self.dt,
            scheme: self.scheme,
            out: self.out.clone(),
            seed: self.seed,
            workers: self.workers,
            div_tol: self.div_tol,
            mom_tol: self.mom_tol,
            allow_underresolved: self.allow_underresolved,
        }
    }
}

#[derive(Args)]
struct AllArgs {
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct CompareArgs {
    dir_a: PathBuf,
    dir_b: PathBuf,
    /// Relative tolerance for deterministic metrics
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Also write compare.csv here
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Assertions failed.
const EXIT_FAIL: u8 = 1;
/// Configuration or runtime error.
const EXIT_ERROR: u8 = 2;
/// Wall-clock budget for the full suite; exceeding it only warns.
const SUITE_BUDGET_S: f64 = 1800.0;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn,vws_core=error")).init();
    let cli = Cli::parse();
    let (recipe, args) = match cli.command {
        Command::Uniqueness(a) => (Recipe::Uniqueness, a),
        Command::MmsStationary(a) => (Recipe::MmsStationary, a),
        Command::Compatibility(a) => (Recipe::Compatibility, a),
        Command::EpsSweep(a) => (Recipe::EpsSweep, a),
        Command::Lemma11(a) => (Recipe::Lemma11, a),
        Command::Traces(a) => (Recipe::Traces, a),
        Command::Biharmonic(a) => (Recipe::Biharmonic, a),
        Command::EvolutionEstimate(a) => (Recipe::EvolutionEstimate, a),
        Command::EvolutionOrder(a) => (Recipe::EvolutionOrder, a),
        Command::EvolutionPairing(a) => (Recipe::EvolutionPairing, a),
        Command::Relaxation(a) => (Recipe::Relaxation, a),
        Command::Operators(a) => (Recipe::Operators, a),
        Command::All(a) => return run_all(&a),
        Command::Compare(a) => return compare(&a),
        Command::List => {
            for r in Recipe::ALL {
                let d = ExperimentConfig::defaults(r);
                println!("{:<20} {}", r.name(), r.description());
                println!("{:<20} n={:?} eps={:?} T={} dt={}", "", d.n, d.eps, d.t_final, d.dt);
            }
            return ExitCode::SUCCESS;
        }
    };
    run_one(recipe, &args)
}

fn run_one(recipe: Recipe, args: &RunArgs) -> ExitCode {
    let file = match args.config.as_deref().map(ConfigFile::load).transpose() {
        Ok(f) => f,
        Err(e) => return error_exit(Some(recipe), args.out.as_deref(), e),
    };
    let config = match ExperimentConfig::resolve(recipe, file.as_ref(), &args.overrides()) {
        Ok(c) => c,
        Err(e) => return error_exit(Some(recipe), args.out.as_deref(), e),
    };
    match run_recipe(&config) {
        Ok(s) => report_exit(&s),
        Err(e) => error_exit(Some(recipe), Some(&config.out), e),
    }
}

fn report_exit(s: &Summary) -> ExitCode {
    print!("{}", render_text(s));
    if s.passed {
        ExitCode::SUCCESS
    } else {
        let record = FailureRecord {
            recipe: Some(s.recipe),
            error: None,
            failed_assertions: s.failed().cloned().collect(),
        };
        eprintln!("{}", serde_json::to_string(&record).unwrap_or_default());
        ExitCode::from(EXIT_FAIL)
    }
}

/// Prints the failure record to stderr and writes it when an output directory is known.
fn error_exit(recipe: Option<Recipe>, out: Option<&std::path::Path>, e: anyhow::Error) -> ExitCode {
    let record = FailureRecord {
        recipe,
        error: Some(format!("{e:#}")),
        failed_assertions: Vec::new(),
    };
    if let Some(dir) = out {
        if let Err(w) = record.write(dir) {
            log::error!("could not write failure record: {w:#}");
        }
    }
    eprintln!("{}", serde_json::to_string(&record).unwrap_or_default());
    ExitCode::from(EXIT_ERROR)
}

fn run_all(args: &AllArgs) -> ExitCode {
    let start = Instant::now();
    let mut worst = 0u8;
    for recipe in Recipe::ALL {
        let flags = Overrides {
            out: Some(args.out.join(recipe.name())),
            seed: args.seed,
            workers: args.workers,
            ..Default::default()
        };
        let code = match ExperimentConfig::resolve(recipe, None, &flags).and_then(|c| run_recipe(&c)) {
            Ok(s) => {
                print!("{}", render_text(&s));
                u8::from(!s.passed) * EXIT_FAIL
            }
            Err(e) => {
                eprintln!("{}: {e:#}", recipe.name());
                EXIT_ERROR
            }
        };
        worst = worst.max(code);
    }
    let elapsed = start.elapsed().as_secs_f64();
    if elapsed > SUITE_BUDGET_S {
        log::warn!("suite took {elapsed:.0}s, over the {SUITE_BUDGET_S:.0}s budget");
    }
    println!("suite wall time {elapsed:.1}s");
    ExitCode::from(worst)
}

fn compare(args: &CompareArgs) -> ExitCode {
    let report = match compare_runs(&args.dir_a, &args.dir_b, args.tol) {
        Ok(r) => r,
        Err(e) => return error_exit(None, args.out.as_deref(), e),
    };
    let table = report.to_table();
    if let Some(dir) = &args.out {
        let written = std::fs::create_dir_all(dir).map_err(anyhow::Error::from).and_then(|_| table.write(&dir.join("compare.csv")));
        if let Err(e) = written {
            return error_exit(None, None, e);
        }
    }
    println!("recipe {} (tolerance {:e})", report.recipe, report.tolerance);
    for m in report.metrics.iter().filter(|m| m.flagged || m.rel_diff > 0.0) {
        println!(
            "  {:<48} {:>12.4e}{}{}",
            m.name,
            m.rel_diff,
            if m.randomized { "  (seed-dependent)" } else { "" },
            if m.flagged { "  REGRESSION" } else { "" }
        );
    }
    for a in &report.changed_assertions {
        println!("  assertion outcome changed: {a}");
    }
    let n = report.regressions();
    println!("{} metrics compared, {n} flagged", report.metrics.len());
    if n == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    }
}
