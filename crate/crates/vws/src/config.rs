//! Experiment configuration: recipe defaults, then the TOML file, then CLI flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use vws_core::evolution::Scheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Recipe {
    Uniqueness,
    MmsStationary,
    Compatibility,
    EpsSweep,
    Lemma11,
    Traces,
    Biharmonic,
    EvolutionEstimate,
    EvolutionOrder,
    EvolutionPairing,
    Relaxation,
    Operators,
}

impl Recipe {
    pub const ALL: [Recipe; 12] = [
        Recipe::Uniqueness,
        Recipe::MmsStationary,
        Recipe::Compatibility,
        Recipe::EpsSweep,
        Recipe::Lemma11,
        Recipe::Traces,
        Recipe::Biharmonic,
        Recipe::EvolutionEstimate,
        Recipe::EvolutionOrder,
        Recipe::EvolutionPairing,
        Recipe::Relaxation,
        Recipe::Operators,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Recipe::Uniqueness => "uniqueness",
            Recipe::MmsStationary => "mms-stationary",
            Recipe::Compatibility => "compatibility",
            Recipe::EpsSweep => "eps-sweep",
            Recipe::Lemma11 => "lemma11",
            Recipe::Traces => "traces",
            Recipe::Biharmonic => "biharmonic",
            Recipe::EvolutionEstimate => "evolution-estimate",
            Recipe::EvolutionOrder => "evolution-order",
            Recipe::EvolutionPairing => "evolution-pairing",
            Recipe::Relaxation => "relaxation",
            Recipe::Operators => "operators",
        }
    }

    pub fn from_name(name: &str) -> Option<Recipe> {
        Recipe::ALL.into_iter().find(|r| r.name() == name)
    }

    pub fn description(self) -> &'static str {
        match self {
            Recipe::Uniqueness => "zero boundary data gives the zero solution, stationary and evolution",
            Recipe::MmsStationary => "manufactured-solution convergence of the stationary solver",
            Recipe::Compatibility => "flux defect of cavity data and idempotence of the compatibility projection",
            Recipe::EpsSweep => "regularized cavity: estimate ratios and Cauchy differences over ε",
            Recipe::Lemma11 => "transposition identity gap under refinement",
            Recipe::Traces => "tangential trace recovery by pairing, lifting independence, negative control",
            Recipe::Biharmonic => "stream-function cross-check against the primitive-variable solver",
            Recipe::EvolutionEstimate => "space-time estimate ratios over ε",
            Recipe::EvolutionOrder => "temporal self-convergence order of Euler and Crank-Nicolson",
            Recipe::EvolutionPairing => "space-time trace pairing under joint refinement",
            Recipe::Relaxation => "time-constant data relaxes to the stationary solution",
            Recipe::Operators => "grad/div adjointness and CG against a dense LU oracle",
        }
    }

    /// Recipes whose ε list is the swept parameter; the resolution guard applies to them.
    pub fn sweeps_eps(self) -> bool {
        matches!(self, Recipe::EpsSweep | Recipe::EvolutionEstimate)
    }

    fn defaults(self) -> ExperimentConfig {
        let sweep = vec![0.1, 0.05, 0.025, 0.0125];
        let mut c = ExperimentConfig {
            recipe: self,
            n: vec![16, 32, 64],
            eps: vec![0.1],
            t_final: 1.0,
            dt: 1.0 / 64.0,
            scheme: None,
            div_tol: 1e-8,
            mom_tol: 1e-8,
            out: PathBuf::from("runs").join(self.name()),
            seed: 0,
            workers: None,
            allow_underresolved: false,
        };
        match self {
            Recipe::Uniqueness => {
                c.t_final = 0.5;
                c.dt = 1.0 / 32.0;
            }
            Recipe::MmsStationary | Recipe::Operators => {}
            Recipe::Compatibility => {
                c.n = vec![8, 33, 128];
                c.eps = sweep;
            }
            Recipe::EpsSweep => {
                c.n = vec![640];
                c.eps = sweep;
            }
            Recipe::Lemma11 | Recipe::Traces => c.n = vec![32, 64, 128],
            Recipe::Biharmonic => c.n = vec![16, 32, 64, 128],
            Recipe::EvolutionEstimate => {
                c.n = vec![640];
                c.eps = sweep;
                c.t_final = 0.25;
                c.dt = 1.0 / 32.0;
                c.scheme = Some(SchemeName::Euler);
            }
            Recipe::EvolutionOrder => {
                c.n = vec![32];
                c.dt = 1.0 / 16.0;
            }
            Recipe::EvolutionPairing => {
                c.scheme = Some(SchemeName::Cn);
            }
            Recipe::Relaxation => {
                c.n = vec![32];
                c.scheme = Some(SchemeName::Euler);
            }
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SchemeName {
    Euler,
    Cn,
}

impl From<SchemeName> for Scheme {
    fn from(s: SchemeName) -> Scheme {
        match s {
            SchemeName::Euler => Scheme::ImplicitEuler,
            SchemeName::Cn => Scheme::CrankNicolson,
        }
    }
}

/// Fully resolved settings for one recipe run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub recipe: Recipe,
    pub n: Vec<usize>,
    pub eps: Vec<f64>,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub dt: f64,
    /// `None` runs both schemes where a recipe supports it.
    pub scheme: Option<SchemeName>,
    pub div_tol: f64,
    pub mom_tol: f64,
    pub out: PathBuf,
    pub seed: u64,
    pub workers: Option<usize>,
    pub allow_underresolved: bool,
}

/// On-disk configuration; every key optional.
///
/// ```toml
/// [run]
/// recipe = "lemma11"
/// out = "runs/lemma11"
/// seed = 3
///
/// [grid]
/// n = [32, 64, 128]
/// eps = [0.1]
///
/// [time]
/// T = 1.0
/// dt = 0.015625
/// scheme = "cn"
///
/// [tolerances]
/// mom_tol = 1e-8
/// ```
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub time: TimeSection,
    #[serde(default)]
    pub tolerances: ToleranceSection,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub recipe: Option<Recipe>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub allow_underresolved: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: Option<Vec<usize>>,
    pub eps: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    #[serde(rename = "T")]
    pub t_final: Option<f64>,
    pub dt: Option<f64>,
    pub scheme: Option<SchemeName>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSection {
    pub div_tol: Option<f64>,
    pub mom_tol: Option<f64>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Flag values; `None` leaves the file or default value in place.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub n: Option<Vec<usize>>,
    pub eps: Option<Vec<f64>>,
    pub t_final: Option<f64>,
    pub dt: Option<f64>,
    pub scheme: Option<SchemeName>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub div_tol: Option<f64>,
    pub mom_tol: Option<f64>,
    pub allow_underresolved: bool,
}

impl ExperimentConfig {
    pub fn defaults(recipe: Recipe) -> Self {
        recipe.defaults()
    }

    /// Layers the file and then the flags over the recipe defaults, then validates.
    pub fn resolve(recipe: Recipe, file: Option<&ConfigFile>, flags: &Overrides) -> anyhow::Result<Self> {
        let mut c = recipe.defaults();
        if let Some(f) = file {
            if let Some(r) = f.run.recipe {
                if r != recipe {
                    bail!("config file is for recipe {}, not {}", r.name(), recipe.name());
                }
            }
            set(&mut c.out, f.run.out.clone());
            set(&mut c.seed, f.run.seed);
            if f.run.workers.is_some() {
                c.workers = f.run.workers;
            }
            set(&mut c.allow_underresolved, f.run.allow_underresolved);
            set(&mut c.n, f.grid.n.clone());
            set(&mut c.eps, f.grid.eps.clone());
            set(&mut c.t_final, f.time.t_final);
            set(&mut c.dt, f.time.dt);
            if f.time.scheme.is_some() {
                c.scheme = f.time.scheme;
            }
            set(&mut c.div_tol, f.tolerances.div_tol);
            set(&mut c.mom_tol, f.tolerances.mom_tol);
        }
        set(&mut c.n, flags.n.clone());
        set(&mut c.eps, flags.eps.clone());
        set(&mut c.t_final, flags.t_final);
        set(&mut c.dt, flags.dt);
        if flags.scheme.is_some() {
            c.scheme = flags.scheme;
        }
        set(&mut c.out, flags.out.clone());
        set(&mut c.seed, flags.seed);
        if flags.workers.is_some() {
            c.workers = flags.workers;
        }
        set(&mut c.div_tol, flags.div_tol);
        set(&mut c.mom_tol, flags.mom_tol);
        c.allow_underresolved |= flags.allow_underresolved;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.n.is_empty() {
            bail!("grid size list is empty");
        }
        if let Some(&n) = self.n.iter().find(|&&n| n < 4) {
            bail!("grid size {n} is below the minimum of 4");
        }
        if self.eps.is_empty() {
            bail!("eps list is empty");
        }
        if let Some(e) = self.eps.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            bail!("eps must be positive, got {e}");
        }
        for (what, v) in [("T", self.t_final), ("dt", self.dt), ("div_tol", self.div_tol), ("mom_tol", self.mom_tol)] {
            if !(v.is_finite() && v > 0.0) {
                bail!("{what} must be positive, got {v}");
            }
        }
        if self.dt > self.t_final {
            bail!("dt={} exceeds T={}", self.dt, self.t_final);
        }
        if self.workers == Some(0) {
            bail!("workers must be at least 1");
        }
        if self.recipe.sweeps_eps() && !self.allow_underresolved {
            let bad = self.underresolved_pairs();
            if !bad.is_empty() {
                let list: Vec<String> = bad.iter().map(|(e, n)| format!("(eps={e}, n={n})")).collect();
                bail!(
                    "under-resolved pairs {} need n >= 8/eps; pass --allow-underresolved to run anyway",
                    list.join(", ")
                );
            }
        }
        Ok(())
    }

    /// `(eps, n)` pairs with `n < 8/eps`.
    pub fn underresolved_pairs(&self) -> Vec<(f64, usize)> {
        let mut out = Vec::new();
        for &e in &self.eps {
            for &n in &self.n {
                if (n as f64) * e < 8.0 - 1e-9 {
                    out.push((e, n));
                }
            }
        }
        out
    }

    pub fn solver_options(&self) -> vws_core::SolverOptions {
        vws_core::SolverOptions {
            div_tol: self.div_tol,
            mom_tol: self.mom_tol,
            ..Default::default()
        }
    }

    /// Schemes to run: the configured one, or both.
    pub fn schemes(&self) -> Vec<Scheme> {
        match self.scheme {
            Some(s) => vec![s.into()],
            None => vec![Scheme::ImplicitEuler, Scheme::CrankNicolson],
        }
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

/// Worker count: the configured value (or all cores), capped by `VWS_WORKERS`.
pub fn worker_count(configured: Option<usize>) -> usize {
    let available = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let cap = std::env::var("VWS_WORKERS").ok().and_then(|v| v.trim().parse::<usize>().ok());
    let base = configured.unwrap_or(available);
    match cap {
        Some(c) if c >= 1 => base.min(c),
        _ => base,
    }
    .max(1)
}
