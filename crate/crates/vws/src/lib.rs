//! Experiment harness for the very-weak Stokes lab: recipes, reports, comparisons.

pub mod compare;
pub mod config;
pub mod manufactured;
pub mod plot;
pub mod recipes;
pub mod report;

pub use compare::{compare_runs, CompareError, CompareReport};
pub use config::{ExperimentConfig, Overrides, Recipe, SchemeName};
pub use recipes::run_recipe;
pub use report::{FailureRecord, Summary};
