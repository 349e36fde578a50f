//! Configuration-driven experiment runner: seeded multi-run learning curves,
//! alpha grid search, value-function export and frozen-policy evaluation,
//! all emitted as CSV files with a JSON metadata header.

mod config;
mod export;
mod runner;

pub use config::{resolve_out_root, BasisScheme, ExperimentConfig};
pub use export::{evaluate_frozen, export_value_function, write_value_function_csv, FrozenEval};
pub use runner::{
    aggregate_curves, build_basis, grid_search_alpha, run_experiment, run_single,
    ExperimentOutput, GridSearchOutcome, SeedOutcome,
};
