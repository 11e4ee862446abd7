//! Experiment runner: specs, seeded multi-run execution, CSV reports,
//! comparisons and Atari score normalization.

mod compare;
mod config;
mod report;
mod run;
mod score;

pub use compare::{censored_median, compare, Comparison, MethodRow};
pub use config::{AgentKind, BudgetUnit, EnvKind, ExperimentSpec, VeInit};
pub use report::{
    emit_csv, read_csv, read_reports, write_reports, EvalReport, SeedResult, AGGREGATE_HEADER,
    SEED_HEADER,
};
pub use run::{run_experiment, run_experiment_evals};
pub use score::{atari_game, atari_table, normalized_score, AtariRow, METHODS};
