//! Experiment configuration, the end-to-end driver and its summary report.

mod config;
mod report;
mod run;

pub use config::{
    ConfigFile, ConfigOverrides, ExperimentConfig, MethodParams, MethodParamsPatch, PredicateSelection, WORKERS_ENV,
};
pub use report::{report_summary, Summary, SummaryRegression, SummaryRow};
pub use run::{predicate_seed, run_experiment, Manifest, PredicateOutcome, RunOutcome, RunStatus, ARTIFACT_FILES};
