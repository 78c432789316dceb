//! Experiment configuration, orchestration and reporting.

pub mod config;
pub mod experiments;
pub mod report;

pub use config::{
    AttackConfig, DatasetConfig, DatasetFormat, ExperimentConfig, SourceSelection, SubgraphConfig,
};
pub use experiments::{
    load_dataset, run_ablation, run_attack_comparison, run_baseline, run_baseline_pair,
    run_experiment, run_l_sweep, run_lambda_sweep, AttackComparison, Prepared,
};
pub use report::{emit_report, RunRecord, RunReport};
