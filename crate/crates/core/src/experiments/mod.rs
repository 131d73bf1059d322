//! Splits, metrics, single experiments, sweeps, and the reports built from
//! their results.

mod config;
mod metrics;
mod records;
mod report;
mod run;
mod split;
mod sweep;

pub use config::{ClassifierMode, ClassifierTrain, ExperimentConfig, Setting, Strategy, STANDARD_SHOTS};
pub use metrics::{accuracy, macro_f1, mean_within_class_cosine, Confusion, Metrics};
pub use records::{
    check_store_hashes, read_records, read_records_file, write_records, write_records_file, ResultRecord,
    STATUS_OK,
};
pub use report::{
    align, best_rows, format_cell, lolo_delta, mean_rows, paired_lolo_delta, render_appendix, render_delta, render_records,
    render_summary, setting_title, shot_curves, strategy_title, write_csv, write_tagged_csv, BestRow, CurvePoint, DeltaRow,
    MeanRow,
};
pub use run::{
    adapt, evaluate_zero_shot, run_experiment, Adaptation, AdaptationKind, ClassifierOutcome, EvaluationResult,
    ExperimentData, SvmOutcome, Timings,
};
pub use split::{build_split, plan_experiment, SplitPlan};
pub use sweep::{sweep, CellFailure, CellResult, ResultTable, SweepConfig};
