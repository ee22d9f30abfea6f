//! Tasks, datasets and the resampling protocol used to compare classifiers.

pub mod cache;
pub mod dataset;
pub mod protocol;
pub mod results;
pub mod signrank;
pub mod tasks;

pub use cache::{PosteriorCache, PosteriorSet};
pub use dataset::{generate_dataset, subsample_runs, validation_split, Dataset, LabelledSeries, ObsSetting, ScheduleKind, Split};
pub use protocol::{
    default_engine, headline_hyperparams, run_experiment, run_experiment_cached, run_on_dataset, train_classifier, Example,
    ExperimentConfig, FeatureCache, Hyperparams, TrainedModel,
};
pub use results::{summarize, signrank_table, ResultRow, RunResult, SelectionRow, SignrankRow, SummaryRow};
pub use signrank::signrank_test;
pub use tasks::{builtin_tasks, sample_class_params, task_by_name, truncated_gaussian_sample, TaskSpec};
