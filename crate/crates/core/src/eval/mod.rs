//! Pseudo-out-of-sample evaluation.

pub mod cv;
pub mod dm;
pub mod poos;
pub mod registry;
pub mod report;

pub use cv::kfold_split;
pub use dm::{dm_test, stars, DmResult};
pub use poos::{
    origin_design, read_records, run_poos, run_poos_origins, write_records, ExperimentPlan, ForecastRecord,
    ModelSettings, PoosData, TargetData,
};
pub use registry::{model_registry, select_models, AlphaSearch, Estimator, ModelSpec, BENCHMARK};
pub use report::{
    build_eval_table, format_cell, great_recession_window, standard_windows, write_forecast_series, EvalCell,
    EvalTable, Window,
};
