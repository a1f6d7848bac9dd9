//! Regression trees, random forests and boosted trees.

mod boost;
mod forest;
pub(crate) mod grow;
mod importance;

pub use boost::{boost_tune, fit_boost, BoostConfig, BoostModel, BoostTuning, ETA_GRID, STEPS_GRID};
pub use forest::{fit_forest, fit_tree, ForestConfig, ForestModel, LeafMean, RegressionTree};
pub use grow::{route, Node};
pub use importance::{
    boost_sse_importance, forest_sse_importance, oob_permutation_importance, write_importance_csv,
};
