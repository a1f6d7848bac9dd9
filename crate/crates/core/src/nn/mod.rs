//! Feed-forward neural networks.

mod mlp;
mod train;

pub use mlp::{finite_diff_gradcheck, Mlp};
pub use train::{
    nn_tune, NnTuning,
    mlp_train, nn_forecast, write_trace_csv, Adam, EpochTrace, MlpConfig, MlpModel, NnForecast, NnPlan, L1_GRID,
    LR_GRID,
};
