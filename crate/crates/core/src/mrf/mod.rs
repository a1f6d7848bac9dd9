//! Macroeconomic random forests: forests whose leaves hold ridge-penalized
//! weighted linear regressions in a small set of regressors `X̃`.

mod forest;
mod gtvp;
mod leaf;
mod vi;

pub use forest::{fit_mrf, MrfConfig, MrfLeaf, MrfModel, MrfTree};
pub use gtvp::{gtvp_extract, write_gtvp_csv, Band, GtvpPath};
pub use leaf::{podium_weights, ridge_wls};
pub use vi::{mrf_variable_importance, Permutation, VarImp, VarImpData, VarImpKind};
