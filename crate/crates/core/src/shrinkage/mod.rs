//! Linear and kernel estimators.

mod bic;
mod enet;
mod krr;
mod ols;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use bic::{ar_bic, ar_bic_direct, ardi_bic, ArdiFit, ArFit, ArdiGrid};
pub use enet::{
    enet_cd, enet_tune, kkt_residual, lambda_max, lambda_max_raw, ridge_closed_form, EnetConfig,
    EnetTuning, ALPHA_GRID,
};
pub use krr::{krr_fit, krr_predict, krr_tune, rbf_kernel, KrrFit, KrrTuning};
pub use ols::ols;

/// Column centering and scaling applied at fit time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

/// A fitted linear predictor `intercept + x · coef` on the original scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub coef: Vec<f64>,
    pub column_names: Vec<String>,
    /// Standardization used internally, if any.
    pub scaling: Option<Scaling>,
}

impl LinearFit {
    /// `[intercept, coef...]`.
    pub fn beta(&self) -> Vec<f64> {
        std::iter::once(self.intercept).chain(self.coef.iter().copied()).collect()
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }

    pub fn predict(&self, z: &DMatrix<f64>) -> Vec<f64> {
        (0..z.nrows())
            .map(|i| {
                self.intercept
                    + self
                        .coef
                        .iter()
                        .enumerate()
                        .map(|(j, b)| b * z[(i, j)])
                        .sum::<f64>()
            })
            .collect()
    }

    /// Coefficients on the internal standardized scale.
    pub fn standardized_coef(&self) -> Vec<f64> {
        match &self.scaling {
            Some(s) => self.coef.iter().zip(&s.sds).map(|(b, sd)| b * sd).collect(),
            None => self.coef.clone(),
        }
    }

    /// JSON object keyed by column name, plus `(intercept)`.
    pub fn to_json(&self) -> serde_json::Value {
        let mut m = BTreeMap::new();
        m.insert("(intercept)".to_string(), self.intercept);
        for (n, b) in self.column_names.iter().zip(&self.coef) {
            m.insert(n.clone(), *b);
        }
        serde_json::to_value(m).unwrap_or(serde_json::Value::Null)
    }
}

#[cfg(test)]
pub(crate) fn default_names(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("z{j}")).collect()
}
