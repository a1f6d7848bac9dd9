//! AR and ARDI with orders chosen by BIC on a common estimation sample.
//!
//! `BIC = T_eff ln(SSR/T_eff) + q ln(T_eff)`, `q` counting the intercept.

use nalgebra::DMatrix;
use serde::Serialize;

use super::{ols, LinearFit};
use crate::error::{Error, Result};
use crate::features::DesignMatrix;
use crate::linalg::select_cols;

fn bic_of(fit: &LinearFit, z: &DMatrix<f64>, y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let pred = fit.predict(z);
    let ssr: f64 = y.iter().zip(&pred).map(|(a, b)| (a - b) * (a - b)).sum();
    let q = (fit.coef.len() + 1) as f64;
    n * (ssr.max(f64::MIN_POSITIVE) / n).ln() + q * n.ln()
}

#[derive(Clone, Debug, Serialize)]
pub struct ArFit {
    pub fit: LinearFit,
    pub order: usize,
    /// BIC for orders `1..=pmax`.
    pub bic: Vec<f64>,
}

/// Direct AR: regress `target[i]` on the first `p` columns of `lags`
/// (ordered most recent first), `p = 1..=pmax`, all on the same rows.
pub fn ar_bic_direct(lags: &DMatrix<f64>, names: &[String], target: &[f64], pmax: usize) -> Result<ArFit> {
    if pmax == 0 || lags.ncols() < pmax {
        return Err(Error::invalid(format!(
            "pmax {pmax} needs that many lag columns, have {}",
            lags.ncols()
        )));
    }
    if lags.nrows() != target.len() || lags.nrows() < pmax + 2 {
        return Err(Error::invalid("degenerate sample for AR order selection"));
    }
    let mut best: Option<(f64, LinearFit, usize)> = None;
    let mut bics = Vec::with_capacity(pmax);
    for p in 1..=pmax {
        let z = lags.columns(0, p).into_owned();
        let fit = ols(&z, target, &names[..p])?;
        let b = bic_of(&fit, &z, target);
        bics.push(b);
        if best.as_ref().is_none_or(|(bb, _, _)| b < *bb) {
            best = Some((b, fit, p));
        }
    }
    let (_, fit, order) = best.expect("pmax >= 1");
    Ok(ArFit {
        fit,
        order,
        bic: bics,
    })
}

/// One-step AR(p) on a single series, `p` chosen by BIC over `1..=pmax`.
pub fn ar_bic(y: &[f64], pmax: usize) -> Result<ArFit> {
    if pmax == 0 || y.len() < 2 * pmax + 3 {
        return Err(Error::invalid("series too short for AR order selection"));
    }
    let rows: Vec<usize> = (pmax - 1..y.len() - 1).collect();
    let lags = DMatrix::from_fn(rows.len(), pmax, |i, l| y[rows[i] - l]);
    let target: Vec<f64> = rows.iter().map(|&t| y[t + 1]).collect();
    let names: Vec<String> = (0..pmax).map(|l| format!("y_l{l}")).collect();
    ar_bic_direct(&lags, &names, &target, pmax)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ArdiGrid {
    pub py_max: usize,
    pub pf_max: usize,
    pub k_max: usize,
}

impl Default for ArdiGrid {
    fn default() -> Self {
        ArdiGrid {
            py_max: 6,
            pf_max: 6,
            k_max: 8,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ArdiFit {
    pub fit: LinearFit,
    pub py: usize,
    pub pf: usize,
    pub k: usize,
    pub bic: f64,
    /// Columns of the input design used by the chosen model.
    pub columns: Vec<usize>,
}

impl ArdiFit {
    pub fn predict_row(&self, design_row: &[f64]) -> f64 {
        let x: Vec<f64> = self.columns.iter().map(|&c| design_row[c]).collect();
        self.fit.predict_row(&x)
    }
}

/// Exhaustive BIC search over `(P_y, P_f, k)` on a design laid out as
/// `y_l0.. | F1_l0.. | F2_l0.. | ...` (as built by the feature builder).
pub fn ardi_bic(design: &DesignMatrix, target: &[f64], grid: ArdiGrid) -> Result<ArdiFit> {
    if grid.py_max == 0 || grid.pf_max == 0 || grid.k_max == 0 {
        return Err(Error::invalid("empty ARDI grid"));
    }
    let find = |name: String| {
        design
            .column_index(&name)
            .ok_or_else(|| Error::invalid(format!("ARDI grid needs column {name}")))
    };
    let y_cols: Vec<usize> = (0..grid.py_max).map(|l| find(format!("y_l{l}"))).collect::<Result<_>>()?;
    let f_cols: Vec<Vec<usize>> = (1..=grid.k_max)
        .map(|j| (0..grid.pf_max).map(|l| find(format!("F{j}_l{l}"))).collect())
        .collect::<Result<_>>()?;
    let params = grid.py_max + grid.k_max * grid.pf_max + 1;
    if design.values.nrows() != target.len() || target.len() <= params + 1 {
        return Err(Error::invalid("infeasible ARDI grid for this sample"));
    }
    let mut best: Option<ArdiFit> = None;
    for py in 1..=grid.py_max {
        for k in 1..=grid.k_max {
            for pf in 1..=grid.pf_max {
                let mut cols: Vec<usize> = y_cols[..py].to_vec();
                for fc in &f_cols[..k] {
                    cols.extend_from_slice(&fc[..pf]);
                }
                let z = select_cols(&design.values, &cols);
                let names: Vec<String> = cols.iter().map(|&c| design.names[c].clone()).collect();
                let fit = match ols(&z, target, &names) {
                    Ok(f) => f,
                    Err(Error::RankDeficient(_)) => continue,
                    Err(e) => return Err(e),
                };
                let b = bic_of(&fit, &z, target);
                if best.as_ref().is_none_or(|cur| b < cur.bic) {
                    best = Some(ArdiFit {
                        fit,
                        py,
                        pf,
                        k,
                        bic: b,
                        columns: cols,
                    });
                }
            }
        }
    }
    best.ok_or_else(|| Error::invalid("no estimable ARDI specification"))
}
