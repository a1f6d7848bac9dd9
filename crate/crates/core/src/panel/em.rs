use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::Panel;
use crate::error::{Error, Result};
use crate::factors::extract_factors;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EmOptions {
    pub k: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            k: 8,
            tol: 1e-6,
            max_iter: 500,
        }
    }
}

/// Diagnostics of an EM balancing run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub iterations: usize,
    /// Sum of squared residuals of the rank-`k` fit on the standardized,
    /// completed panel, one value per iteration.
    pub objective_trace: Vec<f64>,
    pub imputed_count: usize,
}

/// Fill missing cells with a rank-`k` principal-component fit, iterating
/// until the imputed values stop moving.
///
/// Missing cells start at their column's observed mean. Each iteration
/// recenters the completed panel on its current column means, scales by the
/// observed-entry standard deviations, extracts `k` factors, and replaces the
/// missing cells with the de-standardized common component. Holding the
/// scales fixed makes the objective non-increasing. Observed cells are never
/// modified.
pub fn balance_panel_em(p: &Panel, opts: EmOptions) -> Result<(Panel, BalanceReport)> {
    let (t_len, n) = (p.n_periods(), p.n_series());
    if opts.k == 0 || opts.k >= t_len.min(n) {
        return Err(Error::invalid(format!(
            "EM factor count {} must be in 1..{}",
            opts.k,
            t_len.min(n)
        )));
    }
    for j in 0..n {
        if !p.mask.column(j).iter().any(|&m| m) {
            return Err(Error::EmptyColumn(p.meta[j].id.clone()));
        }
    }
    for t in 0..t_len {
        if !p.mask.row(t).iter().any(|&m| m) {
            return Err(Error::EmptyRow(t));
        }
    }

    let missing: Vec<(usize, usize)> = (0..n)
        .flat_map(|j| (0..t_len).map(move |t| (t, j)))
        .filter(|&(t, j)| !p.mask[(t, j)])
        .collect();

    let mut x = p.values.clone();
    let mut sds = Vec::with_capacity(n);
    for j in 0..n {
        let obs: Vec<f64> = (0..t_len)
            .filter(|&t| p.mask[(t, j)])
            .map(|t| p.values[(t, j)])
            .collect();
        let m = obs.iter().sum::<f64>() / obs.len() as f64;
        let ss = obs.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
        let sd = if obs.len() > 1 { (ss / (obs.len() - 1) as f64).sqrt() } else { 0.0 };
        if !(sd > 0.0) {
            return Err(Error::ZeroVariance(p.meta[j].id.clone()));
        }
        sds.push(sd);
        for t in 0..t_len {
            if !p.mask[(t, j)] {
                x[(t, j)] = m;
            }
        }
    }

    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let (z, means) = center_and_scale(&x, &sds);
        let fm = extract_factors(&z, opts.k)?;
        let fit = fm.fitted();
        trace.push((&z - &fit).norm_squared());
        let mut max_change: f64 = 0.0;
        for &(t, j) in &missing {
            let v = fit[(t, j)] * sds[j] + means[j];
            max_change = max_change.max((v - x[(t, j)]).abs());
            x[(t, j)] = v;
        }
        if max_change < opts.tol || iterations >= opts.max_iter {
            break;
        }
    }

    let mut out = p.clone();
    out.values = x;
    out.mask = DMatrix::from_element(t_len, n, true);
    Ok((
        out,
        BalanceReport {
            iterations,
            objective_trace: trace,
            imputed_count: missing.len(),
        },
    ))
}

fn center_and_scale(x: &DMatrix<f64>, sds: &[f64]) -> (DMatrix<f64>, Vec<f64>) {
    let mut z = x.clone();
    let mut means = Vec::with_capacity(x.ncols());
    for (j, mut col) in z.column_iter_mut().enumerate() {
        let m = col.mean();
        col.apply(|v| *v = (*v - m) / sds[j]);
        means.push(m);
    }
    (z, means)
}
