//! Gradient boosted regression trees under square loss.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forest::{check_xy, fit_tree_on, RegressionTree};
use super::grow::GrowParams;
use crate::error::{Error, Result};
use crate::eval::cv::kfold_split;
use crate::linalg::{select_entries, select_rows};
use crate::rng::rng_from;

pub const ETA_GRID: [f64; 4] = [0.01, 0.05, 0.1, 0.3];
pub const STEPS_GRID: [usize; 5] = [25, 50, 100, 200, 500];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    pub eta: f64,
    pub n_steps: usize,
    pub max_depth: usize,
    pub min_node: usize,
}

impl BoostConfig {
    pub fn new(eta: f64, n_steps: usize) -> Self {
        BoostConfig {
            eta,
            n_steps,
            max_depth: 10,
            min_node: 3,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoostModel {
    pub init: f64,
    pub eta: f64,
    pub trees: Vec<RegressionTree>,
    /// Training MSE after each step.
    pub train_mse: Vec<f64>,
}

impl BoostModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.trees
            .iter()
            .fold(self.init, |acc, t| acc + self.eta * t.predict_row(x))
    }

    pub fn predict(&self, z: &DMatrix<f64>) -> Vec<f64> {
        self.predict_staged(z, &[self.trees.len()]).pop().unwrap_or_default()
    }

    /// Predictions after each step count in `steps` (ascending).
    pub fn predict_staged(&self, z: &DMatrix<f64>, steps: &[usize]) -> Vec<Vec<f64>> {
        let mut f = vec![self.init; z.nrows()];
        let mut out = Vec::with_capacity(steps.len());
        let mut done = 0;
        for &s in steps {
            for t in &self.trees[done..s.min(self.trees.len())] {
                for (i, v) in f.iter_mut().enumerate() {
                    *v += self.eta * t.predict_at(z, i);
                }
            }
            done = done.max(s.min(self.trees.len()));
            out.push(f.clone());
        }
        out
    }
}

/// `f_0 = mean(y)`, then each step fits a tree to the residuals and adds
/// `eta` times its leaf means.
pub fn fit_boost(z: &DMatrix<f64>, y: &[f64], cfg: &BoostConfig) -> Result<BoostModel> {
    check_xy(z, y)?;
    if !(0.0..=1.0).contains(&cfg.eta) || cfg.n_steps == 0 {
        return Err(Error::invalid(format!(
            "boosting needs eta in [0,1] and at least one step, got eta={} steps={}",
            cfg.eta, cfg.n_steps
        )));
    }
    let n = y.len();
    let params = GrowParams {
        min_node: cfg.min_node.max(1),
        mtry: z.ncols().max(1),
        max_depth: cfg.max_depth,
    };
    let init = y.iter().sum::<f64>() / n as f64;
    let mut f = vec![init; n];
    let mut trees = Vec::with_capacity(cfg.n_steps);
    let mut train_mse = Vec::with_capacity(cfg.n_steps);
    // every feature is tried at every node, so the stream is never drawn from
    let mut rng = rng_from(0);
    for _ in 0..cfg.n_steps {
        let r: Vec<f64> = y.iter().zip(&f).map(|(a, b)| a - b).collect();
        let tree = fit_tree_on(z, &r, (0..n).collect(), params, &mut rng);
        for (i, v) in f.iter_mut().enumerate() {
            *v += cfg.eta * tree.predict_at(z, i);
        }
        train_mse.push(y.iter().zip(&f).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n as f64);
        trees.push(tree);
    }
    Ok(BoostModel {
        init,
        eta: cfg.eta,
        trees,
        train_mse,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BoostTuning {
    pub config: BoostConfig,
    pub cv_mse: f64,
}

/// K-fold search over [`ETA_GRID`] x [`STEPS_GRID`]. Ties go to fewer steps,
/// then smaller `eta`.
pub fn boost_tune(z: &DMatrix<f64>, y: &[f64], folds: usize, seed: u64, base: &BoostConfig) -> Result<BoostTuning> {
    check_xy(z, y)?;
    let n = y.len();
    let assignment = kfold_split(n, folds, seed)?;
    let max_steps = *STEPS_GRID.last().expect("grid");
    let jobs: Vec<(usize, usize)> = (0..ETA_GRID.len())
        .flat_map(|e| (0..folds).map(move |f| (e, f)))
        .collect();
    let sse: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(e, f)| -> Result<Vec<f64>> {
            let train: Vec<usize> = (0..n).filter(|&i| assignment[i] != f).collect();
            let test: Vec<usize> = (0..n).filter(|&i| assignment[i] == f).collect();
            let cfg = BoostConfig {
                eta: ETA_GRID[e],
                n_steps: max_steps,
                ..*base
            };
            let model = fit_boost(&select_rows(z, &train), &select_entries(y, &train), &cfg)?;
            let yt = select_entries(y, &test);
            Ok(model
                .predict_staged(&select_rows(z, &test), &STEPS_GRID)
                .iter()
                .map(|p| p.iter().zip(&yt).map(|(a, b)| (a - b) * (a - b)).sum())
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut best: Option<(f64, usize, f64)> = None;
    for (si, &steps) in STEPS_GRID.iter().enumerate() {
        for (e, &eta) in ETA_GRID.iter().enumerate() {
            let total: f64 = (0..folds).map(|f| sse[e * folds + f][si]).sum();
            let mse = total / n as f64;
            if best.is_none_or(|(bm, _, _)| mse < bm) {
                best = Some((mse, steps, eta));
            }
        }
    }
    let (cv_mse, n_steps, eta) = best.expect("non-empty grid");
    Ok(BoostTuning {
        config: BoostConfig { eta, n_steps, ..*base },
        cv_mse,
    })
}
