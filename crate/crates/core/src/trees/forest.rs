//! Regression trees and random forests.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grow::{grow, iid_bootstrap, out_of_bag, route, GrowParams, Node, SplitCriterion};
use crate::error::{Error, Result};
use crate::rng::{child_rng, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafMean {
    pub value: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node<LeafMean>>,
    pub n_features: usize,
}

impl RegressionTree {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        match &self.nodes[route(&self.nodes, |j| x[j])] {
            Node::Leaf(l) => l.value,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub(crate) fn predict_at(&self, z: &DMatrix<f64>, i: usize) -> f64 {
        match &self.nodes[route(&self.nodes, |j| z[(i, j)])] {
            Node::Leaf(l) => l.value,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn predict(&self, z: &DMatrix<f64>) -> Vec<f64> {
        (0..z.nrows()).map(|i| self.predict_at(z, i)).collect()
    }

    pub fn leaves(&self) -> impl Iterator<Item = &LeafMean> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf(l) => Some(l),
            Node::Split { .. } => None,
        })
    }
}

/// Sum-of-squares criterion via running sums.
pub(crate) struct SseCriterion<'a> {
    y: &'a [f64],
    n: f64,
    sum: f64,
    sumsq: f64,
    ln: f64,
    lsum: f64,
    lsumsq: f64,
}

impl<'a> SseCriterion<'a> {
    pub(crate) fn new(y: &'a [f64]) -> Self {
        SseCriterion {
            y,
            n: 0.0,
            sum: 0.0,
            sumsq: 0.0,
            ln: 0.0,
            lsum: 0.0,
            lsumsq: 0.0,
        }
    }
}

fn sse(n: f64, sum: f64, sumsq: f64) -> f64 {
    sumsq - sum * (sum / n)
}

impl SplitCriterion for SseCriterion<'_> {
    fn begin(&mut self, rows: &[usize]) {
        self.n = 0.0;
        self.sum = 0.0;
        self.sumsq = 0.0;
        for &r in rows {
            let v = self.y[r];
            self.n += 1.0;
            self.sum += v;
            self.sumsq += v * v;
        }
        self.ln = 0.0;
        self.lsum = 0.0;
        self.lsumsq = 0.0;
    }

    fn shift_left(&mut self, row: usize) {
        let v = self.y[row];
        self.ln += 1.0;
        self.lsum += v;
        self.lsumsq += v * v;
    }

    fn node_loss(&self) -> f64 {
        sse(self.n, self.sum, self.sumsq)
    }

    fn children_loss(&self) -> Option<f64> {
        Some(
            sse(self.ln, self.lsum, self.lsumsq)
                + sse(self.n - self.ln, self.sum - self.lsum, self.sumsq - self.lsumsq),
        )
    }

    fn is_pure(&self, rows: &[usize]) -> bool {
        let first = self.y[rows[0]];
        rows.iter().all(|&r| self.y[r] == first)
    }
}

pub(crate) fn leaf_mean(y: &[f64], rows: &[usize]) -> LeafMean {
    let sum: f64 = rows.iter().map(|&r| y[r]).sum();
    LeafMean {
        value: sum / rows.len() as f64,
        count: rows.len(),
    }
}

pub(crate) fn check_xy(z: &DMatrix<f64>, y: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(Error::invalid("no training rows"));
    }
    if z.nrows() != y.len() {
        return Err(Error::Dimension(format!("design has {} rows, target {}", z.nrows(), y.len())));
    }
    if z.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite training data"));
    }
    Ok(())
}

pub(crate) fn fit_tree_on(
    z: &DMatrix<f64>,
    y: &[f64],
    rows: Vec<usize>,
    params: GrowParams,
    rng: &mut Rng,
) -> RegressionTree {
    let mut crit = SseCriterion::new(y);
    let nodes = grow(z, rows, params, &mut crit, |r: &[usize]| leaf_mean(y, r), rng);
    RegressionTree {
        nodes,
        n_features: z.ncols(),
    }
}

/// A single CART tree on all rows, `mtry` features per node.
pub fn fit_tree(z: &DMatrix<f64>, y: &[f64], min_node: usize, mtry: usize, rng: &mut Rng) -> Result<RegressionTree> {
    check_xy(z, y)?;
    let params = GrowParams {
        min_node: min_node.max(1),
        mtry: mtry.clamp(1, z.ncols().max(1)),
        max_depth: usize::MAX,
    };
    Ok(fit_tree_on(z, y, (0..y.len()).collect(), params, rng))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub min_node: usize,
    /// Features tried per split; `None` means `ceil(p / 3)`.
    pub mtry: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 500,
            min_node: 3,
            mtry: None,
            bootstrap: true,
        }
    }
}

impl ForestConfig {
    pub fn mtry_for(&self, p: usize) -> usize {
        self.mtry.unwrap_or(p.div_ceil(3)).clamp(1, p.max(1))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<RegressionTree>,
    /// Out-of-bag rows of each tree.
    pub oob: Vec<Vec<usize>>,
    pub seed: u64,
    pub config: ForestConfig,
}

impl ForestModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn predict(&self, z: &DMatrix<f64>) -> Vec<f64> {
        (0..z.nrows())
            .map(|i| self.trees.iter().map(|t| t.predict_at(z, i)).sum::<f64>() / self.trees.len() as f64)
            .collect()
    }
}

/// Tree `b` draws from `child_rng(seed, [b])`: bootstrap rows first, then
/// the per-node feature subsets.
pub fn fit_forest(z: &DMatrix<f64>, y: &[f64], cfg: &ForestConfig, seed: u64) -> Result<ForestModel> {
    check_xy(z, y)?;
    if cfg.n_trees == 0 {
        return Err(Error::invalid("forest needs at least one tree"));
    }
    let t = y.len();
    let params = GrowParams {
        min_node: cfg.min_node.max(1),
        mtry: cfg.mtry_for(z.ncols()),
        max_depth: usize::MAX,
    };
    let fitted: Vec<(RegressionTree, Vec<usize>)> = (0..cfg.n_trees)
        .into_par_iter()
        .map(|b| {
            let mut rng = child_rng(seed, &[b as u64]);
            let rows = if cfg.bootstrap {
                iid_bootstrap(&mut rng, t)
            } else {
                (0..t).collect()
            };
            let oob = out_of_bag(&rows, t);
            (fit_tree_on(z, y, rows, params, &mut rng), oob)
        })
        .collect();
    let (trees, oob) = fitted.into_iter().unzip();
    Ok(ForestModel {
        trees,
        oob,
        seed,
        config: *cfg,
    })
}
