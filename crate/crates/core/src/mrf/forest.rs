//! Fitting and prediction for macroeconomic random forests.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::leaf::{RollingCriterion, Stats};
use crate::error::{Error, Result};
use crate::rng::child_rng;
use crate::trees::grow::{block_bootstrap, grow, out_of_bag, route, GrowParams, Node};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MrfConfig {
    /// Names of the `X̃` columns, for reporting.
    pub linear_part: Vec<String>,
    pub ridge_lambda: f64,
    pub zeta: f64,
    pub block_size: usize,
    pub n_trees: usize,
    pub mtry_frac: f64,
    /// `None` means `max(10, 2 (dim X̃ + 1))`.
    pub min_leaf: Option<usize>,
    pub seed: u64,
}

impl MrfConfig {
    pub fn new(linear_part: Vec<String>) -> Self {
        MrfConfig {
            linear_part,
            ridge_lambda: 0.1,
            zeta: 0.5,
            block_size: 12,
            n_trees: 500,
            mtry_frac: 1.0 / 3.0,
            min_leaf: None,
            seed: 0,
        }
    }

    /// Coefficients per leaf, including the intercept.
    pub fn dim(&self) -> usize {
        self.linear_part.len() + 1
    }

    pub fn min_leaf(&self) -> usize {
        self.min_leaf.unwrap_or(10.max(2 * self.dim()))
    }

    pub fn mtry(&self, p: usize) -> usize {
        ((p as f64 * self.mtry_frac - 1e-9).ceil() as usize).clamp(1, p.max(1))
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.zeta) {
            return Err(Error::invalid(format!("zeta must be in [0,1), got {}", self.zeta)));
        }
        if !(self.ridge_lambda >= 0.0) {
            return Err(Error::invalid("ridge_lambda must be non-negative"));
        }
        if self.n_trees == 0 || self.block_size == 0 {
            return Err(Error::invalid("n_trees and block_size must be positive"));
        }
        if !(self.mtry_frac > 0.0 && self.mtry_frac <= 1.0) {
            return Err(Error::invalid("mtry_frac must be in (0,1]"));
        }
        if self.min_leaf() < self.dim() {
            return Err(Error::invalid(format!(
                "min_leaf {} is below the leaf regression dimension {}",
                self.min_leaf(),
                self.dim()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MrfLeaf {
    /// `[intercept, slopes...]` on the original scale of `X̃`.
    pub beta: Vec<f64>,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MrfTree {
    pub nodes: Vec<Node<MrfLeaf>>,
}

impl MrfTree {
    pub fn beta_at(&self, s: &DMatrix<f64>, i: usize) -> &[f64] {
        match &self.nodes[route(&self.nodes, |j| s[(i, j)])] {
            Node::Leaf(l) => &l.beta,
            Node::Split { .. } => unreachable!(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MrfModel {
    pub trees: Vec<MrfTree>,
    pub oob: Vec<Vec<usize>>,
    pub config: MrfConfig,
    pub n_state: usize,
}

pub(crate) fn linear_value(beta: &[f64], xt: &DMatrix<f64>, i: usize) -> f64 {
    beta[0] + (1..beta.len()).map(|k| beta[k] * xt[(i, k - 1)]).sum::<f64>()
}

impl MrfModel {
    pub fn predict(&self, s: &DMatrix<f64>, xt: &DMatrix<f64>) -> Result<Vec<f64>> {
        if s.ncols() != self.n_state || xt.ncols() + 1 != self.config.dim() || s.nrows() != xt.nrows() {
            return Err(Error::Dimension("state or linear-part shape differs from training".into()));
        }
        Ok((0..s.nrows())
            .map(|i| {
                self.trees
                    .iter()
                    .map(|t| linear_value(t.beta_at(s, i), xt, i))
                    .sum::<f64>()
                    / self.trees.len() as f64
            })
            .collect())
    }
}

/// Fit `y_t = X̃_t β_t + ε_t` with `β_t` a forest over the state `S_t`.
///
/// Podium weights use calendar distance between rows of the training
/// sample and only reach rows drawn into the tree's bootstrap sample.
pub fn fit_mrf(y: &[f64], s: &DMatrix<f64>, xt: &DMatrix<f64>, cfg: &MrfConfig) -> Result<MrfModel> {
    cfg.validate()?;
    let t = y.len();
    if t == 0 || s.nrows() != t || xt.nrows() != t {
        return Err(Error::Dimension(format!(
            "target has {t} rows, state {}, linear part {}",
            s.nrows(),
            xt.nrows()
        )));
    }
    if xt.ncols() + 1 != cfg.dim() {
        return Err(Error::Dimension(format!(
            "linear part has {} columns but {} names",
            xt.ncols(),
            cfg.linear_part.len()
        )));
    }
    if s.iter().chain(xt.iter()).chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite training data"));
    }
    let d = cfg.dim();
    let scale: Vec<f64> = xt
        .column_iter()
        .map(|c| {
            let m = c.mean();
            let sd = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / t as f64).sqrt();
            if sd > 0.0 { sd } else { 1.0 }
        })
        .collect();
    let mut design = Vec::with_capacity(t * d);
    for i in 0..t {
        design.push(1.0);
        design.extend((0..xt.ncols()).map(|k| xt[(i, k)] / scale[k]));
    }
    let params = GrowParams {
        min_node: cfg.min_leaf(),
        mtry: cfg.mtry(s.ncols()),
        max_depth: usize::MAX,
    };
    let fitted: Vec<(MrfTree, Vec<usize>)> = (0..cfg.n_trees)
        .into_par_iter()
        .map(|b| {
            let mut rng = child_rng(cfg.seed, &[b as u64]);
            let rows = block_bootstrap(&mut rng, t, cfg.block_size);
            let mut in_bag = vec![false; t];
            for &r in &rows {
                in_bag[r] = true;
            }
            let oob = out_of_bag(&rows, t);
            let mut crit = RollingCriterion::new(&design, y, d, &in_bag, cfg.zeta, cfg.ridge_lambda);
            let leaf_crit = RollingCriterion::new(&design, y, d, &in_bag, cfg.zeta, cfg.ridge_lambda);
            let make_leaf = |members: &[usize]| leaf(&leaf_crit.node_stats(members), members.len(), cfg.ridge_lambda, &scale);
            let nodes = grow(s, rows, params, &mut crit, make_leaf, &mut rng);
            (MrfTree { nodes }, oob)
        })
        .collect();
    let (trees, oob) = fitted.into_iter().unzip();
    Ok(MrfModel {
        trees,
        oob,
        config: cfg.clone(),
        n_state: s.ncols(),
    })
}

fn leaf(stats: &Stats, count: usize, lambda: f64, scale: &[f64]) -> MrfLeaf {
    let beta = match stats.solve(lambda) {
        Some((b, _)) => b,
        None => {
            log::warn!("singular leaf regression with {count} members; using a small ridge");
            stats
                .solve(lambda.max(1e-8))
                .map(|(b, _)| b)
                .unwrap_or_else(|| vec![0.0; scale.len() + 1])
        }
    };
    let beta = std::iter::once(beta[0])
        .chain(beta[1..].iter().zip(scale).map(|(b, s)| b / s))
        .collect();
    MrfLeaf { beta, count }
}
