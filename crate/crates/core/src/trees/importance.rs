//! Variable importance for forests and boosted trees.

use std::io::Write;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::boost::BoostModel;
use super::forest::{ForestModel, RegressionTree};
use super::grow::Node;
use crate::error::Result;
use crate::rng::child_rng;

fn gains(tree: &RegressionTree, acc: &mut [f64]) {
    for node in &tree.nodes {
        if let Node::Split { feature, gain, .. } = node {
            acc[*feature] += gain;
        }
    }
}

/// Mean SSE reduction per feature across trees.
pub fn forest_sse_importance(model: &ForestModel) -> Vec<f64> {
    let p = model.trees.first().map_or(0, |t| t.n_features);
    let mut acc = vec![0.0; p];
    for t in &model.trees {
        gains(t, &mut acc);
    }
    acc.iter().map(|g| g / model.trees.len() as f64).collect()
}

/// Total SSE reduction per feature, scaled by the learning rate.
pub fn boost_sse_importance(model: &BoostModel) -> Vec<f64> {
    let p = model.trees.first().map_or(0, |t| t.n_features);
    let mut acc = vec![0.0; p];
    for t in &model.trees {
        gains(t, &mut acc);
    }
    acc.iter().map(|g| g * model.eta).collect()
}

/// Mean increase in out-of-bag MSE when one feature is permuted among each
/// tree's out-of-bag rows.
pub fn oob_permutation_importance(model: &ForestModel, z: &DMatrix<f64>, y: &[f64], seed: u64) -> Vec<f64> {
    let p = z.ncols();
    let per_tree: Vec<Option<Vec<f64>>> = model
        .trees
        .par_iter()
        .zip(model.oob.par_iter())
        .enumerate()
        .map(|(b, (tree, oob))| {
            if oob.is_empty() {
                return None;
            }
            let base = oob.iter().map(|&i| (tree.predict_at(z, i) - y[i]).powi(2)).sum::<f64>() / oob.len() as f64;
            let mut row = vec![0.0; p];
            let out = (0..p)
                .map(|j| {
                    let mut perm = oob.clone();
                    perm.shuffle(&mut child_rng(seed, &[b as u64, j as u64]));
                    let mse = oob
                        .iter()
                        .zip(&perm)
                        .map(|(&i, &k)| {
                            row.copy_from_slice(z.row(i).transpose().as_slice());
                            row[j] = z[(k, j)];
                            (tree.predict_row(&row) - y[i]).powi(2)
                        })
                        .sum::<f64>()
                        / oob.len() as f64;
                    mse - base
                })
                .collect();
            Some(out)
        })
        .collect();
    let used: Vec<&Vec<f64>> = per_tree.iter().flatten().collect();
    (0..p)
        .map(|j| {
            if used.is_empty() {
                0.0
            } else {
                used.iter().map(|v| v[j]).sum::<f64>() / used.len() as f64
            }
        })
        .collect()
}

/// CSV with columns `feature,sse_gain,oob_permutation`.
pub fn write_importance_csv<W: Write>(
    names: &[String],
    sse_gain: &[f64],
    permutation: Option<&[f64]>,
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["feature", "sse_gain", "oob_permutation"])?;
    for (j, name) in names.iter().enumerate() {
        let perm = permutation.map_or(String::new(), |p| p[j].to_string());
        w.write_record([name.as_str(), &sse_gain[j].to_string(), &perm])?;
    }
    w.flush()?;
    Ok(())
}
