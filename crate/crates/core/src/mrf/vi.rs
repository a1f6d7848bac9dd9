//! Permutation variable importance for macroeconomic random forests.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::forest::{linear_value, MrfModel};
use crate::error::{Error, Result};
use crate::rng::child_rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarImpKind {
    /// Out-of-bag RMSE increase.
    Oob,
    /// Hold-out RMSE increase.
    Oos,
    /// Out-of-bag change in the coefficient paths.
    Beta,
}

/// How the rows of a state column are shuffled.
#[derive(Clone, Debug)]
pub enum Permutation {
    /// Fresh shuffle per feature from `child_rng(seed, [feature])`.
    Random(u64),
    /// The same row order for every feature.
    Fixed(Vec<usize>),
}

impl Permutation {
    fn rows(&self, n: usize, feature: usize) -> Result<Vec<usize>> {
        match self {
            Permutation::Random(seed) => {
                let mut p: Vec<usize> = (0..n).collect();
                p.shuffle(&mut child_rng(*seed, &[feature as u64]));
                Ok(p)
            }
            Permutation::Fixed(p) if p.len() == n => Ok(p.clone()),
            Permutation::Fixed(p) => Err(Error::Dimension(format!("permutation of {} rows for {n}", p.len()))),
        }
    }
}

/// Data the importance is measured on.
pub struct VarImpData<'a> {
    pub s: &'a DMatrix<f64>,
    pub xt: &'a DMatrix<f64>,
    pub y: &'a [f64],
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VarImp {
    pub feature: usize,
    /// Percent increase.
    pub gain: f64,
}

fn rms(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x * x, n + 1));
    (s / n.max(1) as f64).sqrt()
}

/// Average over out-of-bag trees of each row's prediction and coefficients.
fn oob_paths(model: &MrfModel, s: &DMatrix<f64>, xt: &DMatrix<f64>) -> (Vec<Option<f64>>, Vec<Option<Vec<f64>>>) {
    let t = s.nrows();
    let d = model.config.dim();
    let mut pred = vec![0.0; t];
    let mut beta = vec![vec![0.0; d]; t];
    let mut count = vec![0usize; t];
    for (tree, oob) in model.trees.iter().zip(&model.oob) {
        for &i in oob {
            let b = tree.beta_at(s, i);
            pred[i] += linear_value(b, xt, i);
            for k in 0..d {
                beta[i][k] += b[k];
            }
            count[i] += 1;
        }
    }
    let p = (0..t).map(|i| (count[i] > 0).then(|| pred[i] / count[i] as f64)).collect();
    let b = (0..t)
        .map(|i| (count[i] > 0).then(|| beta[i].iter().map(|v| v / count[i] as f64).collect()))
        .collect();
    (p, b)
}

fn permuted(s: &DMatrix<f64>, j: usize, rows: &[usize]) -> DMatrix<f64> {
    let mut out = s.clone();
    for (i, &k) in rows.iter().enumerate() {
        out[(i, j)] = s[(k, j)];
    }
    out
}

fn rmse(pred: &[Option<f64>], y: &[f64]) -> f64 {
    rms(pred.iter().zip(y).filter_map(|(p, o)| p.map(|p| p - o)))
}

/// Ranked importance of every state column, largest gain first.
///
/// `Oob` and `Beta` expect the training data, `Oos` a hold-out sample.
pub fn mrf_variable_importance(
    model: &MrfModel,
    data: &VarImpData<'_>,
    kind: VarImpKind,
    permutation: &Permutation,
) -> Result<Vec<VarImp>> {
    let VarImpData { s, xt, y } = *data;
    let n = s.nrows();
    if s.ncols() != model.n_state || xt.nrows() != n || y.len() != n || xt.ncols() + 1 != model.config.dim() {
        return Err(Error::Dimension("importance data shape differs from training".into()));
    }
    if kind != VarImpKind::Oos && model.oob.iter().all(|o| o.is_empty()) {
        return Err(Error::invalid("no out-of-bag rows"));
    }
    if n == 0 {
        return Err(Error::invalid("empty importance sample"));
    }
    let score = |state: &DMatrix<f64>| -> Result<Score> {
        Ok(match kind {
            VarImpKind::Oob => Score::Rmse(rmse(&oob_paths(model, state, xt).0, y)),
            VarImpKind::Oos => Score::Rmse(rmse(&model.predict(state, xt)?.into_iter().map(Some).collect::<Vec<_>>(), y)),
            VarImpKind::Beta => Score::Beta(oob_paths(model, state, xt).1),
        })
    };
    let base = score(s)?;
    let mut out = Vec::with_capacity(s.ncols());
    for j in 0..s.ncols() {
        let perm = permutation.rows(n, j)?;
        let gain = match (&base, score(&permuted(s, j, &perm))?) {
            (Score::Rmse(b), Score::Rmse(p)) => 100.0 * (p / b - 1.0),
            (Score::Beta(b), Score::Beta(p)) => {
                let diff = rms(b.iter().zip(&p).filter_map(|(u, v)| Some((u.as_ref()?, v.as_ref()?))).flat_map(|(u, v)| u.iter().zip(v).map(|(a, c)| c - a)));
                let level = rms(b.iter().flatten().flatten().copied());
                100.0 * diff / level
            }
            _ => unreachable!(),
        };
        out.push(VarImp { feature: j, gain });
    }
    out.sort_by(|a, b| b.gain.total_cmp(&a.gain).then(a.feature.cmp(&b.feature)));
    Ok(out)
}

enum Score {
    Rmse(f64),
    Beta(Vec<Option<Vec<f64>>>),
}
