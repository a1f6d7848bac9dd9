//! Kernel ridge regression with a Gaussian (RBF) kernel.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::cv::kfold_split;
use crate::linalg::{select_entries, select_rows, sym_eigen_desc};

const SIGMA_QUANTILES: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
const LAMBDA_POINTS: usize = 30;
const LAMBDA_RANGE: (f64, f64) = (1e-6, 1e2);

#[derive(Clone, Debug, Serialize)]
pub struct KrrFit {
    pub alpha_weights: Vec<f64>,
    pub train_z: DMatrix<f64>,
    pub sigma: f64,
    pub lambda: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct KrrTuning {
    pub sigma: f64,
    pub lambda: f64,
    pub cv_mse: f64,
}

fn sq_dist(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
    (0..a.ncols()).map(|c| (a[(i, c)] - b[(j, c)]).powi(2)).sum()
}

/// `K[i, j] = exp(-||a_i - b_j||² / 2σ²)`.
pub fn rbf_kernel(a: &DMatrix<f64>, b: &DMatrix<f64>, sigma: f64) -> Result<DMatrix<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("kernel bandwidth must be positive, got {sigma}")));
    }
    if a.ncols() != b.ncols() {
        return Err(Error::Dimension(format!("kernel inputs have {} and {} columns", a.ncols(), b.ncols())));
    }
    let s2 = 2.0 * sigma * sigma;
    Ok(DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| (-sq_dist(a, i, b, j) / s2).exp()))
}

/// Solve `(K + λI) α = y` by Cholesky with two rounds of iterative refinement.
pub fn krr_fit(z: &DMatrix<f64>, y: &[f64], sigma: f64, lambda: f64) -> Result<KrrFit> {
    if z.nrows() != y.len() || y.is_empty() {
        return Err(Error::Dimension(format!("design has {} rows, target {}", z.nrows(), y.len())));
    }
    if !(lambda >= 0.0) {
        return Err(Error::invalid(format!("lambda must be non-negative, got {lambda}")));
    }
    if z.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite input to kernel ridge"));
    }
    let mut a = rbf_kernel(z, z, sigma)?;
    for i in 0..a.nrows() {
        a[(i, i)] += lambda;
    }
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Solver(format!("K + {lambda}I is not positive definite")))?;
    let yv = DVector::from_column_slice(y);
    let mut alpha = chol.solve(&yv);
    for _ in 0..2 {
        let r = &yv - &a * &alpha;
        alpha += chol.solve(&r);
    }
    Ok(KrrFit {
        alpha_weights: alpha.iter().copied().collect(),
        train_z: z.clone(),
        sigma,
        lambda,
    })
}

pub fn krr_predict(fit: &KrrFit, z_new: &DMatrix<f64>) -> Result<Vec<f64>> {
    let k = rbf_kernel(z_new, &fit.train_z, fit.sigma)?;
    Ok((k * DVector::from_column_slice(&fit.alpha_weights)).iter().copied().collect())
}

/// Candidate bandwidths: deciles of the pairwise Euclidean distances.
fn sigma_grid(z: &DMatrix<f64>) -> Vec<f64> {
    let n = z.nrows();
    let mut d: Vec<f64> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| sq_dist(z, i, z, j).sqrt())
        .collect();
    if d.is_empty() {
        return vec![];
    }
    d.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = SIGMA_QUANTILES
        .iter()
        .map(|q| {
            let pos = q * (d.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            d[lo] + (d[hi] - d[lo]) * (pos - lo as f64)
        })
        .filter(|s| *s > 0.0)
        .collect();
    out.dedup();
    out
}

fn lambda_grid() -> Vec<f64> {
    let (lo, hi) = (LAMBDA_RANGE.0.ln(), LAMBDA_RANGE.1.ln());
    (0..LAMBDA_POINTS)
        .map(|i| (lo + (hi - lo) * i as f64 / (LAMBDA_POINTS - 1) as f64).exp())
        .collect()
}

/// K-fold search over the bandwidth and penalty grids. Ties go to larger
/// `λ`, then larger `σ`.
pub fn krr_tune(z: &DMatrix<f64>, y: &[f64], folds: usize, seed: u64) -> Result<KrrTuning> {
    let n = y.len();
    let assignment = kfold_split(n, folds, seed)?;
    let sigmas = sigma_grid(z);
    if sigmas.is_empty() {
        return Err(Error::invalid("all training rows coincide"));
    }
    let lambdas = lambda_grid();
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..folds)
        .map(|f| {
            let train = (0..n).filter(|&i| assignment[i] != f).collect::<Vec<_>>();
            let test = (0..n).filter(|&i| assignment[i] == f).collect::<Vec<_>>();
            (train, test)
        })
        .collect();
    if splits.iter().any(|(tr, te)| tr.is_empty() || te.is_empty()) {
        return Err(Error::invalid("degenerate folds"));
    }

    let sse: Vec<Vec<f64>> = sigmas
        .par_iter()
        .map(|&sigma| -> Result<Vec<f64>> {
            let mut acc = vec![0.0; lambdas.len()];
            for (train, test) in &splits {
                let ztr = select_rows(z, train);
                let zte = select_rows(z, test);
                let ytr = DVector::from_vec(select_entries(y, train));
                let yte = select_entries(y, test);
                let (vals, vecs) = sym_eigen_desc(rbf_kernel(&ztr, &ztr, sigma)?);
                let kte = rbf_kernel(&zte, &ztr, sigma)?;
                let vty = vecs.transpose() * &ytr;
                let kv = &kte * &vecs;
                for (li, &lambda) in lambdas.iter().enumerate() {
                    let w = DVector::from_iterator(
                        vals.len(),
                        vals.iter().zip(vty.iter()).map(|(d, c)| c / (d.max(0.0) + lambda)),
                    );
                    let pred = &kv * w;
                    acc[li] += pred.iter().zip(&yte).map(|(p, o)| (p - o) * (p - o)).sum::<f64>();
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;

    let mut best: Option<(f64, f64, f64)> = None;
    for (si, &sigma) in sigmas.iter().enumerate() {
        for (li, &lambda) in lambdas.iter().enumerate() {
            let mse = sse[si][li] / n as f64;
            let better = match best {
                None => true,
                Some((bm, bl, bs)) => mse < bm || (mse == bm && (lambda > bl || (lambda == bl && sigma > bs))),
            };
            if better {
                best = Some((mse, lambda, sigma));
            }
        }
    }
    let (cv_mse, lambda, sigma) = best.expect("non-empty grid");
    Ok(KrrTuning { sigma, lambda, cv_mse })
}
