//! Elastic net by cyclic coordinate descent.
//!
//! Objective on standardized columns `z` (population sd) and centered `y`:
//!
//! ```text
//! (1/2T) ||y - zβ||² + λ (α ||β||₁ + (1-α)/2 ||β||₂²)
//! ```
//!
//! The intercept is never penalized. Coordinate updates run on the Gram
//! matrix `z'z/T`, keeping the gradient `z'(y - zβ)/T` current.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{LinearFit, Scaling};
use crate::error::{Error, Result};
use crate::eval::cv::kfold_split;
use crate::linalg::{select_entries, select_rows, sym_eigen_desc};

/// `α ∈ {0.01, 0.02, ..., 1}`.
pub const ALPHA_GRID: [f64; 100] = {
    let mut g = [0.0; 100];
    let mut i = 0;
    while i < 100 {
        g[i] = (i + 1) as f64 / 100.0;
        i += 1;
    }
    g
};

const LAMBDA_POINTS: usize = 100;
const LAMBDA_FLOOR: f64 = 1e-4;
/// `λ_max` is undefined at `α = 0`; ridge grids borrow this `α`.
const RIDGE_ALPHA_FOR_GRID: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnetConfig {
    pub alpha: f64,
    pub lambda: f64,
    /// Convergence threshold on the largest coefficient change (standardized scale).
    pub tol: f64,
    /// Maximum number of full or active-set sweeps.
    pub max_iter: usize,
}

impl EnetConfig {
    pub fn new(alpha: f64, lambda: f64) -> Self {
        EnetConfig {
            alpha,
            lambda,
            tol: 1e-10,
            max_iter: 100_000,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) || !(self.lambda >= 0.0) {
            return Err(Error::invalid(format!(
                "alpha {} must be in [0,1] and lambda {} >= 0",
                self.alpha, self.lambda
            )));
        }
        Ok(())
    }
}

struct Standardized {
    z: DMatrix<f64>,
    y: Vec<f64>,
    means: Vec<f64>,
    sds: Vec<f64>,
    ybar: f64,
    /// Columns with non-zero variance.
    live: Vec<bool>,
}

fn standardize(z: &DMatrix<f64>, y: &[f64]) -> Result<Standardized> {
    if z.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite input to elastic net"));
    }
    if z.nrows() != y.len() || y.is_empty() {
        return Err(Error::Dimension(format!("design has {} rows, target {}", z.nrows(), y.len())));
    }
    let n = y.len() as f64;
    let ybar = y.iter().sum::<f64>() / n;
    let mut zs = z.clone();
    let mut means = Vec::with_capacity(z.ncols());
    let mut sds = Vec::with_capacity(z.ncols());
    let mut live = Vec::with_capacity(z.ncols());
    for mut col in zs.column_iter_mut() {
        let m = col.mean();
        let sd = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
        let ok = sd > 1e-12 * m.abs().max(1.0);
        let s = if ok { sd } else { 1.0 };
        col.apply(|v| *v = if ok { (*v - m) / s } else { 0.0 });
        means.push(m);
        sds.push(s);
        live.push(ok);
    }
    Ok(Standardized {
        z: zs,
        y: y.iter().map(|v| v - ybar).collect(),
        means,
        sds,
        ybar,
        live,
    })
}

struct Gram {
    g: DMatrix<f64>,
    c: Vec<f64>,
    live: Vec<bool>,
}

impl Gram {
    fn new(s: &Standardized) -> Self {
        let n = s.y.len() as f64;
        let g = s.z.transpose() * &s.z / n;
        let c = (s.z.transpose() * DVector::from_column_slice(&s.y) / n)
            .iter()
            .copied()
            .collect();
        Gram {
            g,
            c,
            live: s.live.clone(),
        }
    }

    /// Mean squared residual of `beta` given the centered target's mean square.
    fn rss(&self, beta: &[f64], yy: f64) -> f64 {
        let b = DVector::from_column_slice(beta);
        let quad = (b.transpose() * &self.g * &b)[(0, 0)];
        yy - 2.0 * self.c.iter().zip(beta).map(|(c, b)| c * b).sum::<f64>() + quad
    }

    fn lambda_max(&self, alpha: f64) -> f64 {
        let a = if alpha > 0.0 { alpha } else { RIDGE_ALPHA_FOR_GRID };
        self.c.iter().fold(0.0f64, |m, v| m.max(v.abs())) / a
    }
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// How a sweep's coefficient updates are compared with the tolerance.
#[derive(Clone, Copy)]
enum Stop {
    /// Largest absolute change.
    MaxChange,
    /// Largest `G_jj δ²`, the loss decrease scale used for path tuning.
    Weighted,
}

/// Coordinate descent from the warm start in `beta`.
fn cd_solve(gram: &Gram, alpha: f64, lambda: f64, beta: &mut [f64], tol: f64, max_iter: usize, stop: Stop) -> Result<usize> {
    let p = beta.len();
    let l1 = lambda * alpha;
    let l2 = lambda * (1.0 - alpha);
    let mut grad: Vec<f64> = gram.c.clone();
    for k in 0..p {
        if beta[k] != 0.0 {
            for j in 0..p {
                grad[j] -= gram.g[(j, k)] * beta[k];
            }
        }
    }
    let update = |j: usize, beta: &mut [f64], grad: &mut [f64]| -> f64 {
        if !gram.live[j] {
            return 0.0;
        }
        let gjj = gram.g[(j, j)];
        let rho = grad[j] + gjj * beta[j];
        let new = soft_threshold(rho, l1) / (gjj + l2);
        let delta = new - beta[j];
        if delta != 0.0 {
            beta[j] = new;
            let col = gram.g.column(j);
            for (gk, gjk) in grad.iter_mut().zip(col.iter()) {
                *gk -= gjk * delta;
            }
        }
        match stop {
            Stop::MaxChange => delta.abs(),
            Stop::Weighted => gjj * delta * delta,
        }
    };
    let mut sweeps = 0;
    loop {
        let mut max_delta: f64 = 0.0;
        for j in 0..p {
            max_delta = max_delta.max(update(j, beta, &mut grad));
        }
        sweeps += 1;
        if max_delta < tol {
            return Ok(sweeps);
        }
        if sweeps >= max_iter {
            return Err(Error::NonConvergence {
                iterations: sweeps,
                gap: max_delta,
            });
        }
        // iterate on the active set until it settles, then re-check all
        let active: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
        loop {
            let mut inner: f64 = 0.0;
            for &j in &active {
                inner = inner.max(update(j, beta, &mut grad));
            }
            sweeps += 1;
            if inner < tol {
                break;
            }
            if sweeps >= max_iter {
                return Err(Error::NonConvergence {
                    iterations: sweeps,
                    gap: inner,
                });
            }
        }
    }
}

fn ridge_solve(gram: &Gram, lambda: f64) -> Result<Vec<f64>> {
    let p = gram.c.len();
    let mut a = gram.g.clone();
    for j in 0..p {
        a[(j, j)] += if gram.live[j] { lambda } else { 1.0 };
    }
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Solver("ridge system not positive definite".into()))?;
    Ok(chol.solve(&DVector::from_column_slice(&gram.c)).iter().copied().collect())
}

fn to_fit(s: &Standardized, beta: &[f64], names: &[String]) -> LinearFit {
    let coef: Vec<f64> = beta.iter().zip(&s.sds).map(|(b, sd)| b / sd).collect();
    let intercept = s.ybar - coef.iter().zip(&s.means).map(|(b, m)| b * m).sum::<f64>();
    LinearFit {
        intercept,
        coef,
        column_names: names.to_vec(),
        scaling: Some(Scaling {
            means: s.means.clone(),
            sds: s.sds.clone(),
        }),
    }
}

/// Fit the elastic net at a single `(α, λ)`. `α = 0` is solved in closed form.
pub fn enet_cd(z: &DMatrix<f64>, y: &[f64], names: &[String], cfg: &EnetConfig) -> Result<LinearFit> {
    cfg.validate()?;
    if names.len() != z.ncols() {
        return Err(Error::Dimension("column names".into()));
    }
    let s = standardize(z, y)?;
    let gram = Gram::new(&s);
    let beta = if cfg.alpha == 0.0 {
        ridge_solve(&gram, cfg.lambda)?
    } else {
        let mut beta = vec![0.0; z.ncols()];
        cd_solve(&gram, cfg.alpha, cfg.lambda, &mut beta, cfg.tol, cfg.max_iter, Stop::MaxChange)?;
        beta
    };
    Ok(to_fit(&s, &beta, names))
}

/// Closed-form ridge under the same scaling: `(z'z/T + λI)⁻¹ z'y/T`.
pub fn ridge_closed_form(z: &DMatrix<f64>, y: &[f64], names: &[String], lambda: f64) -> Result<LinearFit> {
    enet_cd(z, y, names, &EnetConfig::new(0.0, lambda))
}

/// `λ_max = max_j |z_j'y| / (T α)` for standardized `z` and centered `y`.
pub fn lambda_max(z_std: &DMatrix<f64>, y_centered: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::invalid("lambda_max is undefined for alpha = 0"));
    }
    let n = y_centered.len() as f64;
    let m = z_std
        .column_iter()
        .map(|c| c.iter().zip(y_centered).map(|(a, b)| a * b).sum::<f64>().abs())
        .fold(0.0, f64::max);
    Ok(m / (n * alpha))
}

/// [`lambda_max`] after the solver's own standardization.
pub fn lambda_max_raw(z: &DMatrix<f64>, y: &[f64], alpha: f64) -> Result<f64> {
    let s = standardize(z, y)?;
    lambda_max(&s.z, &s.y, alpha)
}

/// Largest violation of the elastic-net optimality conditions, on the
/// standardized scale.
pub fn kkt_residual(z: &DMatrix<f64>, y: &[f64], cfg: &EnetConfig, fit: &LinearFit) -> Result<f64> {
    let s = standardize(z, y)?;
    let n = y.len() as f64;
    let pred = fit.predict(z);
    let r: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
    let beta: Vec<f64> = fit.coef.iter().zip(&s.sds).map(|(b, sd)| b * sd).collect();
    let l1 = cfg.lambda * cfg.alpha;
    let l2 = cfg.lambda * (1.0 - cfg.alpha);
    let mut worst: f64 = r.iter().sum::<f64>().abs() / n;
    for j in 0..beta.len() {
        if !s.live[j] {
            continue;
        }
        let g = s.z.column(j).iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / n - l2 * beta[j];
        let v = if beta[j] != 0.0 {
            (g - l1 * beta[j].signum()).abs()
        } else {
            (g.abs() - l1).max(0.0)
        };
        worst = worst.max(v);
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize)]
pub struct EnetTuning {
    pub config: EnetConfig,
    pub cv_mse: f64,
}

fn lambda_grid(lmax: f64) -> Vec<f64> {
    let lo = (lmax * LAMBDA_FLOOR).ln();
    let hi = lmax.ln();
    (0..LAMBDA_POINTS)
        .map(|i| (hi + (lo - hi) * i as f64 / (LAMBDA_POINTS - 1) as f64).exp())
        .collect()
}

/// K-fold grid search over `alphas` x a 100-point log grid on
/// `[λ_max·1e-4, λ_max]` per `α`. Ties go to larger `λ`, then larger `α`.
pub fn enet_tune(z: &DMatrix<f64>, y: &[f64], alphas: &[f64], folds: usize, seed: u64) -> Result<EnetTuning> {
    let n = y.len();
    if alphas.is_empty() {
        return Err(Error::invalid("empty alpha grid"));
    }
    let assignment = kfold_split(n, folds, seed)?;
    let full = Gram::new(&standardize(z, y)?);
    let grids: Vec<Vec<f64>> = alphas
        .iter()
        .map(|&a| {
            let lmax = full.lambda_max(a);
            if lmax > 0.0 {
                lambda_grid(lmax)
            } else {
                vec![0.0]
            }
        })
        .collect();

    let fold_data: Vec<(Standardized, Gram, DMatrix<f64>, Vec<f64>)> = (0..folds)
        .map(|f| {
            let train: Vec<usize> = (0..n).filter(|&i| assignment[i] != f).collect();
            let test: Vec<usize> = (0..n).filter(|&i| assignment[i] == f).collect();
            if train.len() < 2 || test.is_empty() {
                return Err(Error::invalid("degenerate folds"));
            }
            let s = standardize(&select_rows(z, &train), &select_entries(y, &train))?;
            let g = Gram::new(&s);
            Ok((s, g, select_rows(z, &test), select_entries(y, &test)))
        })
        .collect::<Result<_>>()?;

    let sse: Vec<Vec<f64>> = alphas
        .par_iter()
        .zip(grids.par_iter())
        .map(|(&alpha, grid)| {
            let mut acc = vec![0.0; grid.len()];
            for (s, gram, zt, yt) in &fold_data {
                let ridge_eig = (alpha == 0.0).then(|| sym_eigen_desc(gram.g.clone()));
                let mut beta = vec![0.0; z.ncols()];
                let tss = s.y.iter().map(|v| v * v).sum::<f64>() / s.y.len() as f64;
                let mut saturated = false;
                let mut prev_r2 = 0.0;
                for (li, &lambda) in grid.iter().enumerate() {
                    if let Some((vals, vecs)) = &ridge_eig {
                        let vc = vecs.transpose() * DVector::from_column_slice(&gram.c);
                        let w = DVector::from_iterator(
                            vals.len(),
                            vals.iter().zip(vc.iter()).map(|(d, c)| c / (d.max(0.0) + lambda)),
                        );
                        beta = (vecs * w).iter().copied().collect();
                        for (j, b) in beta.iter_mut().enumerate() {
                            if !gram.live[j] {
                                *b = 0.0;
                            }
                        }
                    } else if !saturated {
                        if let Err(e) = cd_solve(gram, alpha, lambda, &mut beta, 1e-7 * tss.max(f64::MIN_POSITIVE), 1_000, Stop::Weighted) {
                            log::debug!("tuning fit at alpha={alpha} lambda={lambda}: {e}");
                        }
                        // the rest of the path barely moves once the training fit saturates
                        // or stops improving
                        let r2 = if tss > 0.0 { 1.0 - gram.rss(&beta, tss) / tss } else { 1.0 };
                        saturated = r2 > 0.999 || (li >= 5 && r2 - prev_r2 < 1e-5 * r2.abs());
                        prev_r2 = r2;
                    }
                    let fit = to_fit(s, &beta, &[]);
                    acc[li] += fit
                        .predict(zt)
                        .iter()
                        .zip(yt)
                        .map(|(p, o)| (p - o) * (p - o))
                        .sum::<f64>();
                }
            }
            acc
        })
        .collect();

    let mut best: Option<(f64, f64, f64)> = None;
    for (ai, &alpha) in alphas.iter().enumerate() {
        for (li, &lambda) in grids[ai].iter().enumerate() {
            let mse = sse[ai][li] / n as f64;
            let better = match best {
                None => true,
                Some((bm, bl, ba)) => {
                    mse < bm || (mse == bm && (lambda > bl || (lambda == bl && alpha > ba)))
                }
            };
            if better {
                best = Some((mse, lambda, alpha));
            }
        }
    }
    let (cv_mse, lambda, alpha) = best.expect("non-empty grid");
    Ok(EnetTuning {
        config: EnetConfig::new(alpha, lambda),
        cv_mse,
    })
}
