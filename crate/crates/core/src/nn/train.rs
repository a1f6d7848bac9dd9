//! Adam training with early stopping, tuning and ensembling.

use std::io::Write;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use crate::error::{Error, Result};
use crate::eval::cv::kfold_split;
use crate::linalg::{column_moments, scale_columns, select_entries, select_rows};
use crate::rng::{child_rng, derive_seed};

pub const LR_GRID: [f64; 2] = [0.001, 0.01];
pub const L1_GRID: [f64; 2] = [0.001, 0.0001];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub layers: Vec<usize>,
    pub epochs_max: usize,
    pub batch: usize,
    pub lr: f64,
    pub l1: f64,
    pub patience: usize,
    pub ensemble: usize,
    /// Trailing share of rows held out for early stopping.
    pub val_frac: f64,
    pub adam: Adam,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            layers: vec![32, 16],
            epochs_max: 100,
            batch: 32,
            lr: 0.001,
            l1: 0.0001,
            patience: 20,
            ensemble: 5,
            val_frac: 0.15,
            adam: Adam::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MlpModel {
    pub net: Mlp,
    pub trace: Vec<EpochTrace>,
    /// Epoch (1-based) whose weights were restored.
    pub best_epoch: usize,
}

fn mse(net: &Mlp, z: &DMatrix<f64>, y: &[f64], rows: &[usize]) -> f64 {
    let mut x = vec![0.0; z.ncols()];
    rows.iter()
        .map(|&i| {
            for (j, v) in x.iter_mut().enumerate() {
                *v = z[(i, j)];
            }
            (net.predict_row(&x) - y[i]).powi(2)
        })
        .sum::<f64>()
        / rows.len() as f64
}

/// Train on the leading rows, stop early on the trailing `val_frac` share.
/// Inputs are used as given.
pub fn mlp_train(z: &DMatrix<f64>, y: &[f64], cfg: &MlpConfig) -> Result<MlpModel> {
    let n = y.len();
    if z.nrows() != n {
        return Err(Error::Dimension(format!("design has {} rows, target {n}", z.nrows())));
    }
    if n <= cfg.batch.max(1) || cfg.epochs_max == 0 {
        return Err(Error::TooShort { needed: cfg.batch + 1, got: n });
    }
    if z.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite training data"));
    }
    let n_val = ((n as f64 * cfg.val_frac).round() as usize).clamp(1, n - 1);
    let train: Vec<usize> = (0..n - n_val).collect();
    let val: Vec<usize> = (n - n_val..n).collect();

    let mut rng = child_rng(cfg.seed, &[]);
    let mut net = Mlp::new(z.ncols(), &cfg.layers, &mut rng);
    let n_par = net.params.len();
    let (mut m, mut v) = (vec![0.0; n_par], vec![0.0; n_par]);
    let mut step = 0i32;
    let mut best = (f64::INFINITY, net.params.clone(), 0usize);
    let mut trace = Vec::new();
    let mut order = train.clone();
    let Adam { beta1, beta2, epsilon } = cfg.adam;

    for epoch in 1..=cfg.epochs_max {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch.max(1)) {
            let (_, g) = net.loss_and_grad(z, y, batch, cfg.l1);
            step += 1;
            let alpha = cfg.lr * (1.0 - beta2.powi(step)).sqrt() / (1.0 - beta1.powi(step));
            for k in 0..n_par {
                m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
                v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
                net.params[k] -= alpha * m[k] / (v[k].sqrt() + epsilon);
            }
        }
        let train_mse = mse(&net, z, y, &train);
        let val_mse = mse(&net, z, y, &val);
        if !train_mse.is_finite() || !val_mse.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        trace.push(EpochTrace { epoch, train_mse, val_mse });
        if val_mse < best.0 {
            best = (val_mse, net.params.clone(), epoch);
        } else if epoch - best.2 >= cfg.patience {
            break;
        }
    }
    net.params = best.1;
    Ok(MlpModel {
        net,
        trace,
        best_epoch: best.2,
    })
}

/// Training traces as CSV `member,epoch,train_mse,val_mse`.
pub fn write_trace_csv<W: Write>(models: &[MlpModel], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["member", "epoch", "train_mse", "val_mse"])?;
    for (k, m) in models.iter().enumerate() {
        for e in &m.trace {
            w.write_record([k.to_string(), e.epoch.to_string(), e.train_mse.to_string(), e.val_mse.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct NnForecast {
    pub predictions: Vec<f64>,
    pub lr: f64,
    pub l1: f64,
    pub cv_mse: Option<f64>,
    pub members: Vec<MlpModel>,
}

/// Tuning grid and ensemble seeds for [`nn_forecast`].
#[derive(Clone, Debug, Default)]
pub struct NnPlan {
    /// `(lr, l1)` pairs; empty means the full grid.
    pub grid: Vec<(f64, f64)>,
    pub folds: Option<usize>,
    /// Explicit member seeds; `None` derives `cfg.ensemble` seeds from `cfg.seed`.
    pub member_seeds: Option<Vec<u64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NnTuning {
    pub lr: f64,
    pub l1: f64,
    pub cv_mse: Option<f64>,
}

fn standardized(z: &DMatrix<f64>, y: &[f64]) -> (Vec<f64>, Vec<f64>, DMatrix<f64>, f64, Vec<f64>) {
    let (means, sds) = column_moments(z);
    let sds: Vec<f64> = sds.into_iter().map(|s| if s > 0.0 { s } else { 1.0 }).collect();
    let zs = scale_columns(z, &means, &sds);
    let ybar = y.iter().sum::<f64>() / y.len().max(1) as f64;
    let yc: Vec<f64> = y.iter().map(|v| v - ybar).collect();
    (means, sds, zs, ybar, yc)
}

/// Pick `(lr, l1)` by K-fold CV on standardized inputs and a centered
/// target. Ties go to the larger `l1`, then the smaller `lr`.
pub fn nn_tune(z: &DMatrix<f64>, y: &[f64], cfg: &MlpConfig, plan: &NnPlan) -> Result<NnTuning> {
    let (_, _, zs, _, yc) = standardized(z, y);
    tune_scaled(&zs, &yc, cfg, plan)
}

fn tune_scaled(zs: &DMatrix<f64>, yc: &[f64], cfg: &MlpConfig, plan: &NnPlan) -> Result<NnTuning> {
    let grid: Vec<(f64, f64)> = if plan.grid.is_empty() {
        LR_GRID.iter().flat_map(|&lr| L1_GRID.iter().map(move |&l1| (lr, l1))).collect()
    } else {
        plan.grid.clone()
    };
    if grid.len() == 1 {
        return Ok(NnTuning { lr: grid[0].0, l1: grid[0].1, cv_mse: None });
    }
    let folds = plan.folds.unwrap_or(5);
    let assignment = kfold_split(yc.len(), folds, derive_seed(cfg.seed, &[0xc5]))?;
    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..folds).map(move |f| (g, f))).collect();
    let sse: Vec<f64> = jobs
        .par_iter()
        .map(|&(g, f)| -> Result<f64> {
            let train: Vec<usize> = (0..yc.len()).filter(|&i| assignment[i] != f).collect();
            let test: Vec<usize> = (0..yc.len()).filter(|&i| assignment[i] == f).collect();
            let c = MlpConfig {
                lr: grid[g].0,
                l1: grid[g].1,
                seed: derive_seed(cfg.seed, &[0xc5, f as u64]),
                ..cfg.clone()
            };
            let model = mlp_train(&select_rows(zs, &train), &select_entries(yc, &train), &c)?;
            let pred = model.net.predict(&select_rows(zs, &test));
            Ok(pred.iter().zip(&test).map(|(p, &i)| (p - yc[i]).powi(2)).sum())
        })
        .collect::<Result<_>>()?;
    let mut best: Option<(f64, f64, f64)> = None;
    for (g, &(lr, l1)) in grid.iter().enumerate() {
        let m = sse[g * folds..(g + 1) * folds].iter().sum::<f64>() / yc.len() as f64;
        let better = best.is_none_or(|(bm, blr, bl1)| m < bm || (m == bm && (l1 > bl1 || (l1 == bl1 && lr < blr))));
        if better {
            best = Some((m, lr, l1));
        }
    }
    let (m, lr, l1) = best.expect("non-empty grid");
    Ok(NnTuning { lr, l1, cv_mse: Some(m) })
}

/// Standardize inputs, center the target, tune `(lr, l1)` as in [`nn_tune`]
/// and average an ensemble trained on all rows.
pub fn nn_forecast(z: &DMatrix<f64>, y: &[f64], z_next: &DMatrix<f64>, cfg: &MlpConfig, plan: &NnPlan) -> Result<NnForecast> {
    if z_next.ncols() != z.ncols() {
        return Err(Error::Dimension("forecast rows differ in width from training".into()));
    }
    let (means, sds, zs, ybar, yc) = standardized(z, y);
    let zn = scale_columns(z_next, &means, &sds);
    let NnTuning { lr, l1, cv_mse } = tune_scaled(&zs, &yc, cfg, plan)?;

    let seeds = plan
        .member_seeds
        .clone()
        .unwrap_or_else(|| (0..cfg.ensemble.max(1)).map(|k| derive_seed(cfg.seed, &[0xe5, k as u64])).collect());
    let members: Vec<MlpModel> = seeds
        .par_iter()
        .map(|&s| mlp_train(&zs, &yc, &MlpConfig { lr, l1, seed: s, ..cfg.clone() }))
        .collect::<Result<_>>()?;
    let mut predictions = vec![0.0; z_next.nrows()];
    for m in &members {
        for (p, v) in predictions.iter_mut().zip(m.net.predict(&zn)) {
            *p += v;
        }
    }
    for p in &mut predictions {
        *p = *p / members.len() as f64 + ybar;
    }
    Ok(NnForecast {
        predictions,
        lr,
        l1,
        cv_mse,
        members,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rng_from, std_normal};

    fn linear(n: usize, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
        let mut rng = rng_from(seed);
        let z = DMatrix::from_fn(n, 1, |_, _| std_normal(&mut rng));
        let y = (0..n).map(|i| 2.0 * z[(i, 0)] + 0.1 * std_normal(&mut rng)).collect();
        (z, y)
    }

    #[test]
    fn learns_a_line() {
        let (z, y) = linear(400, 1);
        let cfg = MlpConfig { lr: 0.01, l1: 0.0, ..Default::default() };
        let m = mlp_train(&z, &y, &cfg).unwrap();
        let best = m.trace[m.best_epoch - 1];
        assert!(best.train_mse < 0.01 * 1.5, "{best:?}");
        assert!(m.trace[m.best_epoch..].iter().all(|e| e.val_mse >= best.val_mse));
        assert!(m.trace.len() <= 100);
    }

    #[test]
    fn same_seed_same_trace() {
        let (z, y) = linear(100, 2);
        let cfg = MlpConfig { epochs_max: 10, ..Default::default() };
        let a = mlp_train(&z, &y, &cfg).unwrap();
        let b = mlp_train(&z, &y, &cfg).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.net, b.net);
    }

    #[test]
    fn huge_penalty_predicts_the_mean() {
        let (z, y) = linear(200, 3);
        let plan = NnPlan { grid: vec![(0.01, 10.0)], member_seeds: Some(vec![1]), ..Default::default() };
        let f = nn_forecast(&z, &y, &z, &MlpConfig::default(), &plan).unwrap();
        let mean = y.iter().sum::<f64>() / 200.0;
        let spread = f.predictions.iter().map(|p| (p - mean).abs()).fold(0.0, f64::max);
        assert!(spread < 0.1, "{spread}");
    }

    #[test]
    fn identical_member_seeds_match_one_member() {
        let (z, y) = linear(80, 4);
        let cfg = MlpConfig { epochs_max: 5, ..Default::default() };
        let one = NnPlan { grid: vec![(0.01, 0.001)], member_seeds: Some(vec![7]), ..Default::default() };
        let three = NnPlan { member_seeds: Some(vec![7, 7, 7]), ..one.clone() };
        let a = nn_forecast(&z, &y, &z, &cfg, &one).unwrap().predictions;
        let b = nn_forecast(&z, &y, &z, &cfg, &three).unwrap().predictions;
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_target_is_reproduced() {
        let (z, _) = linear(120, 5);
        let y = vec![3.25; 120];
        let f = nn_forecast(&z, &y, &z, &MlpConfig::default(), &NnPlan::default()).unwrap();
        let dev: Vec<f64> = f.predictions.iter().map(|p| (p - 3.25).abs()).collect();
        assert!(dev.iter().sum::<f64>() / 120.0 < 1e-3);
        assert!(dev.iter().all(|d| *d < 5e-3), "{dev:?}");
    }

    #[test]
    fn tuned_forecast_is_deterministic() {
        let (z, y) = linear(80, 6);
        let cfg = MlpConfig { epochs_max: 5, ensemble: 2, ..Default::default() };
        let a = nn_forecast(&z, &y, &z, &cfg, &NnPlan::default()).unwrap();
        let b = nn_forecast(&z, &y, &z, &cfg, &NnPlan::default()).unwrap();
        assert_eq!(a.predictions, b.predictions);
        assert!(LR_GRID.contains(&a.lr) && L1_GRID.contains(&a.l1));
        let mut out = Vec::new();
        write_trace_csv(&a.members, &mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().starts_with("member,epoch,train_mse,val_mse\n0,1,"));
    }

    #[test]
    fn too_few_rows() {
        let (z, y) = linear(20, 7);
        assert!(matches!(mlp_train(&z, &y, &MlpConfig::default()), Err(Error::TooShort { .. })));
    }
}
