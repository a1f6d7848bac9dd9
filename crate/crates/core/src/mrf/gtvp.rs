//! Generalized time-varying parameter paths.

use std::io::Write;

use nalgebra::DMatrix;
use serde::Serialize;

use super::forest::MrfModel;
use crate::date::YearMonth;
use crate::error::{Error, Result};

/// Ensemble mean and quantile bands of one coefficient over dates.
#[derive(Clone, Debug, Serialize)]
pub struct Band {
    pub mean: Vec<f64>,
    pub lo68: Vec<f64>,
    pub hi68: Vec<f64>,
    pub lo90: Vec<f64>,
    pub hi90: Vec<f64>,
}

impl Band {
    fn from_draws(draws: &[Vec<f64>]) -> Band {
        let mut band = Band {
            mean: vec![],
            lo68: vec![],
            hi68: vec![],
            lo90: vec![],
            hi90: vec![],
        };
        for row in draws {
            let mut v = row.clone();
            v.sort_by(f64::total_cmp);
            band.mean.push(v.iter().sum::<f64>() / v.len() as f64);
            band.lo90.push(quantile(&v, 0.05));
            band.lo68.push(quantile(&v, 0.16));
            band.hi68.push(quantile(&v, 0.84));
            band.hi90.push(quantile(&v, 0.95));
        }
        band
    }
}

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Clone, Debug, Serialize)]
pub struct GtvpPath {
    /// `(intercept)` followed by the linear-part names.
    pub coef_names: Vec<String>,
    pub coefs: Vec<Band>,
    /// Sum of the autoregressive coefficients, when any are flagged.
    pub persistence: Option<Band>,
    /// Mean intercept over one minus mean persistence; `NaN` where flagged.
    pub long_run_mean: Option<Vec<f64>>,
    /// Dates where persistence is within 0.05 of one.
    pub long_run_undefined: Vec<bool>,
}

/// Collect `β_t` across trees at each row of `s`. `ar_coefs` lists positions
/// within the linear part holding lags of the target.
pub fn gtvp_extract(model: &MrfModel, s: &DMatrix<f64>, ar_coefs: &[usize]) -> Result<GtvpPath> {
    if s.ncols() != model.n_state {
        return Err(Error::Dimension("state shape differs from training".into()));
    }
    let d = model.config.dim();
    if ar_coefs.iter().any(|&k| k + 1 >= d) {
        return Err(Error::invalid("autoregressive coefficient index out of range"));
    }
    let t = s.nrows();
    let mut draws = vec![vec![Vec::with_capacity(model.trees.len()); t]; d];
    let mut pers = vec![Vec::with_capacity(model.trees.len()); t];
    for i in 0..t {
        for tree in &model.trees {
            let beta = tree.beta_at(s, i);
            for k in 0..d {
                draws[k][i].push(beta[k]);
            }
            pers[i].push(ar_coefs.iter().map(|&k| beta[k + 1]).sum());
        }
    }
    let coefs: Vec<Band> = draws.iter().map(|dr| Band::from_draws(dr)).collect();
    let mut coef_names = vec!["(intercept)".to_string()];
    coef_names.extend(model.config.linear_part.iter().cloned());
    let (persistence, long_run_mean, long_run_undefined) = if ar_coefs.is_empty() {
        (None, None, vec![false; t])
    } else {
        let p = Band::from_draws(&pers);
        let flags: Vec<bool> = p.mean.iter().map(|m| (1.0 - m).abs() < 0.05).collect();
        let lr = coefs[0]
            .mean
            .iter()
            .zip(&p.mean)
            .zip(&flags)
            .map(|((c, m), &f)| if f { f64::NAN } else { c / (1.0 - m) })
            .collect();
        (Some(p), Some(lr), flags)
    };
    Ok(GtvpPath {
        coef_names,
        coefs,
        persistence,
        long_run_mean,
        long_run_undefined,
    })
}

/// Long CSV `date,coefficient,mean,lo68,hi68,lo90,hi90`.
pub fn write_gtvp_csv<W: Write>(path: &GtvpPath, dates: &[YearMonth], writer: W) -> Result<()> {
    if path.coefs.first().is_some_and(|b| b.mean.len() != dates.len()) {
        return Err(Error::Dimension("one date per path row required".into()));
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["date", "coefficient", "mean", "lo68", "hi68", "lo90", "hi90"])?;
    let emit = |name: &str, b: &Band, w: &mut csv::Writer<W>| -> Result<()> {
        for (i, date) in dates.iter().enumerate() {
            w.write_record([
                date.to_string(),
                name.to_string(),
                b.mean[i].to_string(),
                b.lo68[i].to_string(),
                b.hi68[i].to_string(),
                b.lo90[i].to_string(),
                b.hi90[i].to_string(),
            ])?;
        }
        Ok(())
    };
    for (name, b) in path.coef_names.iter().zip(&path.coefs) {
        emit(name, b, &mut w)?;
    }
    if let Some(p) = &path.persistence {
        emit("persistence", p, &mut w)?;
    }
    if let Some(lr) = &path.long_run_mean {
        for (date, v) in dates.iter().zip(lr) {
            let cell = if v.is_nan() { "NA".to_string() } else { v.to_string() };
            w.write_record([date.to_string(), "long_run_mean".into(), cell, "".into(), "".into(), "".into(), "".into()])?;
        }
    }
    w.flush()?;
    Ok(())
}
