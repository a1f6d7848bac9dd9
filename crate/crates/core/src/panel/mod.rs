//! Monthly macro panels: loading, transforms, standardization, EM balancing.

mod em;
mod io;
mod synth;
mod transform;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::date::YearMonth;
use crate::error::{Error, Result};

pub use em::{balance_panel_em, BalanceReport, EmOptions};
pub use io::{load_manifest, load_panel, write_manifest_csv, write_panel_csv};
pub use synth::{synth_ar_factor_panel, synth_dgp, synth_raw_panel};
pub use transform::{apply_transform, transform_panel, TransformCode};

/// Per-series metadata from the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub id: String,
    /// Thematic group, 1 to 9.
    pub group: u8,
    pub tcode: TransformCode,
    pub start_date: YearMonth,
    pub source: String,
    /// Last usable date; `None` means "last observed value".
    #[serde(default)]
    pub end_date: Option<YearMonth>,
}

/// Date-indexed `T x N` panel with an observation mask.
///
/// Missing cells hold `NaN` and have `mask == false`.
#[derive(Clone, Debug, PartialEq)]
pub struct Panel {
    pub dates: Vec<YearMonth>,
    pub values: DMatrix<f64>,
    pub mask: DMatrix<bool>,
    pub meta: Vec<SeriesMeta>,
}

impl Panel {
    /// Build a panel, deriving the mask from finiteness and checking the date index.
    pub fn new(dates: Vec<YearMonth>, values: DMatrix<f64>, meta: Vec<SeriesMeta>) -> Result<Self> {
        if values.nrows() != dates.len() || values.ncols() != meta.len() {
            return Err(Error::Dimension(format!(
                "values {}x{} vs {} dates and {} series",
                values.nrows(),
                values.ncols(),
                dates.len(),
                meta.len()
            )));
        }
        if meta.is_empty() || dates.len() < 2 {
            return Err(Error::invalid("panel needs N >= 1 and T >= 2"));
        }
        check_dates(&dates)?;
        let mask = values.map(|v| v.is_finite());
        let values = values.map(|v| if v.is_finite() { v } else { f64::NAN });
        Ok(Panel {
            dates,
            values,
            mask,
            meta,
        })
    }

    pub fn n_periods(&self) -> usize {
        self.dates.len()
    }

    pub fn n_series(&self) -> usize {
        self.meta.len()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.meta.iter().map(|m| m.id.as_str()).collect()
    }

    pub fn column_index(&self, id: &str) -> Option<usize> {
        self.meta.iter().position(|m| m.id == id)
    }

    pub fn is_balanced(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn date_index(&self, d: YearMonth) -> Option<usize> {
        let off = d.months_since(*self.dates.first()?);
        (off >= 0 && (off as usize) < self.dates.len()).then_some(off as usize)
    }

    /// Rows `0..=last` as a new panel.
    pub fn head(&self, last: usize) -> Panel {
        let rows = last + 1;
        Panel {
            dates: self.dates[..rows].to_vec(),
            values: self.values.rows(0, rows).into_owned(),
            mask: self.mask.rows(0, rows).into_owned(),
            meta: self.meta.clone(),
        }
    }

    /// Rows `first..` as a new panel.
    pub fn tail_from(&self, first: usize) -> Panel {
        let rows = self.dates.len() - first;
        Panel {
            dates: self.dates[first..].to_vec(),
            values: self.values.rows(first, rows).into_owned(),
            mask: self.mask.rows(first, rows).into_owned(),
            meta: self.meta.clone(),
        }
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j).iter().copied().collect()
    }
}

pub(crate) fn check_dates(dates: &[YearMonth]) -> Result<()> {
    for w in dates.windows(2) {
        if w[1] == w[0] {
            return Err(Error::DuplicateDate(w[1].to_string()));
        }
        if w[1] != w[0].succ() {
            return Err(Error::NonConsecutive {
                prev: w[0].to_string(),
                next: w[1].to_string(),
            });
        }
    }
    Ok(())
}

/// Standardize each series over its observed entries (sample standard deviation).
pub fn standardize(p: &Panel) -> Result<(Panel, Vec<f64>, Vec<f64>)> {
    let n = p.n_series();
    let mut means = Vec::with_capacity(n);
    let mut stds = Vec::with_capacity(n);
    let mut out = p.clone();
    for j in 0..n {
        let obs: Vec<f64> = (0..p.n_periods())
            .filter(|&t| p.mask[(t, j)])
            .map(|t| p.values[(t, j)])
            .collect();
        if obs.len() < 2 {
            return Err(Error::ZeroVariance(p.meta[j].id.clone()));
        }
        let m = obs.iter().sum::<f64>() / obs.len() as f64;
        let var = obs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (obs.len() - 1) as f64;
        let sd = var.sqrt();
        if !(sd > 0.0) || sd <= 1e-14 * m.abs().max(1.0) {
            return Err(Error::ZeroVariance(p.meta[j].id.clone()));
        }
        for t in 0..p.n_periods() {
            if p.mask[(t, j)] {
                out.values[(t, j)] = (p.values[(t, j)] - m) / sd;
            }
        }
        means.push(m);
        stds.push(sd);
    }
    Ok((out, means, stds))
}

/// Inverse of [`standardize`].
pub fn unstandardize(p: &Panel, means: &[f64], stds: &[f64]) -> Panel {
    let mut out = p.clone();
    for j in 0..p.n_series() {
        for t in 0..p.n_periods() {
            if p.mask[(t, j)] {
                out.values[(t, j)] = p.values[(t, j)] * stds[j] + means[j];
            }
        }
    }
    out
}

#[cfg(test)]
pub(crate) fn test_meta(n: usize) -> Vec<SeriesMeta> {
    (0..n)
        .map(|i| SeriesMeta {
            id: format!("S{i}"),
            group: (i % 9 + 1) as u8,
            tcode: TransformCode::Level,
            start_date: "2000-01".parse().unwrap(),
            source: "test".into(),
            end_date: None,
        })
        .collect()
}

#[cfg(test)]
pub(crate) fn test_dates(t: usize) -> Vec<YearMonth> {
    let d0: YearMonth = "2000-01".parse().unwrap();
    (0..t).map(|i| d0.add_months(i as i32)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_col(v: &[f64]) -> Panel {
        Panel::new(
            test_dates(v.len()),
            DMatrix::from_column_slice(v.len(), 1, v),
            test_meta(1),
        )
        .unwrap()
    }

    #[test]
    fn standardize_simple_column() {
        let (s, m, sd) = standardize(&one_col(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(m, vec![2.0]);
        assert_eq!(sd, vec![1.0]);
        assert_eq!(s.column(0), vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn standardize_constant_column_errors() {
        let err = standardize(&one_col(&[5.0, 5.0, 5.0])).unwrap_err();
        assert!(err.to_string().contains("zero variance"), "{err}");
        assert!(err.to_string().contains("S0"));
    }

    #[test]
    fn standardize_round_trip() {
        let vals = DMatrix::from_fn(40, 3, |t, j| {
            ((t * 7 + j * 13) % 11) as f64 * 1.7 - 3.0 + (j as f64) * 100.0
        });
        let mut vals = vals;
        vals[(3, 1)] = f64::NAN;
        let p = Panel::new(test_dates(40), vals, test_meta(3)).unwrap();
        let (s, m, sd) = standardize(&p).unwrap();
        let back = unstandardize(&s, &m, &sd);
        for t in 0..40 {
            for j in 0..3 {
                if p.mask[(t, j)] {
                    assert!((back.values[(t, j)] - p.values[(t, j)]).abs() < 1e-12);
                } else {
                    assert!(back.values[(t, j)].is_nan());
                }
            }
        }
    }

    #[test]
    fn standardized_moments_over_observed_only() {
        let mut vals = DMatrix::from_fn(25, 2, |t, j| (t as f64).sin() * (j + 1) as f64 + 4.0);
        vals[(0, 0)] = f64::NAN;
        vals[(10, 1)] = f64::NAN;
        let p = Panel::new(test_dates(25), vals, test_meta(2)).unwrap();
        let (s, _, _) = standardize(&p).unwrap();
        for j in 0..2 {
            let obs: Vec<f64> = (0..25).filter(|&t| s.mask[(t, j)]).map(|t| s.values[(t, j)]).collect();
            let m = obs.iter().sum::<f64>() / obs.len() as f64;
            let v = obs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (obs.len() - 1) as f64;
            assert!(m.abs() < 1e-12);
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn date_index_and_head() {
        let p = one_col(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(p.date_index("2000-03".parse().unwrap()), Some(2));
        assert_eq!(p.date_index("1999-12".parse().unwrap()), None);
        assert_eq!(p.head(1).n_periods(), 2);
        assert_eq!(p.tail_from(1).dates[0].to_string(), "2000-02");
    }
}
