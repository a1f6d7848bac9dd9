//! Direct-forecast targets and per-model input sets.
//!
//! Lag convention: the block written `y_{t-{1:P}}` holds the `P` most recent
//! values known at origin `t`, i.e. `y_t, y_{t-1}, ..., y_{t-P+1}`. Column
//! `y_l0` is the current value. Every row at origin `t` is built from data
//! dated `<= t` only.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::date::YearMonth;
use crate::error::{Error, Result};

/// Average `h`-period change of a level series, indexed by origin.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetSeries {
    pub target_id: String,
    pub h: usize,
    pub use_log: bool,
    /// `values[t]` is `y^{(h)}_{t+h}`, defined iff the level is observed at
    /// both `t` and `t + h`.
    pub values: Vec<Option<f64>>,
}

/// `(1/h) ln(Y_{t+h}/Y_t)` when `use_log`, else `(1/h)(Y_{t+h} − Y_t)`.
/// Missing levels are `NaN`.
pub fn build_target(target_id: &str, levels: &[f64], h: usize, use_log: bool) -> Result<TargetSeries> {
    if h == 0 {
        return Err(Error::invalid("horizon must be at least 1"));
    }
    if h >= levels.len() {
        return Err(Error::TooShort {
            needed: h,
            got: levels.len(),
        });
    }
    if use_log {
        if let Some(row) = levels.iter().position(|v| v.is_finite() && *v <= 0.0) {
            return Err(Error::NonPositive {
                series: target_id.to_string(),
                row,
            });
        }
    }
    let hf = h as f64;
    let values = (0..levels.len())
        .map(|t| {
            let (a, b) = (levels[t], *levels.get(t + h)?);
            if !(a.is_finite() && b.is_finite()) {
                return None;
            }
            Some(if use_log { (b / a).ln() / hf } else { (b - a) / hf })
        })
        .collect();
    Ok(TargetSeries {
        target_id: target_id.to_string(),
        h,
        use_log,
        values,
    })
}

/// One-period change ending at `t` (the series whose lags enter `Z_t`);
/// `NaN` where undefined.
pub fn period_change(levels: &[f64], use_log: bool) -> Vec<f64> {
    (0..levels.len())
        .map(|t| {
            if t == 0 {
                return f64::NAN;
            }
            let (a, b) = (levels[t - 1], levels[t]);
            if !(a.is_finite() && b.is_finite()) || (use_log && (a <= 0.0 || b <= 0.0)) {
                f64::NAN
            } else if use_log {
                (b / a).ln()
            } else {
                b - a
            }
        })
        .collect()
}

/// Feature matrix whose rows are origins (time indices).
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    pub rows: Vec<usize>,
    pub names: Vec<String>,
    pub values: DMatrix<f64>,
}

impl DesignMatrix {
    pub fn ncols(&self) -> usize {
        self.names.len()
    }

    pub fn row_of(&self, t: usize) -> Option<usize> {
        self.rows.binary_search(&t).ok()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Debug dump: `date,<feature names...>`.
    pub fn write_csv<W: Write>(&self, dates: &[YearMonth], writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["date".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for (i, &t) in self.rows.iter().enumerate() {
            let mut rec = vec![dates.get(t).map(|d| d.to_string()).unwrap_or_else(|| t.to_string())];
            rec.extend(self.values.row(i).iter().map(|v| format!("{v}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn lag_names(names: &[String], p: usize) -> Vec<String> {
    names
        .iter()
        .flat_map(|n| (0..p).map(move |l| format!("{n}_l{l}")))
        .collect()
}

fn marx_names(names: &[String], p: usize) -> Vec<String> {
    names
        .iter()
        .flat_map(|n| (1..=p).map(move |q| format!("MARX_{n}_p{q}")))
        .collect()
}

/// Keep only the rows whose features are all finite.
fn finalize(rows: Vec<usize>, names: Vec<String>, data: Vec<Vec<f64>>) -> DesignMatrix {
    let keep: Vec<usize> = (0..rows.len())
        .filter(|&i| data[i].iter().all(|v| v.is_finite()))
        .collect();
    let ncols = names.len();
    let values = DMatrix::from_fn(keep.len(), ncols, |i, j| data[keep[i]][j]);
    DesignMatrix {
        rows: keep.iter().map(|&i| rows[i]).collect(),
        names,
        values,
    }
}

fn check_depth(p: usize, t: usize) -> Result<()> {
    if p == 0 {
        return Err(Error::invalid("lag depth must be at least 1"));
    }
    if p >= t {
        return Err(Error::invalid(format!("lag depth {p} must be below sample length {t}")));
    }
    Ok(())
}

/// Columns `x_t, x_{t-1}, ..., x_{t-P+1}` for each input column.
pub fn build_lags(x: &DMatrix<f64>, names: &[String], p: usize) -> Result<DesignMatrix> {
    check_depth(p, x.nrows())?;
    let rows: Vec<usize> = (p - 1..x.nrows()).collect();
    let data = rows
        .iter()
        .map(|&t| {
            (0..x.ncols())
                .flat_map(|c| (0..p).map(move |l| x[(t - l, c)]))
                .collect()
        })
        .collect();
    Ok(finalize(rows, lag_names(names, p), data))
}

/// `MARX_{k,p,t} = (1/p) Σ_{j<p} x_{k,t−j}` for `p = 1..=P`.
pub fn marx(x: &DMatrix<f64>, names: &[String], p: usize) -> Result<DesignMatrix> {
    check_depth(p, x.nrows())?;
    let rows: Vec<usize> = (p - 1..x.nrows()).collect();
    let data = rows
        .iter()
        .map(|&t| (0..x.ncols()).flat_map(|c| marx_row(x, c, t, p)).collect())
        .collect();
    Ok(finalize(rows, marx_names(names, p), data))
}

fn marx_row(x: &DMatrix<f64>, c: usize, t: usize, p: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(p);
    let mut sum = 0.0;
    for q in 1..=p {
        sum += x[(t + 1 - q, c)];
        out.push(sum / q as f64);
    }
    out
}

/// The lower-triangular map from `(x_t, ..., x_{t-P+1})` to
/// `(MARX_1, ..., MARX_P)`.
pub fn marx_rotation(p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| if j <= i { 1.0 / (i + 1) as f64 } else { 0.0 })
}

/// Recover raw lags from one series' MARX values.
pub fn invert_marx(m: &[f64]) -> Vec<f64> {
    let mut prev = 0.0;
    m.iter()
        .enumerate()
        .map(|(i, v)| {
            let cum = v * (i + 1) as f64;
            let lag = cum - prev;
            prev = cum;
            lag
        })
        .collect()
}

/// Input sets of the model registry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Recipe {
    /// No inputs (random walk).
    Empty,
    /// `[y lags]`.
    YLags,
    /// `[y lags, factor lags]`.
    YFactors,
    /// `[y lags, factor lags, X]`.
    YFactorsX,
    /// `[y lags, factor lags, X, MARX]`.
    YFactorsXMarx,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub recipe: Recipe,
    pub py: usize,
    pub pf: usize,
    pub k: usize,
    pub p_marx: usize,
}

impl FeatureSet {
    pub fn new(recipe: Recipe) -> Self {
        FeatureSet {
            recipe,
            py: 6,
            pf: 6,
            k: 8,
            p_marx: 6,
        }
    }

    pub fn include_y(&self) -> bool {
        self.recipe != Recipe::Empty
    }

    pub fn include_factors(&self) -> bool {
        matches!(
            self.recipe,
            Recipe::YFactors | Recipe::YFactorsX | Recipe::YFactorsXMarx
        )
    }

    pub fn include_x(&self) -> bool {
        matches!(self.recipe, Recipe::YFactorsX | Recipe::YFactorsXMarx)
    }

    pub fn include_marx(&self) -> bool {
        self.recipe == Recipe::YFactorsXMarx
    }

    /// Column count for a panel of `n` series.
    pub fn width(&self, n: usize) -> usize {
        let mut w = 0;
        if self.include_y() {
            w += self.py;
        }
        if self.include_factors() {
            w += self.k * self.pf;
        }
        if self.include_x() {
            w += n;
        }
        if self.include_marx() {
            w += n * self.p_marx;
        }
        w
    }

    /// Ordered column names.
    pub fn names(&self, x_names: &[String]) -> Vec<String> {
        let mut names = Vec::new();
        if self.include_y() {
            names.extend(lag_names(&["y".to_string()], self.py));
        }
        if self.include_factors() {
            let f: Vec<String> = (1..=self.k).map(|j| format!("F{j}")).collect();
            names.extend(lag_names(&f, self.pf));
        }
        if self.include_x() {
            names.extend(x_names.iter().map(|n| format!("X_{n}")));
        }
        if self.include_marx() {
            names.extend(marx_names(x_names, self.p_marx));
        }
        names
    }
}

/// Inputs shared by every row of a design.
pub struct DesignInputs<'a> {
    /// One-period change of the target, `NaN` where undefined.
    pub y: &'a [f64],
    /// `T x k'` factors (k' >= spec.k) when the recipe needs them.
    pub factors: Option<&'a DMatrix<f64>>,
    /// `T x N` transformed panel.
    pub x: &'a DMatrix<f64>,
    pub x_names: &'a [String],
}

/// Assemble `[y-lags | factor-lags | X | MARX]` rows at the requested origins;
/// rows with any unavailable feature are dropped.
pub fn assemble_design(spec: &FeatureSet, inputs: &DesignInputs<'_>, origins: &[usize]) -> Result<DesignMatrix> {
    let t_len = inputs.y.len();
    if inputs.x.nrows() != t_len || inputs.x.ncols() != inputs.x_names.len() {
        return Err(Error::Dimension(format!(
            "X is {}x{}, expected {t_len} rows and {} named columns",
            inputs.x.nrows(),
            inputs.x.ncols(),
            inputs.x_names.len()
        )));
    }
    let factors = if spec.include_factors() {
        let f = inputs
            .factors
            .ok_or_else(|| Error::invalid(format!("recipe {:?} needs factors", spec.recipe)))?;
        if f.ncols() < spec.k || f.nrows() != t_len {
            return Err(Error::Dimension(format!(
                "factors are {}x{}, recipe needs {t_len}x{}",
                f.nrows(),
                f.ncols(),
                spec.k
            )));
        }
        Some(f)
    } else {
        None
    };
    if spec.include_y() && spec.py == 0 || spec.include_factors() && spec.pf == 0 {
        return Err(Error::invalid("lag depths must be at least 1"));
    }
    let max_lag = [
        if spec.include_y() { spec.py } else { 1 },
        if spec.include_factors() { spec.pf } else { 1 },
        if spec.include_marx() { spec.p_marx } else { 1 },
    ]
    .into_iter()
    .max()
    .unwrap_or(1);

    let names = spec.names(inputs.x_names);
    let n = inputs.x.ncols();
    let mut rows = Vec::new();
    let mut data = Vec::new();
    for &t in origins {
        if t >= t_len {
            return Err(Error::invalid(format!("origin {t} beyond sample of {t_len}")));
        }
        if t + 1 < max_lag {
            continue;
        }
        let mut row = Vec::with_capacity(names.len());
        if spec.include_y() {
            row.extend((0..spec.py).map(|l| inputs.y[t - l]));
        }
        if let Some(f) = factors {
            for j in 0..spec.k {
                row.extend((0..spec.pf).map(|l| f[(t - l, j)]));
            }
        }
        if spec.include_x() {
            row.extend((0..n).map(|c| inputs.x[(t, c)]));
        }
        if spec.include_marx() {
            for c in 0..n {
                row.extend(marx_row(inputs.x, c, t, spec.p_marx));
            }
        }
        rows.push(t);
        data.push(row);
    }
    Ok(finalize(rows, names, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i}")).collect()
    }

    #[test]
    fn target_examples() {
        let t = build_target("Y", &[1.0, E, E * E], 2, true).unwrap();
        assert!((t.values[0].unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(t.values[1], None);
        let t = build_target("U", &[4.0, 6.0], 1, false).unwrap();
        assert_eq!(t.values[0], Some(2.0));
        for log in [true, false] {
            let t = build_target("C", &[3.0; 6], 2, log).unwrap();
            assert!(t.values.iter().flatten().all(|&v| v == 0.0));
            assert_eq!(t.values.iter().flatten().count(), 4);
        }
    }

    #[test]
    fn target_errors_and_gaps() {
        assert!(matches!(build_target("Y", &[1.0, 0.0, 2.0], 1, true), Err(Error::NonPositive { .. })));
        assert!(build_target("Y", &[1.0, 0.0, 2.0], 1, false).is_ok());
        assert!(build_target("Y", &[1.0, 2.0], 2, true).is_err());
        let t = build_target("Y", &[1.0, f64::NAN, 2.0, 3.0], 1, true).unwrap();
        assert_eq!(t.values[0], None);
        assert_eq!(t.values[1], None);
        assert!(t.values[2].is_some());
    }

    #[test]
    fn period_change_matches_one_step_target() {
        let y = [2.0, 3.0, 2.5, 4.0];
        let d = period_change(&y, true);
        let t = build_target("Y", &y, 1, true).unwrap();
        assert!(d[0].is_nan());
        for i in 1..4 {
            assert_eq!(d[i], t.values[i - 1].unwrap());
        }
    }

    #[test]
    fn lag_examples() {
        let x = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        let d = build_lags(&x, &names(1), 2).unwrap();
        assert_eq!(d.rows, vec![1, 2, 3]);
        assert_eq!(d.names, vec!["s0_l0", "s0_l1"]);
        assert_eq!(d.values, DMatrix::from_row_slice(3, 2, &[2.0, 1.0, 3.0, 2.0, 4.0, 3.0]));
        let d1 = build_lags(&x, &names(1), 1).unwrap();
        assert_eq!(d1.values, x);
        let m = DMatrix::from_fn(10, 3, |t, j| (t * 3 + j) as f64);
        assert_eq!(build_lags(&m, &names(3), 4).unwrap().ncols(), 12);
        assert!(build_lags(&x, &names(1), 4).is_err());
    }

    #[test]
    fn marx_examples() {
        let x = DMatrix::from_column_slice(2, 1, &[2.0, 4.0]);
        let m = marx(&x, &names(1), 2);
        assert!(m.is_err(), "P >= T");
        let x = DMatrix::from_column_slice(3, 1, &[0.0, 2.0, 4.0]);
        let m = marx(&x, &names(1), 2).unwrap();
        assert_eq!(m.values.row(1).iter().copied().collect::<Vec<_>>(), vec![4.0, 3.0]);
        let y = DMatrix::from_fn(8, 2, |t, j| (t as f64).sin() + j as f64);
        let m1 = marx(&y, &names(2), 1).unwrap();
        assert_eq!(m1.values, y);
    }

    #[test]
    fn marx_rotation_is_invertible() {
        for p in 1..=12 {
            let r = marx_rotation(p);
            let lags: Vec<f64> = (0..p).map(|i| ((i * 37 % 11) as f64 - 5.0) * 0.37).collect();
            let mv = &r * nalgebra::DVector::from_column_slice(&lags);
            let back = r.solve_lower_triangular(&mv).unwrap();
            let inv = invert_marx(mv.as_slice());
            for i in 0..p {
                assert!((back[i] - lags[i]).abs() < 1e-12);
                assert!((inv[i] - lags[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn widths_match_input_sets() {
        assert_eq!(FeatureSet::new(Recipe::YFactors).width(112), 54);
        assert_eq!(FeatureSet::new(Recipe::YFactorsX).width(112), 166);
        assert_eq!(FeatureSet::new(Recipe::YFactorsXMarx).width(112), 166 + 112 * 6);
        assert_eq!(FeatureSet::new(Recipe::YLags).width(112), 6);
        assert_eq!(FeatureSet::new(Recipe::Empty).width(112), 0);
    }

    fn toy_inputs(t: usize, n: usize) -> (Vec<f64>, DMatrix<f64>, DMatrix<f64>, Vec<String>) {
        let mut y: Vec<f64> = (0..t).map(|i| (i as f64 * 0.7).cos()).collect();
        y[0] = f64::NAN;
        let f = DMatrix::from_fn(t, 8, |i, j| ((i * (j + 1)) as f64 * 0.1).sin());
        let x = DMatrix::from_fn(t, n, |i, j| ((i + 3 * j) as f64 * 0.3).sin());
        (y, f, x, names(n))
    }

    #[test]
    fn assemble_layout_and_names() {
        let (y, f, x, xn) = toy_inputs(30, 4);
        let inputs = DesignInputs { y: &y, factors: Some(&f), x: &x, x_names: &xn };
        let spec = FeatureSet::new(Recipe::YFactorsXMarx);
        let origins: Vec<usize> = (0..30).collect();
        let d = assemble_design(&spec, &inputs, &origins).unwrap();
        assert_eq!(d.ncols(), spec.width(4));
        assert_eq!(d.rows.first(), Some(&6), "y_0 missing, so first full row is t=6");
        assert_eq!(d.names[0], "y_l0");
        assert_eq!(d.names[6], "F1_l0");
        assert_eq!(d.names[54], "X_s0");
        assert_eq!(d.names[58], "MARX_s0_p1");
        let r = d.row_of(10).unwrap();
        assert_eq!(d.values[(r, 1)], y[9]);
        assert_eq!(d.values[(r, 6 + 6 + 2)], f[(8, 1)]);
        assert_eq!(d.values[(r, 55)], x[(10, 1)]);
        let mut uniq = d.names.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), d.names.len());
    }

    #[test]
    fn anti_look_ahead_rows_are_bitwise_stable() {
        let (y, f, x, xn) = toy_inputs(40, 3);
        let spec = FeatureSet::new(Recipe::YFactorsXMarx);
        let full_inputs = DesignInputs { y: &y, factors: Some(&f), x: &x, x_names: &xn };
        let all: Vec<usize> = (0..40).collect();
        let full = assemble_design(&spec, &full_inputs, &all).unwrap();
        for t in 10..40 {
            let yt = &y[..=t];
            let ft = f.rows(0, t + 1).into_owned();
            let xt = x.rows(0, t + 1).into_owned();
            let cut = DesignInputs { y: yt, factors: Some(&ft), x: &xt, x_names: &xn };
            let d = assemble_design(&spec, &cut, &[t]).unwrap();
            let r = full.row_of(t).unwrap();
            for c in 0..d.ncols() {
                assert_eq!(d.values[(0, c)].to_bits(), full.values[(r, c)].to_bits());
            }
        }
    }

    #[test]
    fn recipe_mismatch_errors() {
        let (y, _, x, xn) = toy_inputs(20, 2);
        let inputs = DesignInputs { y: &y, factors: None, x: &x, x_names: &xn };
        assert!(assemble_design(&FeatureSet::new(Recipe::YFactors), &inputs, &[10]).is_err());
        assert!(assemble_design(&FeatureSet::new(Recipe::YLags), &inputs, &[10]).is_ok());
        let small = DMatrix::zeros(20, 3);
        let inputs = DesignInputs { y: &y, factors: Some(&small), x: &x, x_names: &xn };
        assert!(assemble_design(&FeatureSet::new(Recipe::YFactors), &inputs, &[10]).is_err());
    }
}
