//! Principal-component factors, `PC_p2` factor-count selection and marginal R².
//!
//! Factors follow the `F'F/T = I_k` normalization with loadings `Λ = X'F/T`,
//! so `FΛ'` is the orthogonal projection of `X` on the span of `F`.
//! Eigenvalues are those of `X'X/(NT)`; the mean squared residual of the
//! rank-`k` fit is the sum of the trailing eigenvalues.

use std::io::Write;

use nalgebra::{DMatrix, SVD};
use serde::Serialize;

use crate::date::YearMonth;
use crate::error::{Error, Result};
use crate::linalg::sym_eigen_desc;
use crate::panel::{standardize, Panel, SeriesMeta};

#[derive(Clone, Debug)]
pub struct FactorModel {
    /// `T x k` factor matrix.
    pub factors: DMatrix<f64>,
    /// `N x k` loadings.
    pub loadings: DMatrix<f64>,
    /// Leading `k` eigenvalues of `X'X/(NT)`, descending.
    pub eigenvalues: Vec<f64>,
    pub k: usize,
}

impl FactorModel {
    /// Common component `FΛ'`.
    pub fn fitted(&self) -> DMatrix<f64> {
        &self.factors * self.loadings.transpose()
    }
}

fn check_input(x: &DMatrix<f64>, k: usize) -> Result<()> {
    let (t, n) = x.shape();
    if k == 0 || k > t.min(n) {
        return Err(Error::invalid(format!(
            "factor count {k} outside 1..={}",
            t.min(n)
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite entries in factor input"));
    }
    Ok(())
}

/// Flip each factor so the series with the largest absolute loading loads
/// positively on it.
fn canonicalize_signs(f: &mut DMatrix<f64>, l: &mut DMatrix<f64>) {
    for j in 0..f.ncols() {
        let mut best = 0;
        for i in 1..l.nrows() {
            if l[(i, j)].abs() > l[(best, j)].abs() {
                best = i;
            }
        }
        if l[(best, j)] < 0.0 {
            f.column_mut(j).neg_mut();
            l.column_mut(j).neg_mut();
        }
    }
}

/// All `min(T, N)` eigenvalues of `X'X/(NT)` in descending order.
pub fn eigen_spectrum(x: &DMatrix<f64>) -> Vec<f64> {
    let (t, n) = x.shape();
    let gram = if n <= t {
        x.transpose() * x
    } else {
        x * x.transpose()
    };
    let scale = (n * t) as f64;
    sym_eigen_desc(gram)
        .0
        .into_iter()
        .map(|v| (v / scale).max(0.0))
        .collect()
}

/// First `k` principal-component factors of a standardized `T x N` matrix.
pub fn extract_factors(x: &DMatrix<f64>, k: usize) -> Result<FactorModel> {
    check_input(x, k)?;
    let (t, n) = x.shape();
    let tf = t as f64;
    let scale = (n * t) as f64;

    let (mut factors, eigenvalues) = if n < t {
        let (vals, vecs) = sym_eigen_desc(x.transpose() * x);
        if vals[k - 1] > 1e-10 * vals[0].max(f64::MIN_POSITIVE) {
            let mut f = DMatrix::zeros(t, k);
            for j in 0..k {
                let fj = x * vecs.column(j) * (tf / vals[j]).sqrt();
                f.set_column(j, &fj);
            }
            (f, vals[..k].iter().map(|v| v / scale).collect::<Vec<_>>())
        } else {
            time_side(x, k)
        }
    } else {
        time_side(x, k)
    };
    let mut loadings = x.transpose() * &factors / tf;
    canonicalize_signs(&mut factors, &mut loadings);
    Ok(FactorModel {
        factors,
        loadings,
        eigenvalues,
        k,
    })
}

fn time_side(x: &DMatrix<f64>, k: usize) -> (DMatrix<f64>, Vec<f64>) {
    let (t, n) = x.shape();
    let (vals, vecs) = sym_eigen_desc(x * x.transpose());
    let f = vecs.columns(0, k) * (t as f64).sqrt();
    let scale = (n * t) as f64;
    (f, vals[..k].iter().map(|v| v.max(0.0) / scale).collect())
}

/// Same factor model computed through a thin SVD of `X`; used to cross-check
/// the eigen route.
pub fn extract_factors_svd(x: &DMatrix<f64>, k: usize) -> Result<FactorModel> {
    check_input(x, k)?;
    let (t, n) = x.shape();
    let svd = SVD::new(x.clone(), true, true);
    let u = svd.u.as_ref().ok_or_else(|| Error::Solver("svd: no U".into()))?;
    let v_t = svd.v_t.as_ref().ok_or_else(|| Error::Solver("svd: no V".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let tf = t as f64;
    let mut factors = DMatrix::zeros(t, k);
    let mut loadings = DMatrix::zeros(n, k);
    let mut eigenvalues = Vec::with_capacity(k);
    for (j, &src) in order.iter().take(k).enumerate() {
        let s = svd.singular_values[src];
        factors.set_column(j, &(u.column(src) * tf.sqrt()));
        loadings.set_column(j, &(v_t.row(src).transpose() * (s / tf.sqrt())));
        eigenvalues.push(s * s / (n * t) as f64);
    }
    canonicalize_signs(&mut factors, &mut loadings);
    Ok(FactorModel {
        factors,
        loadings,
        eigenvalues,
        k,
    })
}

/// Outcome of the `PC_p2` search.
#[derive(Clone, Debug, Serialize)]
pub struct FactorCountSelection {
    pub k: usize,
    /// `V(k)` for `k = 1..=kmax`.
    pub residual_variance: Vec<f64>,
    /// Criterion value for `k = 1..=kmax`.
    pub criterion: Vec<f64>,
}

/// Bai-Ng `PC_p2`: minimize `V(k) + k σ̂² (N+T)/(NT) ln(min(N,T))` over
/// `k = 1..=kmax` with `σ̂² = V(kmax)`.
pub fn pc_p2(x: &DMatrix<f64>, kmax: usize) -> Result<FactorCountSelection> {
    let (t, n) = x.shape();
    if kmax == 0 || 2 * kmax > t.min(n) {
        return Err(Error::invalid(format!(
            "kmax {kmax} must be in 1..={}",
            t.min(n) / 2
        )));
    }
    let eig = eigen_spectrum(x);
    let total: f64 = eig.iter().sum();
    let mut v = Vec::with_capacity(kmax);
    let mut explained = 0.0;
    for e in eig.iter().take(kmax) {
        explained += e;
        v.push((total - explained).max(0.0));
    }
    let sigma2 = v[kmax - 1];
    let (nf, tf) = (n as f64, t as f64);
    let pen = sigma2 * (nf + tf) / (nf * tf) * nf.min(tf).ln();
    let criterion: Vec<f64> = v
        .iter()
        .enumerate()
        .map(|(i, vk)| vk + (i + 1) as f64 * pen)
        .collect();
    let mut best = 0;
    for i in 1..kmax {
        if criterion[i] < criterion[best] {
            best = i;
        }
    }
    Ok(FactorCountSelection {
        k: best + 1,
        residual_variance: v,
        criterion,
    })
}

/// Marginal R² of each factor for each series.
#[derive(Clone, Debug)]
pub struct FactorDiagnostics {
    /// `N x k`: incremental R² of factor `j` for series `i`.
    pub mr2: DMatrix<f64>,
    pub avg_mr2: Vec<f64>,
    pub total_r2: f64,
}

/// `mr2[i][j] = R²(x_i ~ F_1..F_j) − R²(x_i ~ F_1..F_{j−1})`, regressions
/// including an intercept.
pub fn marginal_r2(x: &DMatrix<f64>, fm: &FactorModel) -> Result<FactorDiagnostics> {
    let (t, n) = x.shape();
    if fm.factors.nrows() != t || fm.loadings.nrows() != n {
        return Err(Error::Dimension(format!(
            "factor model {}x{} does not match data {t}x{n}",
            fm.factors.nrows(),
            fm.loadings.nrows()
        )));
    }
    let k = fm.k;
    // Orthonormal basis of [1, F_1, ..., F_k] in order; the squared projection
    // on the j-th basis vector is the R² increment of factor j.
    let mut design = DMatrix::from_element(t, k + 1, 1.0);
    design.columns_mut(1, k).copy_from(&fm.factors);
    let q = design.qr().q();
    let mut mr2 = DMatrix::zeros(n, k);
    for i in 0..n {
        let xi = x.column(i);
        let m = xi.mean();
        let sst: f64 = xi.iter().map(|v| (v - m) * (v - m)).sum();
        if sst <= 0.0 {
            continue;
        }
        for j in 0..k {
            let c = q.column(j + 1).dot(&xi);
            mr2[(i, j)] = (c * c / sst).clamp(0.0, 1.0);
        }
    }
    let avg_mr2: Vec<f64> = (0..k).map(|j| mr2.column(j).mean()).collect();
    let total_r2 = avg_mr2.iter().sum::<f64>().clamp(0.0, 1.0);
    Ok(FactorDiagnostics {
        mr2,
        avg_mr2,
        total_r2,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecursiveCount {
    pub date: YearMonth,
    pub k: usize,
    pub total_r2: f64,
}

/// Re-select the number of factors on the expanding sample ending at each
/// month from `start` to the end of the (balanced) panel.
pub fn recursive_factor_count(
    p: &Panel,
    start: YearMonth,
    kmax: usize,
) -> Result<Vec<RecursiveCount>> {
    let first = p
        .date_index(start)
        .ok_or_else(|| Error::invalid(format!("start {start} outside panel dates")))?;
    if first + 1 < 24 {
        return Err(Error::invalid(format!(
            "insufficient history: {} months up to {start}, need 24",
            first + 1
        )));
    }
    if !p.is_balanced() {
        return Err(Error::invalid("recursive factor count needs a balanced panel"));
    }
    (first..p.n_periods())
        .map(|last| {
            let (std, _, _) = standardize(&p.head(last))?;
            let x = &std.values;
            let cap = (x.nrows().min(x.ncols()) / 2).max(1);
            let sel = pc_p2(x, kmax.min(cap))?;
            let fm = extract_factors(x, sel.k)?;
            let diag = marginal_r2(x, &fm)?;
            Ok(RecursiveCount {
                date: p.dates[last],
                k: sel.k,
                total_r2: diag.total_r2,
            })
        })
        .collect()
}

/// Write the factor-interpretation table: blocks of three factors side by
/// side, each headed by `mR2(j)` and its average, followed by the `top`
/// series with the highest marginal R² and their group ids.
pub fn write_factor_table<W: Write>(
    diag: &FactorDiagnostics,
    meta: &[SeriesMeta],
    top: usize,
    writer: W,
) -> Result<()> {
    let k = diag.avg_mr2.len();
    let n = meta.len();
    let top = top.min(n);
    let ranked: Vec<Vec<usize>> = (0..k)
        .map(|j| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| diag.mr2[(b, j)].total_cmp(&diag.mr2[(a, j)]).then(a.cmp(&b)));
            idx.truncate(top);
            idx
        })
        .collect();
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(writer);
    for block in (0..k).collect::<Vec<_>>().chunks(3) {
        let mut head = Vec::new();
        for &j in block {
            head.push(format!("mR2({})", j + 1));
            head.push(format!("{:.3}", diag.avg_mr2[j]));
            head.push("G#".to_string());
        }
        w.write_record(&head)?;
        for r in 0..top {
            let mut row = Vec::new();
            for &j in block {
                let i = ranked[j][r];
                row.push(meta[i].id.clone());
                row.push(format!("{:.3}", diag.mr2[(i, j)]));
                row.push(meta[i].group.to_string());
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Long format `series,group,factor,mr2`, one row per series and factor.
pub fn write_mr2_long<W: Write>(diag: &FactorDiagnostics, meta: &[SeriesMeta], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["series", "group", "factor", "mr2"])?;
    for (i, m) in meta.iter().enumerate() {
        for j in 0..diag.avg_mr2.len() {
            w.write_record([
                m.id.clone(),
                m.group.to_string(),
                (j + 1).to_string(),
                format!("{}", diag.mr2[(i, j)]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
