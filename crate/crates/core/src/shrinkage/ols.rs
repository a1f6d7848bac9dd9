use nalgebra::{DMatrix, DVector};

use super::LinearFit;
use crate::error::{Error, Result};

/// Least squares with an intercept.
///
/// Rank is judged on the centered, unit-scaled design; columns whose
/// QR pivot collapses are reported by name.
pub fn ols(z: &DMatrix<f64>, y: &[f64], names: &[String]) -> Result<LinearFit> {
    let (n, p) = z.shape();
    if y.len() != n || names.len() != p {
        return Err(Error::Dimension(format!(
            "design {n}x{p}, target {}, names {}",
            y.len(),
            names.len()
        )));
    }
    if p + 1 > n {
        return Err(Error::invalid(format!("{p} columns + intercept exceed {n} rows")));
    }
    let nf = n as f64;
    let ybar = y.iter().sum::<f64>() / nf;
    if p == 0 {
        return Ok(LinearFit {
            intercept: ybar,
            coef: vec![],
            column_names: vec![],
            scaling: None,
        });
    }
    let mut means = Vec::with_capacity(p);
    let mut sds = Vec::with_capacity(p);
    let mut zs = z.clone();
    let mut collinear = Vec::new();
    for (j, mut col) in zs.column_iter_mut().enumerate() {
        let m = col.mean();
        let sd = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / nf).sqrt();
        if !(sd > 1e-12 * m.abs().max(1.0)) {
            collinear.push(names[j].clone());
        }
        let s = if sd > 0.0 { sd } else { 1.0 };
        col.apply(|v| *v = (*v - m) / s);
        means.push(m);
        sds.push(s);
    }
    if !collinear.is_empty() {
        return Err(Error::RankDeficient(collinear));
    }
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - ybar));
    let qr = zs.qr();
    let r = qr.r();
    let scale = (0..p).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    let bad: Vec<String> = (0..p)
        .filter(|&j| r[(j, j)].abs() <= 1e-9 * scale.max(f64::MIN_POSITIVE) * (n as f64).sqrt())
        .map(|j| names[j].clone())
        .collect();
    if !bad.is_empty() {
        return Err(Error::RankDeficient(bad));
    }
    let qty = qr.q().transpose() * yc;
    let bs = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Solver("triangular solve failed".into()))?;
    let coef: Vec<f64> = (0..p).map(|j| bs[j] / sds[j]).collect();
    let intercept = ybar - coef.iter().zip(&means).map(|(b, m)| b * m).sum::<f64>();
    Ok(LinearFit {
        intercept,
        coef,
        column_names: names.to_vec(),
        scaling: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rng_from, std_normal};
    use crate::shrinkage::default_names;

    #[test]
    fn exact_line() {
        let z = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, 3.0, 5.0]);
        let y = [2.0, 4.0, 6.0, 10.0];
        let f = ols(&z, &y, &default_names(1)).unwrap();
        assert!(f.intercept.abs() < 1e-12);
        assert!((f.coef[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn intercept_only() {
        let z = DMatrix::zeros(3, 0);
        let f = ols(&z, &[1.0, 2.0, 6.0], &[]).unwrap();
        assert_eq!(f.beta(), vec![3.0]);
    }

    #[test]
    fn normal_equations_hold() {
        let mut rng = rng_from(4);
        let z = DMatrix::from_fn(50, 4, |_, _| std_normal(&mut rng));
        let y: Vec<f64> = (0..50).map(|_| std_normal(&mut rng)).collect();
        let f = ols(&z, &y, &default_names(4)).unwrap();
        let pred = f.predict(&z);
        let resid: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
        assert!(resid.iter().sum::<f64>().abs() < 1e-8);
        for j in 0..4 {
            let g: f64 = (0..50).map(|i| z[(i, j)] * resid[i]).sum();
            assert!(g.abs() < 1e-8, "{g}");
        }
    }

    #[test]
    fn collinear_columns_named() {
        let z = DMatrix::from_fn(10, 3, |i, j| match j {
            0 => i as f64,
            1 => (i * i) as f64,
            _ => 2.0 * i as f64 + 1.0,
        });
        let names = vec!["a".to_string(), "b".into(), "c".into()];
        match ols(&z, &[0.0; 10], &names) {
            Err(Error::RankDeficient(cols)) => assert_eq!(cols, vec!["c".to_string()]),
            other => panic!("{other:?}"),
        }
        let konst = DMatrix::from_element(5, 1, 3.0);
        assert!(matches!(ols(&konst, &[1.0; 5], &default_names(1)), Err(Error::RankDeficient(_))));
    }
}
