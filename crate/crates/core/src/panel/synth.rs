use nalgebra::DMatrix;
use rand_distr::{Distribution, Normal};


use super::{Panel, SeriesMeta, TransformCode};
use crate::date::YearMonth;
use crate::error::{Error, Result};
use crate::rng::{rng_from, std_normal};

fn synth_meta(n: usize, tcode: impl Fn(usize) -> TransformCode, start: YearMonth) -> Vec<SeriesMeta> {
    (0..n)
        .map(|i| SeriesMeta {
            id: format!("X{:03}", i + 1),
            group: (i % 9 + 1) as u8,
            tcode: tcode(i),
            start_date: start,
            source: "synthetic".into(),
            end_date: None,
        })
        .collect()
}

fn synth_start() -> YearMonth {
    YearMonth::new(1990, 1).expect("valid month")
}

/// Stationary factor panel `X = FΛ' + e` with standard-normal factors and
/// loadings. The common component has variance `r` per entry and the noise
/// variance is `r / snr` (unit variance when `r = 0`).
pub fn synth_dgp(t: usize, n: usize, r: usize, snr: f64, seed: u64) -> Result<Panel> {
    if r >= t.min(n) {
        return Err(Error::invalid(format!("r={r} must be below min(T,N)={}", t.min(n))));
    }
    if !(snr > 0.0) {
        return Err(Error::invalid("snr must be positive"));
    }
    let mut rng = rng_from(seed);
    let f = DMatrix::from_fn(t, r, |_, _| std_normal(&mut rng));
    let l = DMatrix::from_fn(n, r, |_, _| std_normal(&mut rng));
    let noise_sd = if r == 0 { 1.0 } else { (r as f64 / snr).sqrt() };
    let noise = Normal::new(0.0, noise_sd).map_err(|e| Error::invalid(e.to_string()))?;
    let e = DMatrix::from_fn(t, n, |_, _| noise.sample(&mut rng));
    let x = f * l.transpose() + e;
    let start = synth_start();
    let dates = (0..t).map(|i| start.add_months(i as i32)).collect();
    Panel::new(dates, x, synth_meta(n, |_| TransformCode::Level, start))
}

/// Integrate a stationary panel into raw levels so the transform pipeline can
/// be exercised end to end. Series cycle through codes 1, 2 and 5; the
/// returned panel has one extra leading row and transforms back to
/// `stationary` (scaled by `0.01` for log-difference series).
pub fn synth_raw_panel(stationary: &Panel) -> Result<Panel> {
    let (t, n) = (stationary.n_periods(), stationary.n_series());
    let codes = [TransformCode::Level, TransformCode::Diff, TransformCode::LogDiff];
    let mut raw = DMatrix::zeros(t + 1, n);
    for j in 0..n {
        let code = codes[j % 3];
        match code {
            TransformCode::Level => {
                raw[(0, j)] = stationary.values[(0, j)];
                for s in 0..t {
                    raw[(s + 1, j)] = stationary.values[(s, j)];
                }
            }
            TransformCode::Diff => {
                raw[(0, j)] = 0.0;
                for s in 0..t {
                    raw[(s + 1, j)] = raw[(s, j)] + stationary.values[(s, j)];
                }
            }
            _ => {
                let mut log = 100f64.ln();
                raw[(0, j)] = 100.0;
                for s in 0..t {
                    log += 0.01 * stationary.values[(s, j)];
                    raw[(s + 1, j)] = log.exp();
                }
            }
        }
    }
    let start = stationary.dates[0].add_months(-1);
    let dates = (0..=t).map(|i| start.add_months(i as i32)).collect();
    let meta = synth_meta(n, |j| codes[j % 3], start);
    Panel::new(dates, raw, meta)
}

/// Raw-level panel for backtests: `n_targets` level series `Y1, Y2, ...`
/// (code 2) whose monthly changes follow
/// `g_t = 0.6 g_{t-1} + 0.3 F1_{t-1} + e_t`, followed by `n - n_targets`
/// stationary predictors (code 1) loading on three AR(1) factors. The panel
/// has `t + 1` rows starting at `start`.
pub fn synth_ar_factor_panel(t: usize, n: usize, n_targets: usize, start: YearMonth, seed: u64) -> Result<Panel> {
    if n_targets == 0 || n <= n_targets + 3 || t < 20 {
        return Err(Error::invalid("need t >= 20 and more than three predictors besides the targets"));
    }
    let r = 3;
    let mut rng = rng_from(seed);
    let rows = t + 1;
    let mut f = DMatrix::zeros(rows, r);
    for j in 0..r {
        f[(0, j)] = std_normal(&mut rng);
        for s in 1..rows {
            f[(s, j)] = 0.5 * f[(s - 1, j)] + 0.75f64.sqrt() * std_normal(&mut rng);
        }
    }
    let mut raw = DMatrix::zeros(rows, n);
    for k in 0..n_targets {
        let mut g = 0.0;
        raw[(0, k)] = 100.0;
        for s in 1..rows {
            g = 0.6 * g + 0.3 * f[(s - 1, 0)] + std_normal(&mut rng);
            raw[(s, k)] = raw[(s - 1, k)] + g;
        }
    }
    for j in n_targets..n {
        let l: Vec<f64> = (0..r).map(|_| std_normal(&mut rng)).collect();
        for s in 0..rows {
            raw[(s, j)] = (0..r).map(|q| l[q] * f[(s, q)]).sum::<f64>() + std_normal(&mut rng);
        }
    }
    let dates = (0..rows).map(|i| start.add_months(i as i32)).collect();
    let mut meta = synth_meta(n, |j| if j < n_targets { TransformCode::Diff } else { TransformCode::Level }, start);
    for (k, m) in meta.iter_mut().take(n_targets).enumerate() {
        m.id = format!("Y{}", k + 1);
    }
    Panel::new(dates, raw, meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factors::eigen_spectrum;
    use crate::panel::transform_panel;

    #[test]
    fn deterministic() {
        let a = synth_dgp(200, 50, 3, 10.0, 1).unwrap();
        let b = synth_dgp(200, 50, 3, 10.0, 1).unwrap();
        assert!(a.values.iter().zip(b.values.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        let c = synth_dgp(200, 50, 3, 10.0, 2).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn huge_snr_has_numerical_rank_r() {
        let p = synth_dgp(200, 50, 3, 1e8, 4).unwrap();
        let eig = eigen_spectrum(&p.values);
        assert!(eig[2] / eig[3] > 1e5, "gap {} / {}", eig[2], eig[3]);
    }

    #[test]
    fn r_zero_is_noise() {
        let p = synth_dgp(300, 20, 0, 1.0, 9).unwrap();
        let var = p.values.iter().map(|v| v * v).sum::<f64>() / (300.0 * 20.0);
        assert!((var - 1.0).abs() < 0.05);
        let eig = eigen_spectrum(&p.values);
        assert!(eig[0] / eig[19] < 3.0);
    }

    #[test]
    fn rejects_bad_args() {
        assert!(synth_dgp(10, 5, 5, 1.0, 0).is_err());
        assert!(synth_dgp(10, 5, 1, 0.0, 0).is_err());
    }

    #[test]
    fn ar_factor_panel_shape() {
        let start = YearMonth::new(2000, 1).unwrap();
        let p = synth_ar_factor_panel(50, 10, 2, start, 1).unwrap();
        assert_eq!((p.n_periods(), p.n_series()), (51, 10));
        assert_eq!(p.meta[1].id, "Y2");
        assert_eq!(p.meta[1].tcode, TransformCode::Diff);
        assert_eq!(p.meta[2].tcode, TransformCode::Level);
        let q = synth_ar_factor_panel(50, 10, 2, start, 1).unwrap();
        assert_eq!(p.values, q.values);
        assert!(synth_ar_factor_panel(50, 5, 2, start, 1).is_err());
    }

    #[test]
    fn raw_levels_transform_back() {
        let s = synth_dgp(40, 6, 2, 5.0, 3).unwrap();
        let raw = synth_raw_panel(&s).unwrap();
        let back = transform_panel(&raw).unwrap();
        assert_eq!(back.dates, s.dates);
        for j in 0..6 {
            let scale = if j % 3 == 2 { 0.01 } else { 1.0 };
            for t in 0..40 {
                assert!((back.values[(t, j)] - scale * s.values[(t, j)]).abs() < 1e-9);
            }
        }
    }
}
