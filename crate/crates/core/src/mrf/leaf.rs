//! Ridge-penalized weighted least squares in the leaves.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::cholesky_solve_in_place;
use crate::trees::grow::SplitCriterion;

/// Podium kernel around `center` over `t` rows: 1 at the center, `ζ` at
/// distance 1, `ζ²` at distance 2, truncated at the sample edges.
pub fn podium_weights(center: usize, zeta: f64, t: usize) -> Vec<f64> {
    let mut w = vec![0.0; t];
    for (off, k) in [(0usize, 1.0), (1, zeta), (2, zeta * zeta)] {
        if center + off < t {
            w[center + off] = k;
        }
        if off <= center {
            w[center - off] = k;
        }
    }
    w
}

/// `argmin Σ w (y - β₀ - xβ)² + λ ||β||²`, returned as `[β₀, β...]`.
/// `x` excludes the intercept, which is never penalized.
pub fn ridge_wls(x: &DMatrix<f64>, y: &[f64], w: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if x.nrows() != y.len() || w.len() != y.len() {
        return Err(Error::Dimension("ridge_wls inputs differ in length".into()));
    }
    if !(w.iter().sum::<f64>() > 0.0) || w.iter().any(|v| *v < 0.0) {
        return Err(Error::invalid("weights must be non-negative with positive sum"));
    }
    let d = x.ncols() + 1;
    let mut stats = Stats::new(d);
    let mut row = vec![1.0; d];
    for i in 0..y.len() {
        for j in 1..d {
            row[j] = x[(i, j - 1)];
        }
        stats.add(&row, y[i], w[i]);
    }
    stats
        .solve(lambda)
        .map(|(beta, _)| beta)
        .ok_or_else(|| Error::Solver("singular weighted least squares system".into()))
}

/// Weighted sufficient statistics `X'WX`, `X'Wy`, `y'Wy`.
#[derive(Clone, Debug)]
pub(crate) struct Stats {
    d: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    yy: f64,
}

impl Stats {
    pub(crate) fn new(d: usize) -> Self {
        Stats {
            d,
            a: vec![0.0; d * d],
            b: vec![0.0; d],
            yy: 0.0,
        }
    }

    fn clear(&mut self) {
        self.a.fill(0.0);
        self.b.fill(0.0);
        self.yy = 0.0;
    }

    pub(crate) fn add(&mut self, x: &[f64], y: f64, w: f64) {
        let d = self.d;
        for i in 0..d {
            let wx = w * x[i];
            for j in 0..d {
                self.a[i * d + j] += wx * x[j];
            }
            self.b[i] += wx * y;
        }
        self.yy += w * y * y;
    }

    /// Coefficients and minimized objective, `None` when singular.
    pub(crate) fn solve(&self, lambda: f64) -> Option<(Vec<f64>, f64)> {
        if self.d == 1 {
            let a = self.a[0];
            if !(a > 0.0) {
                return None;
            }
            let beta = self.b[0] / a;
            return Some((vec![beta], self.yy - self.b[0] * beta));
        }
        let mut a = self.a.clone();
        for j in 1..self.d {
            a[j * self.d + j] += lambda;
        }
        let mut beta = self.b.clone();
        if !cholesky_solve_in_place(&mut a, &mut beta, self.d) {
            return None;
        }
        let fit: f64 = beta.iter().zip(&self.b).map(|(u, v)| u * v).sum();
        Some((beta, self.yy - fit))
    }

    fn minus(&self, other: &Stats) -> Stats {
        Stats {
            d: self.d,
            a: self.a.iter().zip(&other.a).map(|(u, v)| u - v).collect(),
            b: self.b.iter().zip(&other.b).map(|(u, v)| u - v).collect(),
            yy: self.yy - other.yy,
        }
    }
}

/// Split criterion for the rolling-window leaf regressions. Each member row
/// `m` contributes its podium kernel to the in-bag rows within two periods,
/// so child statistics stay additive across members.
pub(crate) struct RollingCriterion<'a> {
    /// Row-major `t x d` design with a leading intercept column.
    pub xt: &'a [f64],
    pub y: &'a [f64],
    pub d: usize,
    pub in_bag: &'a [bool],
    pub kernel: [f64; 3],
    pub lambda: f64,
    pub total: Stats,
    pub left: Stats,
}

impl<'a> RollingCriterion<'a> {
    pub(crate) fn new(xt: &'a [f64], y: &'a [f64], d: usize, in_bag: &'a [bool], zeta: f64, lambda: f64) -> Self {
        RollingCriterion {
            xt,
            y,
            d,
            in_bag,
            kernel: [1.0, zeta, zeta * zeta],
            lambda,
            total: Stats::new(d),
            left: Stats::new(d),
        }
    }

    fn add_member(&self, m: usize, stats: &mut Stats) {
        let t = self.y.len();
        let lo = m.saturating_sub(2);
        let hi = (m + 2).min(t - 1);
        for s in lo..=hi {
            let k = self.kernel[m.abs_diff(s)];
            if k == 0.0 || !self.in_bag[s] {
                continue;
            }
            stats.add(&self.xt[s * self.d..(s + 1) * self.d], self.y[s], k);
        }
    }

    pub(crate) fn node_stats(&self, rows: &[usize]) -> Stats {
        let mut st = Stats::new(self.d);
        for &m in rows {
            self.add_member(m, &mut st);
        }
        st
    }
}

impl SplitCriterion for RollingCriterion<'_> {
    fn begin(&mut self, rows: &[usize]) {
        let mut total = std::mem::replace(&mut self.total, Stats::new(0));
        total.clear();
        for &m in rows {
            self.add_member(m, &mut total);
        }
        self.total = total;
        self.left.clear();
    }

    fn shift_left(&mut self, row: usize) {
        let mut left = std::mem::replace(&mut self.left, Stats::new(0));
        self.add_member(row, &mut left);
        self.left = left;
    }

    fn node_loss(&self) -> f64 {
        self.total.solve(self.lambda).map_or(f64::INFINITY, |(_, l)| l)
    }

    fn children_loss(&self) -> Option<f64> {
        let l = self.left.solve(self.lambda)?.1;
        let r = self.total.minus(&self.left).solve(self.lambda)?.1;
        Some(l + r)
    }

    fn is_pure(&self, rows: &[usize]) -> bool {
        let f = rows[0];
        let xf = &self.xt[f * self.d..(f + 1) * self.d];
        rows.iter()
            .all(|&r| self.y[r] == self.y[f] && &self.xt[r * self.d..(r + 1) * self.d] == xf)
    }
}
