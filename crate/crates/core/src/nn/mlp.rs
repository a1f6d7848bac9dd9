//! Fully connected ReLU network with a linear output unit.

use nalgebra::DMatrix;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

/// Parameters stored flat, layer by layer: weights `out x in` row-major,
/// then biases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub params: Vec<f64>,
}

struct Layer {
    w: usize,
    b: usize,
    n_in: usize,
    n_out: usize,
}

impl Mlp {
    /// He-uniform weights `U(-sqrt(6/fan_in), sqrt(6/fan_in))`, zero biases.
    pub fn new(n_inputs: usize, hidden: &[usize], rng: &mut Rng) -> Mlp {
        let mut sizes = vec![n_inputs];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let mut params = Vec::new();
        for w in sizes.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let limit = (6.0 / n_in.max(1) as f64).sqrt();
            params.extend((0..n_in * n_out).map(|_| rng.random_range(-limit..limit)));
            params.extend(std::iter::repeat_n(0.0, n_out));
        }
        Mlp { sizes, params }
    }

    fn layers(&self) -> Vec<Layer> {
        let mut off = 0;
        self.sizes
            .windows(2)
            .map(|w| {
                let l = Layer {
                    w: off,
                    b: off + w[0] * w[1],
                    n_in: w[0],
                    n_out: w[1],
                };
                off = l.b + w[1];
                l
            })
            .collect()
    }

    /// Mask of parameters that are weights (penalized) rather than biases.
    pub fn weight_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.params.len()];
        for l in self.layers() {
            m[l.w..l.b].fill(true);
        }
        m
    }

    /// Activations of every layer, input first.
    fn forward_all(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let layers = self.layers();
        let last = layers.len() - 1;
        let mut acts = vec![x.to_vec()];
        for (li, l) in layers.iter().enumerate() {
            let a = &acts[li];
            let out: Vec<f64> = (0..l.n_out)
                .map(|o| {
                    let row = &self.params[l.w + o * l.n_in..l.w + (o + 1) * l.n_in];
                    let z = self.params[l.b + o] + row.iter().zip(a).map(|(w, v)| w * v).sum::<f64>();
                    if li == last { z } else { z.max(0.0) }
                })
                .collect();
            acts.push(out);
        }
        acts
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.forward_all(x).last().expect("output layer")[0]
    }

    pub fn predict(&self, z: &DMatrix<f64>) -> Vec<f64> {
        let mut row = vec![0.0; z.ncols()];
        (0..z.nrows())
            .map(|i| {
                for (j, r) in row.iter_mut().enumerate() {
                    *r = z[(i, j)];
                }
                self.predict_row(&row)
            })
            .collect()
    }

    /// Batch loss `mean (ŷ - y)² + l1 Σ|w|` and its gradient.
    pub fn loss_and_grad(&self, z: &DMatrix<f64>, y: &[f64], rows: &[usize], l1: f64) -> (f64, Vec<f64>) {
        let layers = self.layers();
        let mut grad = vec![0.0; self.params.len()];
        let mut sse = 0.0;
        let n = rows.len() as f64;
        let mut x = vec![0.0; z.ncols()];
        for &i in rows {
            for (j, v) in x.iter_mut().enumerate() {
                *v = z[(i, j)];
            }
            let acts = self.forward_all(&x);
            let err = acts.last().expect("output")[0] - y[i];
            sse += err * err;
            // delta at the output pre-activation
            let mut delta = vec![2.0 * err / n];
            for (li, l) in layers.iter().enumerate().rev() {
                let input = &acts[li];
                for o in 0..l.n_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    grad[l.b + o] += d;
                    let g = &mut grad[l.w + o * l.n_in..l.w + (o + 1) * l.n_in];
                    for (gk, v) in g.iter_mut().zip(input) {
                        *gk += d * v;
                    }
                }
                if li == 0 {
                    break;
                }
                let mut next = vec![0.0; l.n_in];
                for o in 0..l.n_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &self.params[l.w + o * l.n_in..l.w + (o + 1) * l.n_in];
                    for (nk, w) in next.iter_mut().zip(row) {
                        *nk += d * w;
                    }
                }
                // ReLU derivative, taken as 0 at the kink
                for (nk, a) in next.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *nk = 0.0;
                    }
                }
                delta = next;
            }
        }
        let mut loss = sse / n;
        if l1 > 0.0 {
            for l in &layers {
                for k in l.w..l.b {
                    let w = self.params[k];
                    loss += l1 * w.abs();
                    grad[k] += l1 * w.signum() * (w != 0.0) as u8 as f64;
                }
            }
        }
        (loss, grad)
    }
}

/// Largest relative error `|a - n| / max(|a| + |n|, 1e-6)` between the
/// analytic gradient and central differences with step `1e-5`. When `l1 > 0`
/// weights within `1e-3` of the kink at zero are skipped.
pub fn finite_diff_gradcheck(model: &Mlp, z: &DMatrix<f64>, y: &[f64], l1: f64) -> f64 {
    let rows: Vec<usize> = (0..y.len()).collect();
    let (_, analytic) = model.loss_and_grad(z, y, &rows, l1);
    let mask = model.weight_mask();
    let h = 1e-5;
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for k in 0..model.params.len() {
        if l1 > 0.0 && mask[k] && model.params[k].abs() <= 1e-3 {
            continue;
        }
        let orig = model.params[k];
        probe.params[k] = orig + h;
        let up = probe.loss_and_grad(z, y, &rows, l1).0;
        probe.params[k] = orig - h;
        let down = probe.loss_and_grad(z, y, &rows, l1).0;
        probe.params[k] = orig;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[k];
        worst = worst.max((a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-6));
    }
    worst
}
