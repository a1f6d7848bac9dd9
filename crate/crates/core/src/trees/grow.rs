//! Greedy binary tree growth over a pluggable split criterion.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

/// A node of a fitted tree. Rows with `x[feature] <= threshold` go left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node<L> {
    Split {
        feature: usize,
        threshold: f64,
        /// Parent loss minus children loss.
        gain: f64,
        left: usize,
        right: usize,
    },
    Leaf(L),
}

/// Index of the leaf reached by `x`.
pub fn route<L>(nodes: &[Node<L>], x: impl Fn(usize) -> f64) -> usize {
    let mut i = 0;
    while let Node::Split {
        feature,
        threshold,
        left,
        right,
        ..
    } = &nodes[i]
    {
        i = if x(*feature) <= *threshold { *left } else { *right };
    }
    i
}

/// Incremental loss bookkeeping for a sweep over sorted candidate splits.
pub(crate) trait SplitCriterion {
    /// Start a sweep with every row of the node in the right child.
    fn begin(&mut self, rows: &[usize]);
    /// Move one row from the right child to the left.
    fn shift_left(&mut self, row: usize);
    /// Loss of the whole node; valid after `begin`.
    fn node_loss(&self) -> f64;
    /// Summed loss of both children, `None` when a child is not estimable.
    fn children_loss(&self) -> Option<f64>;
    fn is_pure(&self, _rows: &[usize]) -> bool {
        false
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct GrowParams {
    pub min_node: usize,
    pub mtry: usize,
    pub max_depth: usize,
}

struct Grower<'a, C, F> {
    s: &'a DMatrix<f64>,
    params: GrowParams,
    crit: &'a mut C,
    make_leaf: F,
    goes_left: Vec<bool>,
}

/// Grow a tree on `rows` (bootstrap duplicates allowed). Nodes are stored
/// depth-first, left subtree first; the root is node 0.
pub(crate) fn grow<C, L, F>(
    s: &DMatrix<f64>,
    rows: Vec<usize>,
    params: GrowParams,
    crit: &mut C,
    make_leaf: F,
    rng: &mut Rng,
) -> Vec<Node<L>>
where
    C: SplitCriterion,
    F: FnMut(&[usize]) -> L,
{
    // when most features are tried at every node, sort once and let children
    // inherit the order through stable partitions
    let sorted = if 2 * params.mtry >= s.ncols() {
        (0..s.ncols()).map(|j| sort_by_feature(s, &rows, j)).collect()
    } else {
        Vec::new()
    };
    let mut g = Grower {
        s,
        params,
        crit,
        make_leaf,
        goes_left: vec![false; s.nrows()],
    };
    let mut nodes = Vec::new();
    g.grow_node(rows, sorted, 0, &mut nodes, rng);
    nodes
}

impl<C: SplitCriterion, F> Grower<'_, C, F> {
    fn grow_node<L>(
        &mut self,
        rows: Vec<usize>,
        sorted: Vec<Vec<usize>>,
        depth: usize,
        nodes: &mut Vec<Node<L>>,
        rng: &mut Rng,
    ) -> usize
    where
        F: FnMut(&[usize]) -> L,
    {
        let id = nodes.len();
        let split = if rows.len() >= 2 * self.params.min_node
            && depth < self.params.max_depth
            && !self.crit.is_pure(&rows)
        {
            self.best_split(&rows, &sorted, rng)
        } else {
            None
        };
        match split {
            None => {
                nodes.push(Node::Leaf((self.make_leaf)(&rows)));
            }
            Some((feature, threshold, gain)) => {
                nodes.push(Node::Split {
                    feature,
                    threshold,
                    gain,
                    left: 0,
                    right: 0,
                });
                for &i in &rows {
                    self.goes_left[i] = self.s[(i, feature)] <= threshold;
                }
                let (l, r): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&i| self.goes_left[i]);
                let (sl, sr): (Vec<Vec<usize>>, Vec<Vec<usize>>) = sorted
                    .into_iter()
                    .map(|v| v.into_iter().partition(|&i| self.goes_left[i]))
                    .unzip();
                let left = self.grow_node(l, sl, depth + 1, nodes, rng);
                let right = self.grow_node(r, sr, depth + 1, nodes, rng);
                if let Node::Split {
                    left: lslot,
                    right: rslot,
                    ..
                } = &mut nodes[id]
                {
                    *lslot = left;
                    *rslot = right;
                }
            }
        }
        id
    }

    fn best_split(&mut self, rows: &[usize], presorted: &[Vec<usize>], rng: &mut Rng) -> Option<(usize, f64, f64)> {
        let p = self.s.ncols();
        let features: Vec<usize> = if self.params.mtry >= p {
            (0..p).collect()
        } else {
            let mut f = sample(rng, p, self.params.mtry).into_vec();
            f.sort_unstable();
            f
        };
        let min = self.params.min_node;
        let mut best: Option<(usize, f64, f64, f64)> = None;
        for &j in &features {
            let col = self.s.column(j);
            let owned;
            let sorted = if presorted.is_empty() {
                owned = sort_by_feature(self.s, rows, j);
                &owned
            } else {
                &presorted[j]
            };
            let n = sorted.len();
            self.crit.begin(sorted);
            let parent = self.crit.node_loss();
            for i in 0..n - 1 {
                self.crit.shift_left(sorted[i]);
                let nl = i + 1;
                if nl < min {
                    continue;
                }
                if n - nl < min {
                    break;
                }
                let (a, b) = (col[sorted[i]], col[sorted[i + 1]]);
                if a == b {
                    continue;
                }
                let Some(loss) = self.crit.children_loss() else {
                    continue;
                };
                if best.is_none_or(|(_, _, bl, _)| loss < bl) {
                    let mut mid = a + (b - a) / 2.0;
                    if mid >= b {
                        mid = a;
                    }
                    best = Some((j, mid, loss, parent - loss));
                }
            }
        }
        best.map(|(j, c, _, gain)| (j, c, gain))
    }
}

/// `rows` ordered by `(s[row, j], row)`.
fn sort_by_feature(s: &DMatrix<f64>, rows: &[usize], j: usize) -> Vec<usize> {
    let col = s.column(j);
    let mut keyed: Vec<(f64, usize)> = rows.iter().map(|&i| (col[i], i)).collect();
    keyed.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, i)| i).collect()
}

/// Row draws for an iid bootstrap of size `t`.
pub(crate) fn iid_bootstrap(rng: &mut Rng, t: usize) -> Vec<usize> {
    use rand::Rng as _;
    (0..t).map(|_| rng.random_range(0..t)).collect()
}

/// Contiguous blocks of length `block` with uniform starts, concatenated
/// and truncated to `t`. With `block = 1` the draws equal [`iid_bootstrap`].
pub(crate) fn block_bootstrap(rng: &mut Rng, t: usize, block: usize) -> Vec<usize> {
    use rand::Rng as _;
    let block = block.clamp(1, t);
    let mut out = Vec::with_capacity(t + block);
    for _ in 0..t.div_ceil(block) {
        let start = rng.random_range(0..t - block + 1);
        out.extend(start..start + block);
    }
    out.truncate(t);
    out
}

/// Rows of `0..t` absent from `drawn`.
pub(crate) fn out_of_bag(drawn: &[usize], t: usize) -> Vec<usize> {
    let mut seen = vec![false; t];
    for &i in drawn {
        seen[i] = true;
    }
    (0..t).filter(|&i| !seen[i]).collect()
}
