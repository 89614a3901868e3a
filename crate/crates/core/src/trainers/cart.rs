//! Greedy axis-parallel regression and classification trees.
//!
//! Candidate thresholds are midpoints between consecutive distinct feature
//! values. Regression splits minimize the summed squared error, classification
//! splits the weighted Gini impurity. Ties go to the lowest feature index and
//! then the lowest threshold. Leaves predict the mean outcome, which for 0/1
//! labels is the positive-class proportion.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{design, is_binary, TrainError};
use crate::data::Dataset;
use crate::model_ir::{NodeRef, Split, Task, TreeModel};

#[derive(Clone, Debug, PartialEq)]
pub struct CartParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub task: Task,
    /// Number of features examined at each split; `None` means all.
    pub feature_subsample: Option<usize>,
    pub seed: u64,
}

impl Default for CartParams {
    fn default() -> Self {
        Self {
            max_depth: 4,
            min_leaf: 1,
            task: Task::Regression,
            feature_subsample: None,
            seed: 0,
        }
    }
}

/// Minimum impurity decrease for a split to be accepted.
const MIN_GAIN: f64 = 1e-12;

pub fn train_cart(data: &Dataset, outcome: &str, params: &CartParams) -> Result<TreeModel, TrainError> {
    let (z, y) = design(data, outcome)?;
    let rows: Vec<usize> = (0..z.len()).collect();
    fit_rows(&z, &y, &rows, params)
}

/// Fits a tree on the listed rows of `z`.
pub(crate) fn fit_rows(z: &[Vec<f64>], y: &[f64], rows: &[usize], params: &CartParams) -> Result<TreeModel, TrainError> {
    if params.min_leaf == 0 {
        return Err(TrainError::InvalidParameter("min_leaf must be at least 1".into()));
    }
    if params.task == Task::Classification && !rows.iter().all(|&i| is_binary(&[y[i]])) {
        return Err(TrainError::NotBinaryLabels("classification tree".into()));
    }
    if rows.is_empty() {
        return Err(TrainError::TooFewRows { needed: 1, got: 0 });
    }
    let d = z[0].len();
    let mut b = Builder {
        z,
        y,
        params,
        d,
        rng: ChaCha8Rng::seed_from_u64(params.seed),
        splits: Vec::new(),
        leaves: Vec::new(),
    };
    let root = b.grow(rows.to_vec(), 0);
    Ok(TreeModel::new(b.splits, b.leaves, root, params.task).expect("builder produces valid trees"))
}

struct Builder<'a> {
    z: &'a [Vec<f64>],
    y: &'a [f64],
    params: &'a CartParams,
    d: usize,
    rng: ChaCha8Rng,
    splits: Vec<Split>,
    leaves: Vec<f64>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Builder<'_> {
    fn leaf(&mut self, rows: &[usize]) -> NodeRef {
        let v = rows.iter().map(|&i| self.y[i]).sum::<f64>() / rows.len() as f64;
        self.leaves.push(v);
        NodeRef::Leaf(self.leaves.len() - 1)
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> NodeRef {
        if depth >= self.params.max_depth || rows.len() < 2 * self.params.min_leaf {
            return self.leaf(&rows);
        }
        let parent = self.impurity_total(&rows);
        if parent <= MIN_GAIN {
            return self.leaf(&rows);
        }
        let features: Vec<usize> = match self.params.feature_subsample {
            Some(k) if k < self.d => {
                let mut f = sample(&mut self.rng, self.d, k.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..self.d).collect(),
        };
        let mut best: Option<Candidate> = None;
        for &j in &features {
            if let Some(c) = self.best_split(&rows, j) {
                if best.as_ref().map_or(true, |b| c.score < b.score - MIN_GAIN) {
                    best = Some(c);
                }
            }
        }
        let Some(best) = best.filter(|b| parent - b.score > MIN_GAIN) else {
            return self.leaf(&rows);
        };
        let (left, right): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.z[i][best.feature] <= best.threshold);
        let id = self.splits.len();
        self.splits.push(Split {
            coefficients: vec![(best.feature, 1.0)],
            rhs: best.threshold,
            left: NodeRef::Leaf(usize::MAX),
            right: NodeRef::Leaf(usize::MAX),
        });
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        self.splits[id].left = l;
        self.splits[id].right = r;
        NodeRef::Split(id)
    }

    /// Impurity of a node scaled by its size (SSE, or count × Gini).
    fn impurity_total(&self, rows: &[usize]) -> f64 {
        let n = rows.len() as f64;
        let s: f64 = rows.iter().map(|&i| self.y[i]).sum();
        match self.params.task {
            Task::Regression => {
                let q: f64 = rows.iter().map(|&i| self.y[i] * self.y[i]).sum();
                (q - s * s / n).max(0.0)
            }
            Task::Classification => gini_total(s, n),
        }
    }

    fn best_split(&self, rows: &[usize], j: usize) -> Option<Candidate> {
        let mut order: Vec<(f64, f64)> = rows.iter().map(|&i| (self.z[i][j], self.y[i])).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = order.len();
        let total_s: f64 = order.iter().map(|p| p.1).sum();
        let total_q: f64 = order.iter().map(|p| p.1 * p.1).sum();
        let min_leaf = self.params.min_leaf;
        let (mut ls, mut lq) = (0.0, 0.0);
        let mut best: Option<Candidate> = None;
        for k in 0..n - 1 {
            ls += order[k].1;
            lq += order[k].1 * order[k].1;
            let nl = k + 1;
            if order[k].0 == order[k + 1].0 || nl < min_leaf || n - nl < min_leaf {
                continue;
            }
            let (nlf, nrf) = (nl as f64, (n - nl) as f64);
            let rs = total_s - ls;
            let score = match self.params.task {
                Task::Regression => {
                    let rq = total_q - lq;
                    (lq - ls * ls / nlf).max(0.0) + (rq - rs * rs / nrf).max(0.0)
                }
                Task::Classification => gini_total(ls, nlf) + gini_total(rs, nrf),
            };
            if best.as_ref().map_or(true, |b| score < b.score - MIN_GAIN) {
                let (a, c) = (order[k].0, order[k + 1].0);
                let mut threshold = 0.5 * (a + c);
                if threshold >= c {
                    threshold = a;
                }
                best = Some(Candidate {
                    feature: j,
                    threshold,
                    score,
                });
            }
        }
        best
    }
}

/// `n · Gini` for a node with `s` positives out of `n`.
fn gini_total(s: f64, n: f64) -> f64 {
    let p = s / n;
    n * 2.0 * p * (1.0 - p)
}
