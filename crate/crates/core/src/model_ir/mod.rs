//! Portable representations of trained predictive models.
//!
//! Every model takes a joint input `z = (x, w)`: the `n` decision features
//! first, then the `p` contextual features. [`PredictiveModel::predict`] is
//! the reference predictor that every embedding is checked against.

mod document;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use document::{from_document, to_document, SchemaError, DOCUMENT_FORMAT, DOCUMENT_VERSION};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelIrError {
    #[error("dimension mismatch: expected {expected} {what}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

/// Names and data-derived box bounds of the decision (`x`) and contextual
/// (`w`) features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpace {
    pub x_names: Vec<String>,
    pub w_names: Vec<String>,
    pub x_bounds: Vec<(f64, f64)>,
    pub w_bounds: Vec<(f64, f64)>,
}

impl FeatureSpace {
    pub fn n(&self) -> usize {
        self.x_names.len()
    }

    pub fn p(&self) -> usize {
        self.w_names.len()
    }

    pub fn dim(&self) -> usize {
        self.n() + self.p()
    }

    /// Box bounds over the joint input `z = (x, w)`.
    pub fn joint_bounds(&self) -> Vec<(f64, f64)> {
        self.x_bounds.iter().chain(&self.w_bounds).copied().collect()
    }

    pub fn name(&self, j: usize) -> &str {
        if j < self.n() {
            &self.x_names[j]
        } else {
            &self.w_names[j - self.n()]
        }
    }
}

/// `β0 + βxᵀx + βwᵀw`. For classification the value is a signed margin and
/// the label is 1 when the margin is non-negative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub beta_x: Vec<f64>,
    pub beta_w: Vec<f64>,
    pub task: Task,
}

impl LinearModel {
    pub fn margin(&self, z: &[f64]) -> f64 {
        let n = self.beta_x.len();
        self.intercept
            + dot(&self.beta_x, &z[..n])
            + dot(&self.beta_w, &z[n..n + self.beta_w.len()])
    }

    pub fn predict(&self, z: &[f64]) -> f64 {
        let m = self.margin(z);
        match self.task {
            Task::Regression => m,
            Task::Classification => {
                if m >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.beta_x.iter().chain(&self.beta_w).copied().collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `a·z ≤ b`
    Left,
    /// `a·z > b`
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "index")]
pub enum NodeRef {
    Split(usize),
    Leaf(usize),
}

/// Sends `z` left when `coefficients·z ≤ rhs`. Coefficients are sparse over
/// the joint input; axis-parallel splits have a single entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub coefficients: Vec<(usize, f64)>,
    pub rhs: f64,
    pub left: NodeRef,
    pub right: NodeRef,
}

impl Split {
    pub fn activity(&self, z: &[f64]) -> f64 {
        self.coefficients.iter().map(|&(j, a)| a * z[j]).sum()
    }

    pub fn goes_left(&self, z: &[f64]) -> bool {
        self.activity(z) <= self.rhs
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub prediction: f64,
    /// Splits from the root to this leaf and the side taken at each.
    pub path: Vec<(usize, Side)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TreeDoc", into = "TreeDoc")]
pub struct TreeModel {
    splits: Vec<Split>,
    leaves: Vec<Leaf>,
    root: NodeRef,
    task: Task,
}

#[derive(Serialize, Deserialize)]
struct TreeDoc {
    task: Task,
    root: NodeRef,
    splits: Vec<Split>,
    leaf_values: Vec<f64>,
}

impl TryFrom<TreeDoc> for TreeModel {
    type Error = ModelIrError;
    fn try_from(d: TreeDoc) -> Result<Self, Self::Error> {
        TreeModel::new(d.splits, d.leaf_values, d.root, d.task)
    }
}

impl From<TreeModel> for TreeDoc {
    fn from(t: TreeModel) -> Self {
        TreeDoc {
            task: t.task,
            root: t.root,
            leaf_values: t.leaves.iter().map(|l| l.prediction).collect(),
            splits: t.splits,
        }
    }
}

impl TreeModel {
    /// Builds a tree from its split nodes and leaf values, deriving each
    /// leaf's path. Every node must be reachable from `root` exactly once.
    pub fn new(splits: Vec<Split>, leaf_values: Vec<f64>, root: NodeRef, task: Task) -> Result<Self, ModelIrError> {
        let mut leaves: Vec<Option<Leaf>> = vec![None; leaf_values.len()];
        let mut seen_split = vec![false; splits.len()];
        let mut stack = vec![(root, Vec::new())];
        while let Some((node, path)) = stack.pop() {
            match node {
                NodeRef::Leaf(i) => {
                    let slot = leaves
                        .get_mut(i)
                        .ok_or_else(|| ModelIrError::InvalidTree(format!("leaf {i} out of range")))?;
                    if slot.is_some() {
                        return Err(ModelIrError::InvalidTree(format!("leaf {i} referenced twice")));
                    }
                    *slot = Some(Leaf {
                        prediction: leaf_values[i],
                        path,
                    });
                }
                NodeRef::Split(s) => {
                    let split = splits
                        .get(s)
                        .ok_or_else(|| ModelIrError::InvalidTree(format!("split {s} out of range")))?;
                    if std::mem::replace(&mut seen_split[s], true) {
                        return Err(ModelIrError::InvalidTree(format!("split {s} referenced twice")));
                    }
                    if split.coefficients.is_empty() || !split.rhs.is_finite() {
                        return Err(ModelIrError::InvalidTree(format!("split {s} is degenerate")));
                    }
                    let mut right = path.clone();
                    right.push((s, Side::Right));
                    let mut left = path;
                    left.push((s, Side::Left));
                    stack.push((split.right, right));
                    stack.push((split.left, left));
                }
            }
        }
        if let Some(s) = seen_split.iter().position(|v| !v) {
            return Err(ModelIrError::InvalidTree(format!("split {s} unreachable from root")));
        }
        let leaves = leaves
            .into_iter()
            .enumerate()
            .map(|(i, l)| l.ok_or_else(|| ModelIrError::InvalidTree(format!("leaf {i} unreachable from root"))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            splits,
            leaves,
            root,
            task,
        })
    }

    /// Tree with a single leaf.
    pub fn constant(value: f64, task: Task) -> Self {
        Self::new(Vec::new(), vec![value], NodeRef::Leaf(0), task).expect("single leaf is valid")
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn leaves(&self) -> &[Leaf] {
        &self.leaves
    }

    pub fn root(&self) -> NodeRef {
        self.root
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn leaf_index(&self, z: &[f64]) -> usize {
        let mut node = self.root;
        loop {
            match node {
                NodeRef::Leaf(i) => return i,
                NodeRef::Split(s) => {
                    let sp = &self.splits[s];
                    node = if sp.goes_left(z) { sp.left } else { sp.right };
                }
            }
        }
    }

    pub fn predict(&self, z: &[f64]) -> f64 {
        self.leaves[self.leaf_index(z)].prediction
    }

    pub fn depth(&self) -> usize {
        self.leaves.iter().map(|l| l.path.len()).max().unwrap_or(0)
    }

    pub fn max_feature(&self) -> Option<usize> {
        self.splits
            .iter()
            .flat_map(|s| s.coefficients.iter().map(|&(j, _)| j))
            .max()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeModel>,
}

impl ForestModel {
    pub fn predict(&self, z: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(z)).sum::<f64>() / self.trees.len() as f64
    }
}

/// `bias + Σ weights[i] · trees[i](z)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbmModel {
    pub trees: Vec<TreeModel>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl GbmModel {
    pub fn predict(&self, z: &[f64]) -> f64 {
        self.bias
            + self
                .trees
                .iter()
                .zip(&self.weights)
                .map(|(t, w)| w * t.predict(z))
                .sum::<f64>()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MlpOutput {
    Linear,
    Sigmoid,
    SoftmaxArgmax,
}

/// Dense layer `W v + b`; `weights[i]` is the row for output node `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn outputs(&self) -> usize {
        self.bias.len()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| b + dot(row, v))
            .collect()
    }
}

/// Feed-forward network with ReLU hidden layers; the last layer is the
/// output layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
    pub output: MlpOutput,
}

/// Intermediate values of one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardPass {
    /// Pre-activations of each hidden layer.
    pub pre: Vec<Vec<f64>>,
    /// Post-ReLU values of each hidden layer.
    pub post: Vec<Vec<f64>>,
    /// Output-layer values before the output transform.
    pub logits: Vec<f64>,
}

impl MlpModel {
    pub fn validate(&self) -> Result<(), ModelIrError> {
        if self.layers.len() < 2 {
            return Err(ModelIrError::InvalidNetwork("need at least one hidden layer".into()));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.weights.len() != layer.bias.len() || layer.bias.is_empty() {
                return Err(ModelIrError::InvalidNetwork(format!(
                    "layer {l}: {} weight rows but {} biases",
                    layer.weights.len(),
                    layer.bias.len()
                )));
            }
            let width = layer.inputs();
            if layer.weights.iter().any(|r| r.len() != width) {
                return Err(ModelIrError::InvalidNetwork(format!("layer {l}: ragged weight rows")));
            }
            if l > 0 && width != self.layers[l - 1].outputs() {
                return Err(ModelIrError::InvalidNetwork(format!(
                    "layer {l} expects {width} inputs but layer {} has {} outputs",
                    l - 1,
                    self.layers[l - 1].outputs()
                )));
            }
        }
        let out = self.layers.last().map_or(0, Layer::outputs);
        if matches!(self.output, MlpOutput::Linear | MlpOutput::Sigmoid) && out != 1 {
            return Err(ModelIrError::InvalidNetwork(format!("scalar output expected, got {out}")));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, Layer::inputs)
    }

    pub fn forward(&self, z: &[f64]) -> ForwardPass {
        let mut pre = Vec::with_capacity(self.layers.len() - 1);
        let mut post = Vec::with_capacity(self.layers.len() - 1);
        let mut v = z.to_vec();
        for layer in &self.layers[..self.layers.len() - 1] {
            let a = layer.apply(&v);
            v = a.iter().map(|&t| t.max(0.0)).collect();
            pre.push(a);
            post.push(v.clone());
        }
        let logits = self.layers.last().expect("validated").apply(&v);
        ForwardPass { pre, post, logits }
    }

    pub fn predict(&self, z: &[f64]) -> f64 {
        let logits = self.forward(z).logits;
        match self.output {
            MlpOutput::Linear => logits[0],
            MlpOutput::Sigmoid => sigmoid(logits[0]),
            MlpOutput::SoftmaxArgmax => argmax(&logits) as f64,
        }
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelShape {
    Linear(LinearModel),
    Tree(TreeModel),
    Forest(ForestModel),
    Gbm(GbmModel),
    Mlp(MlpModel),
}

/// A trained model for one outcome together with its feature space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictiveModel {
    pub outcome: String,
    pub features: FeatureSpace,
    pub shape: ModelShape,
}

impl PredictiveModel {
    pub fn new(outcome: impl Into<String>, features: FeatureSpace, shape: ModelShape) -> Self {
        Self {
            outcome: outcome.into(),
            features,
            shape,
        }
    }

    /// Prediction at decision `x` and context `w`: a real value for
    /// regression, a probability for sigmoid networks and trees trained on
    /// labels, a {0,1} label for linear classifiers, and the winning class
    /// index for multi-class networks.
    pub fn predict(&self, x: &[f64], w: &[f64]) -> Result<f64, ModelIrError> {
        if x.len() != self.features.n() {
            return Err(ModelIrError::DimensionMismatch {
                what: "decision features",
                expected: self.features.n(),
                got: x.len(),
            });
        }
        if w.len() != self.features.p() {
            return Err(ModelIrError::DimensionMismatch {
                what: "context features",
                expected: self.features.p(),
                got: w.len(),
            });
        }
        let z: Vec<f64> = x.iter().chain(w).copied().collect();
        Ok(self.predict_joint(&z))
    }

    /// Prediction on a joint input already laid out as `(x, w)`.
    pub fn predict_joint(&self, z: &[f64]) -> f64 {
        match &self.shape {
            ModelShape::Linear(m) => m.predict(z),
            ModelShape::Tree(t) => t.predict(z),
            ModelShape::Forest(f) => f.predict(z),
            ModelShape::Gbm(g) => g.predict(z),
            ModelShape::Mlp(m) => m.predict(z),
        }
    }

    /// Checks that the shape's dimensions agree with the feature space.
    pub fn validate(&self) -> Result<(), ModelIrError> {
        let (n, p) = (self.features.n(), self.features.p());
        let dim = n + p;
        let check_tree = |t: &TreeModel| match t.max_feature() {
            Some(j) if j >= dim => Err(ModelIrError::DimensionMismatch {
                what: "features referenced by splits",
                expected: dim,
                got: j + 1,
            }),
            _ => Ok(()),
        };
        match &self.shape {
            ModelShape::Linear(m) => {
                if m.beta_x.len() != n {
                    return Err(ModelIrError::DimensionMismatch {
                        what: "x coefficients",
                        expected: n,
                        got: m.beta_x.len(),
                    });
                }
                if m.beta_w.len() != p {
                    return Err(ModelIrError::DimensionMismatch {
                        what: "w coefficients",
                        expected: p,
                        got: m.beta_w.len(),
                    });
                }
            }
            ModelShape::Tree(t) => check_tree(t)?,
            ModelShape::Forest(f) => {
                if f.trees.is_empty() {
                    return Err(ModelIrError::InvalidTree("forest has no trees".into()));
                }
                f.trees.iter().try_for_each(check_tree)?;
            }
            ModelShape::Gbm(g) => {
                if g.trees.len() != g.weights.len() {
                    return Err(ModelIrError::DimensionMismatch {
                        what: "boosting weights",
                        expected: g.trees.len(),
                        got: g.weights.len(),
                    });
                }
                g.trees.iter().try_for_each(check_tree)?;
            }
            ModelShape::Mlp(m) => {
                m.validate()?;
                if m.input_dim() != dim {
                    return Err(ModelIrError::DimensionMismatch {
                        what: "network inputs",
                        expected: dim,
                        got: m.input_dim(),
                    });
                }
            }
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(n: usize, p: usize) -> FeatureSpace {
        FeatureSpace {
            x_names: (0..n).map(|i| format!("x{i}")).collect(),
            w_names: (0..p).map(|i| format!("w{i}")).collect(),
            x_bounds: vec![(0.0, 1.0); n],
            w_bounds: vec![(0.0, 1.0); p],
        }
    }

    pub(crate) fn stump(b: f64, lo: f64, hi: f64) -> TreeModel {
        TreeModel::new(
            vec![Split {
                coefficients: vec![(0, 1.0)],
                rhs: b,
                left: NodeRef::Leaf(0),
                right: NodeRef::Leaf(1),
            }],
            vec![lo, hi],
            NodeRef::Split(0),
            Task::Regression,
        )
        .unwrap()
    }

    #[test]
    fn linear_prediction() {
        let m = PredictiveModel::new(
            "y",
            space(2, 0),
            ModelShape::Linear(LinearModel {
                intercept: 1.0,
                beta_x: vec![2.0, -1.0],
                beta_w: vec![],
                task: Task::Regression,
            }),
        );
        assert_eq!(m.predict(&[1.0, 1.0], &[]).unwrap(), 2.0);
        assert!(matches!(
            m.predict(&[1.0], &[]),
            Err(ModelIrError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn stump_prediction_and_paths() {
        let t = stump(0.5, 0.2, 0.8);
        assert_eq!(t.predict(&[0.3]), 0.2);
        assert_eq!(t.predict(&[0.5]), 0.2);
        assert_eq!(t.predict(&[0.51]), 0.8);
        assert_eq!(t.leaves()[1].path, vec![(0, Side::Right)]);
    }

    #[test]
    fn relu_kills_negative_input() {
        let m = MlpModel {
            layers: vec![
                Layer {
                    weights: vec![vec![1.0]],
                    bias: vec![0.0],
                },
                Layer {
                    weights: vec![vec![1.0]],
                    bias: vec![0.0],
                },
            ],
            output: MlpOutput::Linear,
        };
        m.validate().unwrap();
        assert_eq!(m.predict(&[-2.0]), 0.0);
        assert_eq!(m.predict(&[3.0]), 3.0);
    }

    #[test]
    fn tree_rejects_shared_leaf() {
        let r = TreeModel::new(
            vec![Split {
                coefficients: vec![(0, 1.0)],
                rhs: 0.0,
                left: NodeRef::Leaf(0),
                right: NodeRef::Leaf(0),
            }],
            vec![1.0],
            NodeRef::Split(0),
            Task::Regression,
        );
        assert!(matches!(r, Err(ModelIrError::InvalidTree(_))));
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[2.0]), 0);
    }
}
