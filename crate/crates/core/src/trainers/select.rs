//! k-fold cross-validated selection among model classes.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    infer_task, train_cart, train_forest, train_gbm, train_linear, train_linear_classifier, train_mlp, train_svc,
    train_svr, CartParams, ForestParams, GbmParams, MlpParams, SvmParams, TrainError,
};
use crate::data::Dataset;
use crate::model_ir::{MlpOutput, ModelShape, PredictiveModel, Task};

/// Model classes in tie-break precedence order, simplest first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelClass {
    Linear,
    Svm,
    Cart,
    Rf,
    Gbm,
    Mlp,
}

impl ModelClass {
    pub const ALL: [ModelClass; 6] = [Self::Linear, Self::Svm, Self::Cart, Self::Rf, Self::Gbm, Self::Mlp];

    pub fn name(self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Svm => "svm",
            Self::Cart => "cart",
            Self::Rf => "rf",
            Self::Gbm => "gbm",
            Self::Mlp => "mlp",
        }
    }
}

impl std::str::FromStr for ModelClass {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown model class `{s}`; expected one of linear, svm, cart, rf, gbm, mlp"))
    }
}

/// A model class with its hyperparameters. The task of tree-based and
/// network candidates is set from the data at fit time.
#[derive(Clone, Debug, PartialEq)]
pub enum Candidate {
    Linear { ridge: f64 },
    Svm(SvmParams),
    Cart(CartParams),
    Rf(ForestParams),
    Gbm(GbmParams),
    Mlp(MlpParams),
}

impl Candidate {
    pub fn class(&self) -> ModelClass {
        match self {
            Self::Linear { .. } => ModelClass::Linear,
            Self::Svm(_) => ModelClass::Svm,
            Self::Cart(_) => ModelClass::Cart,
            Self::Rf(_) => ModelClass::Rf,
            Self::Gbm(_) => ModelClass::Gbm,
            Self::Mlp(_) => ModelClass::Mlp,
        }
    }

    pub fn default_for(class: ModelClass) -> Self {
        match class {
            ModelClass::Linear => Self::Linear { ridge: 0.0 },
            ModelClass::Svm => Self::Svm(SvmParams::default()),
            ModelClass::Cart => Self::Cart(CartParams::default()),
            ModelClass::Rf => Self::Rf(ForestParams::default()),
            ModelClass::Gbm => Self::Gbm(GbmParams::default()),
            ModelClass::Mlp => Self::Mlp(MlpParams::default()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub task: Task,
    pub folds: usize,
    /// Mean validation MSE (regression) or misclassification rate
    /// (classification) per candidate, in the order given.
    pub scores: Vec<(ModelClass, f64)>,
    pub chosen: ModelClass,
}

/// Trains one candidate on all rows of `data`.
pub fn fit_candidate(candidate: &Candidate, data: &Dataset, outcome: &str, task: Task) -> Result<ModelShape, TrainError> {
    let classify = task == Task::Classification;
    Ok(match candidate {
        Candidate::Linear { ridge } => {
            let fit = |r: f64| {
                if classify {
                    train_linear_classifier(data, outcome, r)
                } else {
                    train_linear(data, outcome, r)
                }
            };
            // Constant or collinear columns are common in sampled data.
            let m = match fit(*ridge) {
                Err(TrainError::SingularDesign) => fit(1e-8)?,
                other => other?,
            };
            ModelShape::Linear(m)
        }
        Candidate::Svm(p) => ModelShape::Linear(if classify {
            train_svc(data, outcome, p)?
        } else {
            train_svr(data, outcome, p)?
        }),
        Candidate::Cart(p) => ModelShape::Tree(train_cart(data, outcome, &CartParams { task, ..p.clone() })?),
        Candidate::Rf(p) => ModelShape::Forest(train_forest(data, outcome, &ForestParams { task, ..p.clone() })?),
        Candidate::Gbm(p) => ModelShape::Gbm(train_gbm(data, outcome, p)?),
        Candidate::Mlp(p) => {
            let output = if classify { MlpOutput::Sigmoid } else { MlpOutput::Linear };
            ModelShape::Mlp(train_mlp(data, outcome, &MlpParams { output, ..p.clone() })?)
        }
    })
}

/// Fold of each row: rows are shuffled with `seed` and dealt round-robin.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % k;
    }
    fold
}

/// Scores every candidate by k-fold cross-validation and refits the best one
/// on all rows. Ties go to the earlier class in [`ModelClass`] order.
pub fn select_model(
    data: &Dataset,
    outcome: &str,
    candidates: &[Candidate],
    k: usize,
    seed: u64,
) -> Result<(PredictiveModel, CvReport), TrainError> {
    if candidates.is_empty() {
        return Err(TrainError::InvalidParameter("no candidate classes".into()));
    }
    if k < 2 || k > data.len() {
        return Err(TrainError::InvalidParameter(format!("{k} folds for {} rows", data.len())));
    }
    let y = data.outcome(outcome)?.to_vec();
    let task = infer_task(&y);
    let fold = fold_assignment(data.len(), k, seed);
    let mut scores = Vec::with_capacity(candidates.len());
    for cand in candidates {
        let per_fold = (0..k)
            .into_par_iter()
            .map(|f| {
                let train: Vec<usize> = (0..data.len()).filter(|&i| fold[i] != f).collect();
                let valid: Vec<usize> = (0..data.len()).filter(|&i| fold[i] == f).collect();
                let shape = fit_candidate(cand, &data.subset(&train), outcome, task)?;
                let model = PredictiveModel::new(outcome, data.feature_space(), shape);
                let err: f64 = valid
                    .iter()
                    .map(|&i| {
                        let p = model.predict_joint(&data.joint(i));
                        match task {
                            Task::Regression => (p - y[i]).powi(2),
                            Task::Classification => f64::from(u8::from((p >= 0.5) != (y[i] == 1.0))),
                        }
                    })
                    .sum();
                Ok(err / valid.len() as f64)
            })
            .collect::<Result<Vec<f64>, TrainError>>()?;
        scores.push((cand.class(), per_fold.iter().sum::<f64>() / k as f64));
    }
    let best = scores
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .expect("non-empty");
    let shape = fit_candidate(&candidates[best], data, outcome, task)?;
    let model = PredictiveModel::new(outcome, data.feature_space(), shape);
    Ok((
        model,
        CvReport {
            task,
            folds: k,
            chosen: candidates[best].class(),
            scores,
        },
    ))
}
