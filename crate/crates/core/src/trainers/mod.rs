//! Desk-scale trainers for every supported model class, cross-validated
//! model selection, and outcome binarization.
//!
//! All trainers consume the joint input `z = (x, w)` of a [`Dataset`] and
//! are pure functions of the data, hyperparameters and seed.

mod binarize;
mod cart;
mod ensemble;
mod linear;
pub mod mlp;
mod select;
mod svm;

use thiserror::Error;

use crate::data::{DataError, Dataset};
use crate::model_ir::Task;

pub use binarize::{binarize_outcome, BoundDirection};
pub use cart::{train_cart, CartParams};
pub use ensemble::{train_forest, train_gbm, ForestParams, GbmParams};
pub use linear::{train_linear, train_linear_classifier};
pub use mlp::{train_mlp, MlpParams};
pub use select::{fit_candidate, select_model, Candidate, CvReport, ModelClass};
pub use svm::{train_svc, train_svr, SvmParams};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("design matrix is rank deficient; use a positive ridge penalty")]
    SingularDesign,
    #[error("outcome `{0}` is not binary (expected labels 0 and 1)")]
    NotBinaryLabels(String),
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Joint inputs and one outcome column.
pub(crate) fn design(data: &Dataset, outcome: &str) -> Result<(Vec<Vec<f64>>, Vec<f64>), TrainError> {
    let y = data.outcome(outcome)?.to_vec();
    if data.len() < 2 {
        return Err(TrainError::TooFewRows {
            needed: 2,
            got: data.len(),
        });
    }
    Ok((data.joint_rows(), y))
}

pub(crate) fn is_binary(y: &[f64]) -> bool {
    y.iter().all(|&v| v == 0.0 || v == 1.0)
}

/// Classification when every outcome value is 0 or 1.
pub fn infer_task(y: &[f64]) -> Task {
    if is_binary(y) {
        Task::Classification
    } else {
        Task::Regression
    }
}

/// Column means and standard deviations; zero deviations are reported as 1.
pub(crate) fn standardizer(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let d = rows.first().map_or(0, Vec::len);
    let n = rows.len() as f64;
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut sd = vec![0.0; d];
    for r in rows {
        for j in 0..d {
            sd[j] += (r[j] - mean[j]).powi(2);
        }
    }
    for s in &mut sd {
        *s = (*s / n).sqrt();
        if *s < 1e-12 {
            *s = 1.0;
        }
    }
    (mean, sd)
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
