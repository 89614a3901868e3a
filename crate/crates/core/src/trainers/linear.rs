//! Closed-form (ridge) least squares.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{design, is_binary, TrainError};
use crate::data::Dataset;
use crate::model_ir::{LinearModel, Task};

/// Least squares on centered features with an optional ridge penalty on
/// the slopes. The intercept is never penalized.
pub fn train_linear(data: &Dataset, outcome: &str, ridge: f64) -> Result<LinearModel, TrainError> {
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(TrainError::InvalidParameter(format!("ridge penalty {ridge}")));
    }
    let (z, y) = design(data, outcome)?;
    let (intercept, beta) = fit(&z, &y, ridge)?;
    Ok(split(intercept, beta, data.n(), Task::Regression))
}

/// Linear classifier: least squares on labels mapped to ±1. The label is 1
/// when the fitted margin is non-negative.
pub fn train_linear_classifier(data: &Dataset, outcome: &str, ridge: f64) -> Result<LinearModel, TrainError> {
    let (z, y) = design(data, outcome)?;
    if !is_binary(&y) {
        return Err(TrainError::NotBinaryLabels(outcome.to_string()));
    }
    let s: Vec<f64> = y.iter().map(|&v| 2.0 * v - 1.0).collect();
    let (intercept, beta) = fit(&z, &s, ridge)?;
    Ok(split(intercept, beta, data.n(), Task::Classification))
}

fn split(intercept: f64, beta: Vec<f64>, n: usize, task: Task) -> LinearModel {
    LinearModel {
        intercept,
        beta_x: beta[..n].to_vec(),
        beta_w: beta[n..].to_vec(),
        task,
    }
}

pub(crate) fn fit(z: &[Vec<f64>], y: &[f64], ridge: f64) -> Result<(f64, Vec<f64>), TrainError> {
    let n = z.len();
    let d = z[0].len();
    let nf = n as f64;
    let zbar: Vec<f64> = (0..d).map(|j| z.iter().map(|r| r[j]).sum::<f64>() / nf).collect();
    let ybar = y.iter().sum::<f64>() / nf;
    let zc = DMatrix::from_fn(n, d, |i, j| z[i][j] - zbar[j]);
    let yc = DVector::from_fn(n, |i, _| y[i] - ybar);
    let mut gram = zc.transpose() * &zc;
    for j in 0..d {
        gram[(j, j)] += ridge;
    }
    let rhs = zc.transpose() * &yc;
    let eig = SymmetricEigen::new(gram);
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let cutoff = top * 1e-12 * d.max(1) as f64;
    let mut coef = DVector::zeros(d);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let proj = v.dot(&rhs);
        if lambda <= cutoff {
            // Directions with no variance: zero slope unless the data asks for one.
            if ridge == 0.0 && top > 0.0 {
                return Err(TrainError::SingularDesign);
            }
            continue;
        }
        coef += v * (proj / lambda);
    }
    let beta: Vec<f64> = coef.iter().copied().collect();
    let intercept = ybar - beta.iter().zip(&zbar).map(|(b, m)| b * m).sum::<f64>();
    Ok((intercept, beta))
}
