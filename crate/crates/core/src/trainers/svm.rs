//! Linear support vector regression and classification by full-batch
//! subgradient descent on standardized features.
//!
//! The objective is `mean(loss) + ‖β‖² / (2·C·N)`; the step size decays as
//! `step / √t` and the best iterate seen is returned, so the reported
//! objective never increases with more iterations.

use super::{design, is_binary, standardizer, TrainError};
use crate::data::Dataset;
use crate::model_ir::{LinearModel, Task};

#[derive(Clone, Debug, PartialEq)]
pub struct SvmParams {
    /// Loss weight `C`.
    pub c: f64,
    /// Insensitivity width for regression, in outcome units.
    pub epsilon: f64,
    pub iterations: usize,
    pub step: f64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            epsilon: 0.01,
            iterations: 2000,
            step: 0.5,
        }
    }
}

pub fn train_svr(data: &Dataset, outcome: &str, params: &SvmParams) -> Result<LinearModel, TrainError> {
    check(params)?;
    let (z, y) = design(data, outcome)?;
    let (ym, ys) = {
        let (m, s) = standardizer(&y.iter().map(|&v| vec![v]).collect::<Vec<_>>());
        (m[0], s[0])
    };
    let t: Vec<f64> = y.iter().map(|v| (v - ym) / ys).collect();
    let eps = params.epsilon / ys;
    let loss = |m: f64, t: f64| ((m - t).abs() - eps).max(0.0);
    let dloss = |m: f64, t: f64| {
        let r = m - t;
        if r.abs() <= eps {
            0.0
        } else {
            r.signum()
        }
    };
    let (b0, beta) = descend(&z, &t, params, loss, dloss);
    let (intercept, beta) = unscale(&z, b0 * ys + ym, beta.iter().map(|b| b * ys).collect());
    Ok(split(intercept, beta, data.n(), Task::Regression))
}

pub fn train_svc(data: &Dataset, outcome: &str, params: &SvmParams) -> Result<LinearModel, TrainError> {
    check(params)?;
    let (z, y) = design(data, outcome)?;
    if !is_binary(&y) {
        return Err(TrainError::NotBinaryLabels(outcome.to_string()));
    }
    let s: Vec<f64> = y.iter().map(|&v| 2.0 * v - 1.0).collect();
    let loss = |m: f64, s: f64| (1.0 - s * m).max(0.0);
    let dloss = |m: f64, s: f64| if s * m < 1.0 { -s } else { 0.0 };
    let (b0, beta) = descend(&z, &s, params, loss, dloss);
    let (intercept, beta) = unscale(&z, b0, beta);
    Ok(split(intercept, beta, data.n(), Task::Classification))
}

fn check(p: &SvmParams) -> Result<(), TrainError> {
    if !(p.c > 0.0 && p.epsilon >= 0.0 && p.step > 0.0 && p.iterations > 0) {
        return Err(TrainError::InvalidParameter(format!("{p:?}")));
    }
    Ok(())
}

fn split(intercept: f64, beta: Vec<f64>, n: usize, task: Task) -> LinearModel {
    LinearModel {
        intercept,
        beta_x: beta[..n].to_vec(),
        beta_w: beta[n..].to_vec(),
        task,
    }
}

/// Maps coefficients fitted on standardized features back to raw features.
fn unscale(z: &[Vec<f64>], b0: f64, beta: Vec<f64>) -> (f64, Vec<f64>) {
    let (m, s) = standardizer(z);
    let raw: Vec<f64> = beta.iter().zip(&s).map(|(b, s)| b / s).collect();
    let intercept = b0 - raw.iter().zip(&m).map(|(b, m)| b * m).sum::<f64>();
    (intercept, raw)
}

fn descend(
    z: &[Vec<f64>],
    t: &[f64],
    p: &SvmParams,
    loss: impl Fn(f64, f64) -> f64,
    dloss: impl Fn(f64, f64) -> f64,
) -> (f64, Vec<f64>) {
    let (m, s) = standardizer(z);
    let zs: Vec<Vec<f64>> = z
        .iter()
        .map(|r| r.iter().zip(m.iter().zip(&s)).map(|(v, (m, s))| (v - m) / s).collect())
        .collect();
    let n = zs.len() as f64;
    let d = m.len();
    let reg = 1.0 / (p.c * n);
    let objective = |b0: f64, beta: &[f64]| {
        let l: f64 = zs
            .iter()
            .zip(t)
            .map(|(r, &ti)| loss(b0 + crate::model_ir::dot(beta, r), ti))
            .sum();
        l / n + 0.5 * reg * beta.iter().map(|b| b * b).sum::<f64>()
    };
    let mut b0 = 0.0;
    let mut beta = vec![0.0; d];
    let mut best = (objective(b0, &beta), b0, beta.clone());
    let mut g = vec![0.0; d];
    for it in 1..=p.iterations {
        let mut g0 = 0.0;
        g.iter_mut().zip(&beta).for_each(|(g, b)| *g = reg * b);
        for (r, &ti) in zs.iter().zip(t) {
            let dl = dloss(b0 + crate::model_ir::dot(&beta, r), ti) / n;
            if dl != 0.0 {
                g0 += dl;
                for (gj, rj) in g.iter_mut().zip(r) {
                    *gj += dl * rj;
                }
            }
        }
        let eta = p.step / (it as f64).sqrt();
        b0 -= eta * g0;
        for (b, gj) in beta.iter_mut().zip(&g) {
            *b -= eta * gj;
        }
        let obj = objective(b0, &beta);
        if obj < best.0 {
            best = (obj, b0, beta.clone());
        }
    }
    (best.1, best.2)
}
