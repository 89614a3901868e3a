//! ReLU networks trained by full-batch Adam on squared loss (linear output)
//! or log loss (sigmoid output).
//!
//! Inputs, and for regression the outcome, are standardized during training
//! and the scaling is folded back into the first and last layers, so the
//! returned network consumes raw features.
//!
//! Parameters are flattened layer by layer as the row-major weight matrix
//! followed by the bias vector; [`loss_and_gradient`] uses that order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{design, is_binary, standardizer, TrainError};
use crate::data::Dataset;
use crate::model_ir::{Layer, MlpModel, MlpOutput};

#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub output: MlpOutput,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: vec![8],
            epochs: 300,
            learning_rate: 0.01,
            output: MlpOutput::Linear,
            seed: 0,
        }
    }
}

/// Rows per gradient chunk. Fixed so the reduction order, and therefore the
/// result, does not depend on the thread count.
const CHUNK: usize = 512;

pub fn train_mlp(data: &Dataset, outcome: &str, params: &MlpParams) -> Result<MlpModel, TrainError> {
    if params.hidden.is_empty() || params.hidden.contains(&0) {
        return Err(TrainError::InvalidParameter("need at least one non-empty hidden layer".into()));
    }
    if params.output == MlpOutput::SoftmaxArgmax {
        return Err(TrainError::InvalidParameter("multi-class networks cannot be trained".into()));
    }
    if !(params.learning_rate > 0.0) {
        return Err(TrainError::InvalidParameter(format!("learning rate {}", params.learning_rate)));
    }
    let (z, y) = design(data, outcome)?;
    if params.output == MlpOutput::Sigmoid && !is_binary(&y) {
        return Err(TrainError::NotBinaryLabels(outcome.to_string()));
    }
    let (zm, zs) = standardizer(&z);
    let zn: Vec<Vec<f64>> = z
        .iter()
        .map(|r| r.iter().zip(zm.iter().zip(&zs)).map(|(v, (m, s))| (v - m) / s).collect())
        .collect();
    let (ym, ys) = match params.output {
        MlpOutput::Linear => {
            let (m, s) = standardizer(&y.iter().map(|&v| vec![v]).collect::<Vec<_>>());
            (m[0], s[0])
        }
        _ => (0.0, 1.0),
    };
    let yn: Vec<f64> = y.iter().map(|v| (v - ym) / ys).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut model = init(z[0].len(), &params.hidden, params.output, &mut rng);
    let mut theta = flatten(&model);
    let (b1, b2, eps) = (0.9, 0.999, 1e-8);
    let mut m1 = vec![0.0; theta.len()];
    let mut m2 = vec![0.0; theta.len()];
    for t in 1..=params.epochs {
        let (_, g) = loss_and_gradient(&model, &zn, &yn);
        let c1 = 1.0 - f64::powi(b1, t as i32);
        let c2 = 1.0 - f64::powi(b2, t as i32);
        for k in 0..theta.len() {
            m1[k] = b1 * m1[k] + (1.0 - b1) * g[k];
            m2[k] = b2 * m2[k] + (1.0 - b2) * g[k] * g[k];
            theta[k] -= params.learning_rate * (m1[k] / c1) / ((m2[k] / c2).sqrt() + eps);
        }
        model = unflatten(&model, &theta);
    }
    Ok(fold_scaling(model, &zm, &zs, ym, ys))
}

fn init(inputs: usize, hidden: &[usize], output: MlpOutput, rng: &mut ChaCha8Rng) -> MlpModel {
    let mut layers = Vec::new();
    let mut fan_in = inputs;
    for &width in hidden.iter().chain(std::iter::once(&1)) {
        let r = (6.0 / fan_in as f64).sqrt();
        layers.push(Layer {
            weights: (0..width)
                .map(|_| (0..fan_in).map(|_| rng.gen_range(-r..r)).collect())
                .collect(),
            bias: vec![0.0; width],
        });
        fan_in = width;
    }
    MlpModel { layers, output }
}

fn fold_scaling(mut model: MlpModel, zm: &[f64], zs: &[f64], ym: f64, ys: f64) -> MlpModel {
    let first = &mut model.layers[0];
    for (row, b) in first.weights.iter_mut().zip(&mut first.bias) {
        for (j, w) in row.iter_mut().enumerate() {
            *w /= zs[j];
            *b -= *w * zm[j];
        }
    }
    let last = model.layers.last_mut().expect("at least two layers");
    for (row, b) in last.weights.iter_mut().zip(&mut last.bias) {
        row.iter_mut().for_each(|w| *w *= ys);
        *b = *b * ys + ym;
    }
    model
}

pub fn flatten(model: &MlpModel) -> Vec<f64> {
    model
        .layers
        .iter()
        .flat_map(|l| l.weights.iter().flatten().chain(&l.bias).copied())
        .collect()
}

/// Rebuilds a network with the shape of `template` from flat parameters.
pub fn unflatten(template: &MlpModel, theta: &[f64]) -> MlpModel {
    let mut k = 0;
    let mut take = |len: usize| {
        let s = theta[k..k + len].to_vec();
        k += len;
        s
    };
    let layers = template
        .layers
        .iter()
        .map(|l| Layer {
            weights: (0..l.outputs()).map(|_| take(l.inputs())).collect(),
            bias: take(l.outputs()),
        })
        .collect();
    MlpModel {
        layers,
        output: template.output,
    }
}

/// Mean training loss and its gradient in flattened parameter order.
/// Squared loss is `½(ŷ − y)²`; log loss is taken on the output logit.
pub fn loss_and_gradient(model: &MlpModel, z: &[Vec<f64>], y: &[f64]) -> (f64, Vec<f64>) {
    let n = z.len() as f64;
    let size = model.layers.iter().map(|l| l.outputs() * (l.inputs() + 1)).sum();
    let parts: Vec<(f64, Vec<f64>)> = z
        .par_chunks(CHUNK)
        .zip(y.par_chunks(CHUNK))
        .map(|(zc, yc)| {
            let mut g = vec![0.0; size];
            let mut loss = 0.0;
            for (zi, &yi) in zc.iter().zip(yc) {
                loss += backprop(model, zi, yi, &mut g);
            }
            (loss, g)
        })
        .collect();
    let mut loss = 0.0;
    let mut grad = vec![0.0; size];
    for (l, g) in parts {
        loss += l;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    grad.iter_mut().for_each(|v| *v /= n);
    (loss / n, grad)
}

fn backprop(model: &MlpModel, z: &[f64], y: f64, grad: &mut [f64]) -> f64 {
    let pass = model.forward(z);
    let a = pass.logits[0];
    let (loss, mut delta) = match model.output {
        MlpOutput::Sigmoid => {
            // softplus(a) − y·a, written to avoid overflow
            let sp = a.max(0.0) + (-a.abs()).exp().ln_1p();
            (sp - y * a, vec![crate::model_ir::sigmoid(a) - y])
        }
        _ => (0.5 * (a - y).powi(2), vec![a - y]),
    };
    let mut offsets = Vec::with_capacity(model.layers.len());
    let mut off = 0;
    for l in &model.layers {
        offsets.push(off);
        off += l.outputs() * (l.inputs() + 1);
    }
    for li in (0..model.layers.len()).rev() {
        let layer = &model.layers[li];
        let input: &[f64] = if li == 0 { z } else { &pass.post[li - 1] };
        let base = offsets[li];
        let width = layer.inputs();
        for (i, &d) in delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let row = base + i * width;
            for (j, &v) in input.iter().enumerate() {
                grad[row + j] += d * v;
            }
            grad[base + layer.outputs() * width + i] += d;
        }
        if li > 0 {
            let pre = &pass.pre[li - 1];
            delta = (0..width)
                .map(|j| {
                    if pre[j] > 0.0 {
                        delta.iter().zip(&layer.weights).map(|(d, row)| d * row[j]).sum()
                    } else {
                        0.0
                    }
                })
                .collect();
        }
    }
    loss
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flatten_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = init(3, &[4, 2], MlpOutput::Linear, &mut rng);
        let theta = flatten(&m);
        assert_eq!(theta.len(), 4 * 4 + 2 * 5 + 3);
        assert_eq!(unflatten(&m, &theta), m);
    }

    #[test]
    fn learns_a_ramp() {
        let x: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 49.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| (r[0] - 0.5).max(0.0) * 3.0 + 1.0).collect();
        let d = Dataset::new(vec!["x".into()], vec![], x.clone(), vec![], vec![("y".into(), y.clone())]).unwrap();
        let p = MlpParams {
            epochs: 1500,
            learning_rate: 0.02,
            hidden: vec![6],
            ..MlpParams::default()
        };
        let m = train_mlp(&d, "y", &p).unwrap();
        let mse: f64 = x.iter().zip(&y).map(|(r, t)| (m.predict(r) - t).powi(2)).sum::<f64>() / 50.0;
        assert!(mse < 0.01, "mse {mse}");
    }
}
