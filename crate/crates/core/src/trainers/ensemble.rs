//! Random forests and least-squares gradient boosting over CART trees.

use rand::seq::index::sample;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::cart::{fit_rows, CartParams};
use super::{design, mean, TrainError};
use crate::data::Dataset;
use crate::model_ir::{ForestModel, GbmModel, Task};

#[derive(Clone, Debug, PartialEq)]
pub struct ForestParams {
    pub trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Fraction of rows each tree is trained on, drawn without replacement.
    pub sample_fraction: f64,
    pub feature_subsample: Option<usize>,
    pub task: Task,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            trees: 10,
            max_depth: 4,
            min_leaf: 5,
            sample_fraction: 0.8,
            feature_subsample: None,
            task: Task::Regression,
            seed: 0,
        }
    }
}

pub fn train_forest(data: &Dataset, outcome: &str, params: &ForestParams) -> Result<ForestModel, TrainError> {
    if params.trees == 0 || !(params.sample_fraction > 0.0 && params.sample_fraction <= 1.0) {
        return Err(TrainError::InvalidParameter(format!("{params:?}")));
    }
    let (z, y) = design(data, outcome)?;
    let n = z.len();
    let take = ((params.sample_fraction * n as f64).ceil() as usize).clamp(1, n);
    let mut master = ChaCha8Rng::seed_from_u64(params.seed);
    let seeds: Vec<u64> = (0..params.trees).map(|_| master.next_u64()).collect();
    let trees = seeds
        .par_iter()
        .map(|&s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let mut rows = if take == n {
                (0..n).collect()
            } else {
                sample(&mut rng, n, take).into_vec()
            };
            rows.sort_unstable();
            let cart = CartParams {
                max_depth: params.max_depth,
                min_leaf: params.min_leaf,
                task: params.task,
                feature_subsample: params.feature_subsample,
                seed: rng.next_u64(),
            };
            fit_rows(&z, &y, &rows, &cart)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ForestModel { trees })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GbmParams {
    pub trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub learning_rate: f64,
}

impl Default for GbmParams {
    fn default() -> Self {
        Self {
            trees: 20,
            max_depth: 3,
            min_leaf: 5,
            learning_rate: 0.1,
        }
    }
}

/// Least-squares boosting: the bias is the outcome mean, each tree is fit
/// to the current residuals and enters with weight equal to the learning
/// rate.
pub fn train_gbm(data: &Dataset, outcome: &str, params: &GbmParams) -> Result<GbmModel, TrainError> {
    if !(params.learning_rate >= 0.0 && params.learning_rate <= 1.0) {
        return Err(TrainError::InvalidParameter(format!("learning rate {}", params.learning_rate)));
    }
    let (z, y) = design(data, outcome)?;
    let rows: Vec<usize> = (0..z.len()).collect();
    let bias = mean(&y);
    let mut pred = vec![bias; y.len()];
    let cart = CartParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
        task: Task::Regression,
        feature_subsample: None,
        seed: 0,
    };
    let mut trees = Vec::with_capacity(params.trees);
    for _ in 0..params.trees {
        let resid: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
        let tree = fit_rows(&z, &resid, &rows, &cart)?;
        for (p, zi) in pred.iter_mut().zip(&z) {
            *p += params.learning_rate * tree.predict(zi);
        }
        trees.push(tree);
    }
    Ok(GbmModel {
        weights: vec![params.learning_rate; trees.len()],
        trees,
        bias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainers::train_cart;

    fn data() -> Dataset {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 * 0.37).sin(), (i % 7) as f64]).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] * 2.0 + if r[1] > 3.0 { 1.0 } else { 0.0 }).collect();
        Dataset::new(vec!["a".into(), "b".into()], vec![], x, vec![], vec![("y".into(), y)]).unwrap()
    }

    #[test]
    fn full_sample_forest_equals_cart() {
        let d = data();
        let p = ForestParams {
            trees: 3,
            sample_fraction: 1.0,
            min_leaf: 1,
            ..ForestParams::default()
        };
        let f = train_forest(&d, "y", &p).unwrap();
        let c = train_cart(
            &d,
            "y",
            &CartParams {
                max_depth: p.max_depth,
                min_leaf: 1,
                ..CartParams::default()
            },
        )
        .unwrap();
        for i in 0..d.len() {
            assert!((f.predict(&d.joint(i)) - c.predict(&d.joint(i))).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_learning_rate_predicts_mean() {
        let d = data();
        let g = train_gbm(
            &d,
            "y",
            &GbmParams {
                learning_rate: 0.0,
                ..GbmParams::default()
            },
        )
        .unwrap();
        let m = mean(d.outcome("y").unwrap());
        for i in 0..d.len() {
            assert_eq!(g.predict(&d.joint(i)), m);
        }
    }
}
