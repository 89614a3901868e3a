//! A simulated palatability score for food baskets and a generator of
//! score-balanced training data.
//!
//! The score is a logistic squash of a smooth utility of the food-group
//! shares of the basket and its size:
//!
//! ```text
//! u(x) = −3 + 6·sat(T, 300) − 0.5·I + sat(D, 4) − 2·softplus((T − 1300) / 150)
//! I    = ((s_staple − 0.62) / 0.2)² + ((s_protein − 0.24) / 0.12)² + ((s_oil − 0.06) / 0.04)²
//! score(x) = 1 / (1 + exp(−u(x)))
//! ```
//!
//! `T` is the weight in grams of all food except salt and sugar, each share
//! is a group total over `T + 1`, `sat(v, s) = 1 − exp(−v/s)`, and
//! `D = Σ_k sat(x_k, 15)` is a smooth count of the commodities present.
//! Larger baskets taste better up to a point, unbalanced baskets are
//! penalized, and so are oversized ones.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, Distribution};

use super::{feature_name, NutritionTables, WfpError, SALT, SALT_GRAMS, SUGAR, SUGAR_GRAMS};
use crate::data::Dataset;

/// Name of the simulated outcome.
pub const PALATABILITY: &str = "palatability";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommodityGroup {
    Staple,
    /// Pulses, animal products and fortified blends.
    Protein,
    Oil,
    Fruit,
    /// Salt and sugar; fixed by the model and left out of the shares.
    Condiment,
}

/// Group of each commodity, by name.
pub fn basket_groups(foods: &[String]) -> Vec<CommodityGroup> {
    foods
        .iter()
        .map(|f| match f.as_str() {
            "Beans" | "Cheese" | "Fish" | "Meat" | "Dried skim milk" | "Milk" | "Lentils" | "Chickpeas"
            | "Corn-soya blend" | "Wheat-soya blend" => CommodityGroup::Protein,
            "Oil" => CommodityGroup::Oil,
            "Dates" => CommodityGroup::Fruit,
            "Salt" | "Sugar" => CommodityGroup::Condiment,
            _ => CommodityGroup::Staple,
        })
        .collect()
}

fn sat(v: f64, scale: f64) -> f64 {
    1.0 - (-v / scale).exp()
}

fn softplus(v: f64) -> f64 {
    if v > 30.0 {
        v
    } else {
        v.exp().ln_1p()
    }
}

/// Simulated palatability of basket `x` (grams per commodity, in the order
/// of `groups`), in `[0, 1]`.
pub fn ground_truth_palatability(x: &[f64], groups: &[CommodityGroup]) -> f64 {
    let (mut staple, mut protein, mut oil, mut total, mut present) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&g, &v) in groups.iter().zip(x) {
        let v = v.max(0.0);
        match g {
            CommodityGroup::Staple => staple += v,
            CommodityGroup::Protein => protein += v,
            CommodityGroup::Oil => oil += v,
            CommodityGroup::Fruit | CommodityGroup::Condiment => {}
        }
        if g != CommodityGroup::Condiment {
            total += v;
        }
        present += sat(v, 15.0);
    }
    let share = |v: f64| v / (total + 1.0);
    let imbalance = ((share(staple) - 0.62) / 0.2).powi(2)
        + ((share(protein) - 0.24) / 0.12).powi(2)
        + ((share(oil) - 0.06) / 0.04).powi(2);
    let u = -3.0 + 6.0 * sat(total, 300.0) - 0.5 * imbalance + sat(present, 4.0)
        - 2.0 * softplus((total - 1300.0) / 150.0);
    1.0 / (1.0 + (-u).exp())
}

/// Bin of a score among ten equal bins over `[0, 1]`.
pub fn score_bin(score: f64) -> usize {
    ((score * 10.0).floor().max(0.0) as usize).min(9)
}

/// Draws baskets: a food weight `T ~ U[0, 1000]` grams split into staple,
/// protein, oil and fruit by a Dirichlet draw centred on typical shares,
/// each group spread over one to three of its commodities. Salt and sugar
/// take their fixed amounts.
struct BasketSampler {
    members: Vec<Vec<usize>>,
    shares: Dirichlet<f64>,
    fixed: Vec<(usize, f64)>,
    n: usize,
}

impl BasketSampler {
    const GROUPS: [CommodityGroup; 4] = [
        CommodityGroup::Staple,
        CommodityGroup::Protein,
        CommodityGroup::Oil,
        CommodityGroup::Fruit,
    ];

    fn new(groups: &[CommodityGroup], fixed: Vec<(usize, f64)>) -> Self {
        let members = Self::GROUPS
            .iter()
            .map(|&g| (0..groups.len()).filter(|&k| groups[k] == g).collect())
            .collect();
        let shares = Dirichlet::new(&[0.62 * 30.0, 0.24 * 30.0, 0.06 * 30.0, 0.08 * 30.0]).expect("positive");
        Self {
            members,
            shares,
            fixed,
            n: groups.len(),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let total = rng.gen_range(0.0..1000.0);
        let shares = self.shares.sample(rng);
        let mut x = vec![0.0; self.n];
        for (items, share) in self.members.iter().zip(shares) {
            if items.is_empty() {
                continue;
            }
            let k = rng.gen_range(1..=items.len().min(3));
            let chosen = sample(rng, items.len(), k);
            let split: Vec<f64> = if k == 1 {
                vec![1.0]
            } else {
                Dirichlet::new_with_size(1.0, k).expect("k ≥ 2").sample(rng)
            };
            for (i, w) in chosen.iter().zip(split) {
                x[items[i]] += total * share * w;
            }
        }
        for &(c, grams) in &self.fixed {
            x[c] = grams;
        }
        x
    }
}

/// `samples` scored baskets with near-equal counts in each of ten score
/// bins. Baskets are drawn until every bin holds its quota or a draw budget
/// runs out; bins still short are topped up by resampling their own members
/// (or the nearest non-empty bin's). Salt and sugar are fixed in every
/// basket, matching the optimization model.
pub fn generate_dataset(tables: &NutritionTables, samples: usize, seed: u64) -> Result<Dataset, WfpError> {
    balanced(tables, samples, seed).map(|(d, _)| d)
}

/// The balanced dataset and how many rows of each bin were topped up.
fn balanced(tables: &NutritionTables, samples: usize, seed: u64) -> Result<(Dataset, [usize; 10]), WfpError> {
    if samples == 0 {
        return Err(WfpError::InvalidParameter("at least one sample is needed".into()));
    }
    let groups = basket_groups(&tables.foods);
    let fixed: Vec<(usize, f64)> = [(SALT, SALT_GRAMS), (SUGAR, SUGAR_GRAMS)]
        .into_iter()
        .filter_map(|(f, g)| tables.food_index(f).map(|c| (c, g)))
        .collect();
    let sampler = BasketSampler::new(&groups, fixed);
    let quota: Vec<usize> = (0..10).map(|b| samples / 10 + usize::from(b < samples % 10)).collect();
    let mut bins: Vec<Vec<(Vec<f64>, f64)>> = vec![Vec::new(); 10];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let budget = 50 * samples + 10_000;
    for _ in 0..budget {
        if bins.iter().zip(&quota).all(|(b, &q)| b.len() >= q) {
            break;
        }
        let x = sampler.draw(&mut rng);
        let s = ground_truth_palatability(&x, &groups);
        let b = score_bin(s);
        if bins[b].len() < quota[b] {
            bins[b].push((x, s));
        }
    }
    let mut topped = [0; 10];
    for b in 0..10 {
        let short = quota[b] - bins[b].len();
        topped[b] = short;
        if short == 0 {
            continue;
        }
        let donor = (0..10)
            .filter(|&d| !bins[d].is_empty())
            .min_by_key(|&d| (d.abs_diff(b), d))
            .expect("at least one basket was drawn");
        let extra: Vec<_> = (0..short)
            .map(|_| bins[donor][rng.gen_range(0..bins[donor].len())].clone())
            .collect();
        bins[b].extend(extra);
    }
    let (x, y): (Vec<Vec<f64>>, Vec<f64>) = bins.into_iter().flatten().unzip();
    let data = Dataset::new(
        tables.foods.iter().map(|f| feature_name(f)).collect(),
        Vec::new(),
        x,
        Vec::new(),
        vec![(PALATABILITY.into(), y)],
    )
    .map_err(|e| WfpError::InvalidParameter(e.to_string()))?;
    Ok((data, topped))
}
