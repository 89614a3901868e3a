//! Food-aid case study: a multi-commodity supply network feeding a ration
//! whose palatability is learned from simulated baskets.
//!
//! The optimization model buys commodities at source nodes, ships them
//! through transshipment nodes to delivery nodes, and chooses a daily ration
//! `x` (grams per person per day of each commodity) that meets nutrient
//! requirements, fixes salt and sugar, and keeps the learned palatability at
//! or above a threshold. All costs are per metric ton; `γ` converts grams to
//! tons.

mod experiments;
mod palatability;

use std::collections::VecDeque;

use conlearn_mio::Sense;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::embed::{OutcomeBinding, Role};
use crate::model_ir::{FeatureSpace, PredictiveModel};
use crate::pipeline::{ConceptualProblem, DecisionVar, KnownRow, LearnedOutcome, PipelineError, SolveReport};
use crate::trainers::TrainError;
use crate::trust_region::TrustRegionSpec;

pub use experiments::{
    run_clustering_experiment, run_trust_region_experiment, run_violation_limit_sweep, write_clustering_csv,
    write_trust_region_csv, write_violation_csv, ClusteringRow, ExperimentSetup, TrustRegionRow, ViolationRow,
};
pub use palatability::{basket_groups, generate_dataset, ground_truth_palatability, score_bin, CommodityGroup, PALATABILITY};

const NUTRIENT_VALUES: &str = include_str!("../../data/nutrient_values.csv");
const NUTRIENT_REQUIREMENTS: &str = include_str!("../../data/nutrient_requirements.csv");

pub const SALT: &str = "Salt";
pub const SUGAR: &str = "Sugar";
pub const SALT_GRAMS: f64 = 5.0;
pub const SUGAR_GRAMS: f64 = 20.0;

#[derive(Debug, Error)]
pub enum WfpError {
    #[error("delivery node {0} cannot be reached from any source")]
    NetworkDisconnected(String),
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("nutrient table: {0}")]
    Table(String),
    #[error("invalid setting: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Train(#[from] TrainError),
}

/// Nutrient content per gram of each commodity and the daily requirement
/// per person, both as printed in the shipped tables.
#[derive(Clone, Debug, PartialEq)]
pub struct NutritionTables {
    pub foods: Vec<String>,
    pub nutrients: Vec<String>,
    /// `values[k][l]`: nutrient `l` in one gram of food `k`.
    pub values: Vec<Vec<f64>>,
    pub requirements: Vec<f64>,
}

impl NutritionTables {
    /// The 25-commodity, 12-nutrient tables shipped with the crate.
    pub fn shipped() -> Self {
        Self::from_csv(NUTRIENT_VALUES, NUTRIENT_REQUIREMENTS).expect("shipped tables parse")
    }

    /// Parses a values table (`food` column then one column per nutrient)
    /// and a one-row requirements table with the same nutrient columns.
    pub fn from_csv(values: &str, requirements: &str) -> Result<Self, WfpError> {
        let bad = |m: String| WfpError::Table(m);
        let mut r = csv::Reader::from_reader(values.as_bytes());
        let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
        let nutrients: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut foods = Vec::new();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            foods.push(rec[0].to_string());
            rows.push(parse_row(&rec, &foods[foods.len() - 1])?);
        }
        let mut r = csv::Reader::from_reader(requirements.as_bytes());
        let req_header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
        if req_header.iter().skip(1).ne(nutrients.iter().map(String::as_str)) {
            return Err(bad("requirement columns differ from value columns".into()));
        }
        let rec = r
            .records()
            .next()
            .ok_or_else(|| bad("requirements table is empty".into()))?
            .map_err(|e| bad(e.to_string()))?;
        let tables = Self {
            requirements: parse_row(&rec, "requirements")?,
            foods,
            nutrients,
            values: rows,
        };
        tables.validate()?;
        Ok(tables)
    }

    pub fn validate(&self) -> Result<(), WfpError> {
        let l = self.nutrients.len();
        if self.requirements.len() != l || self.values.iter().any(|r| r.len() != l) {
            return Err(WfpError::Table("ragged nutrient table".into()));
        }
        if self.values.len() != self.foods.len() {
            return Err(WfpError::Table("one value row per food expected".into()));
        }
        if self.values.iter().flatten().chain(&self.requirements).any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(WfpError::Table("entries must be finite and nonnegative".into()));
        }
        Ok(())
    }

    pub fn food_index(&self, name: &str) -> Option<usize> {
        self.foods.iter().position(|f| f == name)
    }

    /// Nutrient totals of a basket.
    pub fn intake(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nutrients.len())
            .map(|l| x.iter().zip(&self.values).map(|(g, row)| g * row[l]).sum())
            .collect()
    }
}

fn parse_row(rec: &csv::StringRecord, what: &str) -> Result<Vec<f64>, WfpError> {
    rec.iter()
        .skip(1)
        .map(|s| {
            s.trim()
                .replace(',', "")
                .parse::<f64>()
                .map_err(|e| WfpError::Table(format!("{what}: `{s}`: {e}")))
        })
        .collect()
}

/// Feature name of a commodity: lower case with non-alphanumerics as `_`.
pub fn feature_name(food: &str) -> String {
    food.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Source,
    Transshipment,
    Delivery,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
    /// Purchase price per ton of each commodity; sources only.
    #[serde(default)]
    pub procurement: Vec<f64>,
    /// Beneficiaries served; delivery nodes only.
    #[serde(default)]
    pub demand: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
    /// Transport cost per ton of each commodity.
    pub cost: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupplyNetwork {
    pub nodes: Vec<Node>,
    pub arcs: Vec<Arc>,
    pub days: f64,
    /// Grams per metric ton.
    pub gamma: f64,
}

impl SupplyNetwork {
    /// Seeded network with the given node counts: every source ships to
    /// every transshipment node, transshipment nodes ship to each other and
    /// to every delivery node.
    pub fn synthetic(sources: usize, hubs: usize, deliveries: usize, commodities: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base: Vec<f64> = (0..commodities).map(|_| rng.gen_range(300.0..1500.0)).collect();
        let mut nodes = Vec::new();
        for s in 0..sources {
            let procurement = base.iter().map(|b| (b * rng.gen_range(0.8..1.2)).round()).collect();
            nodes.push(Node {
                name: format!("source{s}"),
                kind: NodeKind::Source,
                procurement,
                demand: 0.0,
            });
        }
        for t in 0..hubs {
            nodes.push(Node {
                name: format!("hub{t}"),
                kind: NodeKind::Transshipment,
                procurement: Vec::new(),
                demand: 0.0,
            });
        }
        for d in 0..deliveries {
            nodes.push(Node {
                name: format!("delivery{d}"),
                kind: NodeKind::Delivery,
                procurement: Vec::new(),
                demand: (rng.gen_range(5.0..20.0) * 1000.0f64).round(),
            });
        }
        let hub = |t: usize| sources + t;
        let delivery = |d: usize| sources + hubs + d;
        let mut arcs = Vec::new();
        let mut arc = |from: usize, to: usize, range: std::ops::Range<f64>, rng: &mut ChaCha8Rng| {
            let per_ton = rng.gen_range(range);
            let cost = (0..commodities).map(|_| (per_ton * rng.gen_range(0.9..1.1) * 100.0).round() / 100.0).collect();
            arcs.push(Arc { from, to, cost });
        };
        for s in 0..sources {
            for t in 0..hubs {
                arc(s, hub(t), 20.0..80.0, &mut rng);
            }
        }
        for a in 0..hubs {
            for b in 0..hubs {
                if a != b {
                    arc(hub(a), hub(b), 5.0..30.0, &mut rng);
                }
            }
        }
        for t in 0..hubs {
            for d in 0..deliveries {
                arc(hub(t), delivery(d), 10.0..50.0, &mut rng);
            }
        }
        Self {
            nodes,
            arcs,
            days: 30.0,
            gamma: 1e6,
        }
    }

    /// The default network: three sources, two hubs, two delivery nodes.
    pub fn default_instance(commodities: usize, seed: u64) -> Self {
        Self::synthetic(3, 2, 2, commodities, seed)
    }

    pub fn validate(&self, commodities: usize) -> Result<(), WfpError> {
        let bad = |m: String| Err(WfpError::InvalidNetwork(m));
        if !(self.days > 0.0 && self.gamma > 0.0 && self.days.is_finite() && self.gamma.is_finite()) {
            return bad("days and gamma must be positive".into());
        }
        let nonneg = |v: &[f64]| v.iter().all(|&c| c >= 0.0 && c.is_finite());
        for n in &self.nodes {
            if n.kind == NodeKind::Source && (n.procurement.len() != commodities || !nonneg(&n.procurement)) {
                return bad(format!("source {} needs {commodities} nonnegative prices", n.name));
            }
            if !(n.demand >= 0.0 && n.demand.is_finite()) {
                return bad(format!("node {} has an invalid demand", n.name));
            }
        }
        for (i, a) in self.arcs.iter().enumerate() {
            if a.from >= self.nodes.len() || a.to >= self.nodes.len() || a.from == a.to {
                return bad(format!("arc {i} has invalid endpoints"));
            }
            if a.cost.len() != commodities || !nonneg(&a.cost) {
                return bad(format!("arc {i} needs {commodities} nonnegative costs"));
            }
            if self.nodes[a.from].kind == NodeKind::Delivery || self.nodes[a.to].kind == NodeKind::Source {
                return bad(format!("arc {i} leaves a delivery node or enters a source"));
            }
        }
        if !self.nodes.iter().any(|n| n.kind == NodeKind::Delivery) {
            return bad("no delivery nodes".into());
        }
        // Breadth-first search from all sources.
        let mut seen = vec![false; self.nodes.len()];
        let mut queue: VecDeque<usize> = (0..self.nodes.len())
            .filter(|&i| self.nodes[i].kind == NodeKind::Source)
            .collect();
        for &s in &queue {
            seen[s] = true;
        }
        while let Some(i) = queue.pop_front() {
            for a in self.arcs.iter().filter(|a| a.from == i) {
                if !seen[a.to] {
                    seen[a.to] = true;
                    queue.push_back(a.to);
                }
            }
        }
        match self
            .nodes
            .iter()
            .zip(&seen)
            .find(|(n, &s)| n.kind == NodeKind::Delivery && !s)
        {
            Some((n, _)) => Err(WfpError::NetworkDisconnected(n.name.clone())),
            None => Ok(()),
        }
    }

    /// Tons of each commodity a delivery node receives per gram of daily
    /// ration.
    pub fn tons_per_gram(&self, node: usize) -> f64 {
        self.nodes[node].demand * self.days / self.gamma
    }
}

/// Index of flow variable `(arc, commodity)` among the problem's extra
/// variables.
pub fn flow_index(arc: usize, commodity: usize, commodities: usize) -> usize {
    arc * commodities + commodity
}

/// Training-data box of a dataset's decision features.
pub fn data_box(data: &Dataset) -> Vec<(f64, f64)> {
    data.feature_space().x_bounds
}

/// Builds the ration and supply model: purchase plus transport cost is
/// minimized subject to flow conservation at hubs, delivery of
/// `demand · x_k · days / γ` tons of each commodity at each delivery node,
/// fixed salt and sugar, the nutrient requirements and the learned bound
/// `palatability ≥ t`. `bounds` is the box on `x`; it must contain the
/// fixed salt and sugar amounts.
pub fn build_wfp_model(
    network: &SupplyNetwork,
    tables: &NutritionTables,
    palatability: PredictiveModel,
    t: f64,
    trust_region: TrustRegionSpec,
    bounds: &[(f64, f64)],
) -> Result<ConceptualProblem, WfpError> {
    tables.validate()?;
    let k = tables.foods.len();
    network.validate(k)?;
    let n_x = palatability.features.n();
    if n_x != k || bounds.len() != k {
        return Err(WfpError::InvalidParameter(format!(
            "{k} commodities but {n_x} model features and {} bounds",
            bounds.len()
        )));
    }
    if !t.is_finite() {
        return Err(WfpError::InvalidParameter("threshold must be finite".into()));
    }
    // Fixing salt and sugar through their bounds as well as by rows keeps
    // them exact in the solution.
    let mut bounds = bounds.to_vec();
    for (food, grams) in [(SALT, SALT_GRAMS), (SUGAR, SUGAR_GRAMS)] {
        let c = tables
            .food_index(food)
            .ok_or_else(|| WfpError::Table(format!("no `{food}` row")))?;
        let (lo, hi) = bounds[c];
        if !(lo <= grams && grams <= hi) {
            return Err(WfpError::InvalidParameter(format!("bounds of {food} exclude {grams} g")));
        }
        bounds[c] = (grams, grams);
    }
    let features = FeatureSpace {
        x_bounds: bounds.clone(),
        ..palatability.features.clone()
    };
    let mut p = ConceptualProblem::new(features, bounds, Vec::new());
    let flow = |a: usize, c: usize| k + flow_index(a, c, k);
    for (a, arc) in network.arcs.iter().enumerate() {
        for food in &tables.foods {
            p.extra.push(DecisionVar::continuous(
                format!("F_{}_{}_{}", network.nodes[arc.from].name, network.nodes[arc.to].name, feature_name(food)),
                0.0,
                f64::INFINITY,
            ));
        }
        for c in 0..k {
            let mut cost = arc.cost[c];
            if network.nodes[arc.from].kind == NodeKind::Source {
                cost += network.nodes[arc.from].procurement[c];
            }
            if cost != 0.0 {
                p.objective.push((flow(a, c), cost));
            }
        }
    }
    for (i, node) in network.nodes.iter().enumerate() {
        let inflow = || network.arcs.iter().enumerate().filter(move |(_, a)| a.to == i);
        let outflow = || network.arcs.iter().enumerate().filter(move |(_, a)| a.from == i);
        for (c, food) in tables.foods.iter().enumerate() {
            let fname = feature_name(food);
            match node.kind {
                NodeKind::Source => {}
                NodeKind::Transshipment => {
                    let mut terms: Vec<(usize, f64)> = inflow().map(|(a, _)| (flow(a, c), 1.0)).collect();
                    terms.extend(outflow().map(|(a, _)| (flow(a, c), -1.0)));
                    p.known.push(KnownRow {
                        terms,
                        sense: Sense::Eq,
                        rhs: 0.0,
                        name: format!("balance_{}_{fname}", node.name),
                    });
                }
                NodeKind::Delivery => {
                    let mut terms: Vec<(usize, f64)> = inflow().map(|(a, _)| (flow(a, c), 1.0)).collect();
                    terms.push((c, -network.tons_per_gram(i)));
                    p.known.push(KnownRow {
                        terms,
                        sense: Sense::Eq,
                        rhs: 0.0,
                        name: format!("demand_{}_{fname}", node.name),
                    });
                }
            }
        }
    }
    for (food, grams) in [(SALT, SALT_GRAMS), (SUGAR, SUGAR_GRAMS)] {
        let c = tables
            .food_index(food)
            .ok_or_else(|| WfpError::Table(format!("no `{food}` row")))?;
        p.known.push(KnownRow {
            terms: vec![(c, 1.0)],
            sense: Sense::Eq,
            rhs: grams,
            name: feature_name(food),
        });
    }
    for (l, nutrient) in tables.nutrients.iter().enumerate() {
        p.known.push(KnownRow {
            terms: (0..k)
                .filter(|&c| tables.values[c][l] != 0.0)
                .map(|c| (c, tables.values[c][l]))
                .collect(),
            sense: Sense::Ge,
            rhs: tables.requirements[l],
            name: format!("nutrient_{nutrient}"),
        });
    }
    let outcome = palatability.outcome.clone();
    p.learned.push(LearnedOutcome {
        model: palatability,
        binding: OutcomeBinding::new(outcome, Role::Lower(t)),
    });
    p.trust_region = trust_region;
    Ok(p)
}

/// Largest residuals of each constraint family at a reported solution.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Residuals {
    pub flow_balance: f64,
    pub demand: f64,
    pub salt_sugar: f64,
    pub nutrition: f64,
    pub nonnegativity: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        [self.flow_balance, self.demand, self.salt_sugar, self.nutrition, self.nonnegativity]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Recomputes every constraint family of the ration model from the network
/// and tables at `report`'s solution.
pub fn residuals(network: &SupplyNetwork, tables: &NutritionTables, report: &SolveReport) -> Residuals {
    let k = tables.foods.len();
    let x = &report.x;
    let f = |a: usize, c: usize| report.extra[flow_index(a, c, k)];
    let mut r = Residuals::default();
    for (i, node) in network.nodes.iter().enumerate() {
        for c in 0..k {
            let inflow: f64 = (0..network.arcs.len()).filter(|&a| network.arcs[a].to == i).map(|a| f(a, c)).sum();
            let outflow: f64 = (0..network.arcs.len()).filter(|&a| network.arcs[a].from == i).map(|a| f(a, c)).sum();
            match node.kind {
                NodeKind::Source => {}
                NodeKind::Transshipment => r.flow_balance = r.flow_balance.max((inflow - outflow).abs()),
                NodeKind::Delivery => {
                    r.demand = r.demand.max((inflow - network.tons_per_gram(i) * x[c]).abs());
                }
            }
        }
    }
    for (food, grams) in [(SALT, SALT_GRAMS), (SUGAR, SUGAR_GRAMS)] {
        if let Some(c) = tables.food_index(food) {
            r.salt_sugar = r.salt_sugar.max((x[c] - grams).abs());
        }
    }
    for (have, need) in tables.intake(x).iter().zip(&tables.requirements) {
        r.nutrition = r.nutrition.max(need - have);
    }
    r.nonnegativity = x.iter().chain(&report.extra).map(|&v| -v).fold(0.0, f64::max);
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_ir::{ModelShape, Task, TreeModel};
    use crate::pipeline::solve;
    use conlearn_mio::MipOptions;

    fn constant_model(tables: &NutritionTables, v: f64) -> PredictiveModel {
        let names: Vec<String> = tables.foods.iter().map(|f| feature_name(f)).collect();
        let features = FeatureSpace {
            x_bounds: vec![(0.0, 1000.0); names.len()],
            x_names: names,
            w_names: Vec::new(),
            w_bounds: Vec::new(),
        };
        PredictiveModel::new(
            PALATABILITY,
            features,
            ModelShape::Tree(TreeModel::constant(v, Task::Regression)),
        )
    }

    #[test]
    fn shipped_tables_have_expected_shape() {
        let t = NutritionTables::shipped();
        assert_eq!(t.foods.len(), 25);
        assert_eq!(t.nutrients.len(), 12);
        assert_eq!(t.requirements[0], 2100.0);
        let dsm = t.food_index("Dried skim milk").unwrap();
        assert_eq!(t.values[dsm][5], 1500.0);
        let salt = t.food_index(SALT).unwrap();
        assert_eq!(t.values[salt][11], 1_000_000.0);
    }

    #[test]
    fn disconnected_delivery_is_reported() {
        let mut n = SupplyNetwork::default_instance(25, 1);
        n.arcs.retain(|a| a.to != 6);
        assert!(matches!(n.validate(25), Err(WfpError::NetworkDisconnected(name)) if name == "delivery1"));
    }

    #[test]
    fn vacuous_palatability_gives_min_cost_diet() {
        let tables = NutritionTables::shipped();
        let net = SupplyNetwork::default_instance(25, 7);
        let model = constant_model(&tables, 1.0);
        let p = build_wfp_model(&net, &tables, model, 0.5, TrustRegionSpec::none(), &[(0.0, 1000.0); 25]).unwrap();
        let r = solve(&p, &MipOptions::default()).unwrap();
        let res = residuals(&net, &tables, &r);
        assert!(res.max() <= 1e-7, "{res:?}");
        let salt = tables.food_index(SALT).unwrap();
        let sugar = tables.food_index(SUGAR).unwrap();
        assert_eq!(r.x[salt], 5.0);
        assert_eq!(r.x[sugar], 20.0);
        assert!(tables.intake(&r.x)[0] >= 2100.0 - 1e-7);
    }
}
