//! Roles an embedded outcome can play in the optimization model.

use conlearn_mio::{MioModel, Sense, VarId};
use serde::{Deserialize, Serialize};

use super::{EmbedError, EmbeddingArtifacts, OutputScale};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Role {
    /// `y ≤ τ`
    Upper(f64),
    /// `y ≥ τ`
    Lower(f64),
    /// Adds `weight · y` to the objective through an auxiliary variable.
    Objective(f64),
    /// The classifier must predict the feasible class with probability at
    /// least `τ`.
    ClassifierFeasible(f64),
    /// A multi-class network must predict this class.
    ClassTarget(usize),
}

/// Whether the model predicts the outcome itself or an indicator of the
/// outcome satisfying its bound.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearningMode {
    #[default]
    Function,
    Indicator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeBinding {
    pub outcome: String,
    pub role: Role,
    #[serde(default)]
    pub mode: LearningMode,
    /// Fraction of forest members allowed to violate a bound role.
    #[serde(default)]
    pub violation: Option<f64>,
}

impl OutcomeBinding {
    pub fn new(outcome: impl Into<String>, role: Role) -> Self {
        let mode = match role {
            Role::ClassifierFeasible(_) | Role::ClassTarget(_) => LearningMode::Indicator,
            _ => LearningMode::Function,
        };
        Self {
            outcome: outcome.into(),
            role,
            mode,
            violation: None,
        }
    }

    pub fn with_violation(mut self, alpha: f64) -> Self {
        self.violation = Some(alpha);
        self
    }

    pub fn validate(&self) -> Result<(), EmbedError> {
        match self.role {
            Role::Upper(t) | Role::Lower(t) if !t.is_finite() => {
                Err(EmbedError::Unsupported(format!("bound {t} on `{}` is not finite", self.outcome)))
            }
            Role::Objective(w) if !w.is_finite() => {
                Err(EmbedError::Unsupported(format!("objective weight {w} is not finite")))
            }
            Role::ClassifierFeasible(t) if !(t > 0.0 && t < 1.0) => {
                Err(EmbedError::Unsupported(format!("classifier threshold {t} outside (0, 1)")))
            }
            _ => match self.violation {
                Some(a) if !(0.0..=1.0).contains(&a) => {
                    Err(EmbedError::Unsupported(format!("violation limit {a} outside [0, 1]")))
                }
                Some(_) if !matches!(self.role, Role::Upper(_) | Role::Lower(_)) => {
                    Err(EmbedError::Unsupported("violation limits apply to bound roles only".into()))
                }
                _ => Ok(()),
            },
        }
    }
}

/// Guard added to margin rows so solver tolerance cannot flip the label.
fn margin_guard(scale: f64) -> f64 {
    1e-8 * scale.max(1.0)
}

/// Applies `binding` to an embedded outcome. Returns the epigraph variable
/// for objective roles.
pub fn bind_outcome(
    mio: &mut MioModel,
    art: &mut EmbeddingArtifacts,
    binding: &OutcomeBinding,
) -> Result<Option<VarId>, EmbedError> {
    binding.validate()?;
    let y = art.outcome;
    let name = &binding.outcome;
    match binding.role {
        Role::Upper(tau) | Role::Lower(tau) => {
            let upper = matches!(binding.role, Role::Upper(_));
            if let Some(alpha) = binding.violation {
                if !art.forest_mean {
                    return Err(EmbedError::Unsupported("violation limits need a forest".into()));
                }
                violation_rows(mio, art, name, tau, alpha, upper);
            } else {
                let sense = if upper { Sense::Le } else { Sense::Ge };
                let row = mio.add_constraint([(y, 1.0)], sense, tau, format!("{name}_bound"));
                art.rows.push(row);
            }
            Ok(None)
        }
        Role::Objective(weight) => {
            if weight == 0.0 {
                return Ok(None);
            }
            let t = mio.add_continuous(f64::NEG_INFINITY, f64::INFINITY, format!("{name}_epi"));
            // Minimizing weight·t pushes t onto y from the correct side.
            let sense = if weight > 0.0 { Sense::Le } else { Sense::Ge };
            let row = mio.add_constraint([(y, 1.0), (t, -1.0)], sense, 0.0, format!("{name}_epigraph"));
            mio.add_objective_term(t, weight);
            art.aux.push(t);
            art.rows.push(row);
            Ok(Some(t))
        }
        Role::ClassifierFeasible(tau) => {
            let rhs = match art.scale {
                OutputScale::Margin => margin_guard(art.coef_scale),
                OutputScale::Logit => (tau / (1.0 - tau)).ln(),
                OutputScale::Value => tau,
                OutputScale::ClassIndex => {
                    return Err(EmbedError::Unsupported("use a class target for multi-class networks".into()))
                }
            };
            let row = mio.add_constraint([(y, 1.0)], Sense::Ge, rhs, format!("{name}_feasible"));
            art.rows.push(row);
            Ok(None)
        }
        Role::ClassTarget(k) => {
            if art.scale != OutputScale::ClassIndex {
                return Err(EmbedError::Unsupported("class targets need a multi-class network".into()));
            }
            let v = *art
                .classes
                .get(k)
                .ok_or_else(|| EmbedError::Unsupported(format!("class {k} out of range")))?;
            mio.set_bounds(v, 1.0, 1.0);
            Ok(None)
        }
    }
}

/// Indicator `s_t = 1` forces member `t` to satisfy the bound; at least
/// `⌈(1 − α)P⌉` indicators must be on.
fn violation_rows(mio: &mut MioModel, art: &mut EmbeddingArtifacts, name: &str, tau: f64, alpha: f64, upper: bool) {
    let p = art.trees.len();
    let need = (((1.0 - alpha) * p as f64) - 1e-9).ceil().max(0.0);
    if need == 0.0 {
        return;
    }
    let mut count = Vec::with_capacity(p);
    let members: Vec<(VarId, (f64, f64))> = art.trees.iter().map(|t| (t.outcome, t.bounds)).collect();
    for (t, (yt, (lo, hi))) in members.into_iter().enumerate() {
        let s = mio.add_binary(format!("{name}_ok{t}"));
        art.binaries.push(s);
        count.push((s, 1.0));
        let row = if upper {
            let m = (hi - tau).max(0.0);
            let r = mio.add_constraint([(yt, 1.0), (s, m)], Sense::Le, tau + m, format!("{name}_t{t}_le"));
            art.big_m.push((r, m));
            r
        } else {
            let m = (tau - lo).max(0.0);
            let r = mio.add_constraint([(yt, 1.0), (s, -m)], Sense::Ge, tau - m, format!("{name}_t{t}_ge"));
            art.big_m.push((r, m));
            r
        };
        art.rows.push(row);
    }
    art.rows.push(mio.add_constraint(count, Sense::Ge, need, format!("{name}_quorum")));
}
