//! Outcome binarization for indicator learning.

use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::data::Dataset;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundDirection {
    /// Label 1 when `y ≤ τ`.
    Le,
    /// Label 1 when `y ≥ τ`.
    Ge,
}

impl BoundDirection {
    pub fn holds(self, y: f64, tau: f64) -> bool {
        match self {
            Self::Le => y <= tau,
            Self::Ge => y >= tau,
        }
    }
}

/// Replaces `outcome` with the 0/1 indicator of the bound holding.
pub fn binarize_outcome(data: &Dataset, outcome: &str, tau: f64, direction: BoundDirection) -> Result<Dataset, TrainError> {
    if !tau.is_finite() {
        return Err(TrainError::InvalidParameter(format!("threshold {tau}")));
    }
    let labels = data
        .outcome(outcome)?
        .iter()
        .map(|&y| if direction.holds(y, tau) { 1.0 } else { 0.0 })
        .collect();
    Ok(data.clone().with_outcome(outcome, labels)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(y: &[f64]) -> Dataset {
        Dataset::new(
            vec!["x".into()],
            vec![],
            y.iter().map(|_| vec![0.0]).collect(),
            vec![],
            vec![("y".into(), y.to_vec())],
        )
        .unwrap()
    }

    #[test]
    fn upper_bound_labels() {
        let b = binarize_outcome(&data(&[0.2, 0.6, 0.5]), "y", 0.5, BoundDirection::Le).unwrap();
        assert_eq!(b.outcome("y").unwrap(), &[1.0, 0.0, 1.0]);
    }

    #[test]
    fn threshold_below_all_values() {
        let b = binarize_outcome(&data(&[0.2, 0.6, 0.5]), "y", 0.1, BoundDirection::Le).unwrap();
        assert_eq!(b.outcome("y").unwrap(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn lower_bound_binarization_is_idempotent() {
        let once = binarize_outcome(&data(&[0.2, 0.6, 0.5, 0.9]), "y", 0.5, BoundDirection::Ge).unwrap();
        let twice = binarize_outcome(&once, "y", 0.5, BoundDirection::Ge).unwrap();
        assert_eq!(once, twice);
    }
}
