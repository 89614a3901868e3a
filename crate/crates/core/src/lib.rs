//! Constraint learning toolkit: train predictive models on observed
//! decisions, embed them as mixed-integer constraints, restrict solutions to
//! data-driven trust regions, and solve with the bundled solver.

pub mod data;
pub mod model_ir;
pub mod trainers;
pub mod embed;
pub mod trust_region;
pub mod column_selection;
pub mod pipeline;
pub mod wfp;

use std::path::{Path, PathBuf};

/// Sibling of a result CSV that holds its wall-clock columns, so the result
/// file itself is reproducible byte for byte.
pub fn timing_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    path.with_file_name(format!("{stem}_timing.csv"))
}
