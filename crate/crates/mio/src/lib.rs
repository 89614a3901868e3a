//! Linear and mixed-binary optimization for constraint-learning models.
//!
//! Provides the model container, a bounded-variable revised simplex LP
//! solver with duals, best-first branch and bound over binaries, and LP file
//! import/export.

mod error;
mod factor;
mod lp;
mod lpfile;
mod mip;
mod model;
mod simplex;
mod sparse;

pub use error::{LpError, LpFileError, MipError, ModelError};
pub use lp::{solve_lp, Basis, LpSolution, LpSolver, LpStatus};
pub use lpfile::{export_lp_file, parse_lp_str, read_lp_file, write_lp_string};
pub use mip::{solve_mip, MipOptions, MipSolution, MipStatus, INTEGRALITY_TOL};
pub use model::{LinearConstraint, MioModel, Objective, RowId, Sense, VarId, VarKind, Variable};

/// Primal feasibility tolerance used by solution checks.
pub const PRIMAL_TOL: f64 = 1e-7;
