//! Small mixed 0-1 linear programming engine: a dense bounded-variable
//! simplex and a branch-and-bound driver that branches on complementarity
//! pairs.

pub mod error;
pub mod lpfile;
pub mod model;
pub mod scalar;
pub mod bnb;
pub mod simplex;

pub use error::MilpError;
pub use model::{ComplementarityPair, Constraint, LinExpr, MilpModel, Sense, VarId, VarKind, Variable, Violation};
pub use scalar::Scalar;
pub use simplex::{LpSolver, LpStatus};
pub use bnb::{solve, solve_with, IncumbentHook, NoHook, Progress, SolveResult, SolveStats, SolveStatus, SolverLimits, DEFAULT_GAP};
pub use lpfile::to_lp_string;
