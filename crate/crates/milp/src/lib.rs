//! Mixed-integer linear programming toolkit: a named-row model type, a
//! branch-and-bound solver over a dual-simplex LP engine, LP-format export and
//! import, and import of externally computed solutions.

pub mod error;
pub mod external;
pub mod lp_format;
pub mod model;
pub mod solver;

pub use error::{ImportError, LpFormatError, ModelError, SolveError};
pub use external::{import_solution, write_solution, ExportHandle, ExternalSolution};
pub use lp_format::{export_model, parse_lp, read_lp, sanitize_name, to_lp_string};
pub use model::{Constraint, MilpModel, Sense, VarId, VarKind, Variable};
pub use solver::{solve, BranchingRule, LogLine, MilpSolution, SolveStatus, SolverMode, SolverOptions};
