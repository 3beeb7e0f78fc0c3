//! Multi-object error metrics.

mod assignment;
mod ospa;

pub use assignment::{optimal_assignment, solve_rows, Assignment};
pub use ospa::{ospa, OspaError, OspaParams};
