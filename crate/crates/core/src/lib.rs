//! Labeled multi-Bernoulli tracking with task-driven sensor control.
//!
//! The sensor picks, at every scan, the move whose predicted posterior has
//! the smallest expected cardinality and localization error (PEECS). Control
//! scores use an unlabeled CB-MeMBer update on ideal pseudo-measurements;
//! the main recursion is either an SMC labeled multi-Bernoulli filter or the
//! CB-MeMBer filter itself.

pub mod cbmember;
pub mod control;
pub mod error;
pub mod harness;
pub mod lmb;
pub mod metrics;
pub mod models;
pub mod types;

pub use error::{Error, Result};
