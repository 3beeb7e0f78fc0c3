//! Optimal sub-pattern assignment distance between finite point sets.

use serde::{Deserialize, Serialize};

use super::assignment::optimal_assignment;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OspaParams {
    /// Cutoff distance (m).
    pub cutoff: f64,
    /// Order, at least one.
    pub order: f64,
}

impl Default for OspaParams {
    fn default() -> Self {
        Self {
            cutoff: 100.0,
            order: 2.0,
        }
    }
}

impl OspaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.cutoff > 0.0 && self.order >= 1.0) {
            return Err(Error::Config(format!(
                "OSPA needs cutoff > 0 and order >= 1, got c={} p={}",
                self.cutoff, self.order
            )));
        }
        Ok(())
    }
}

/// OSPA total distance with its localization and cardinality parts, where
/// `total^p = localization^p + cardinality^p`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OspaError {
    pub total: f64,
    pub localization: f64,
    pub cardinality: f64,
}

/// OSPA distance between two sets of planar positions. Both empty gives zero.
pub fn ospa(x: &[[f64; 2]], y: &[[f64; 2]], params: &OspaParams) -> OspaError {
    let (small, large) = if x.len() <= y.len() { (x, y) } else { (y, x) };
    let n = large.len();
    if n == 0 {
        return OspaError::default();
    }
    let c = params.cutoff;
    let p = params.order;
    let m = small.len();

    let loc_sum = if m == 0 {
        0.0
    } else {
        let cost: Vec<Vec<f64>> = small
            .iter()
            .map(|a| {
                large
                    .iter()
                    .map(|b| (a[0] - b[0]).hypot(a[1] - b[1]).min(c).powf(p))
                    .collect()
            })
            .collect();
        optimal_assignment(&cost)
            .expect("finite OSPA costs always admit an assignment")
            .total
    };
    let card_sum = c.powf(p) * (n - m) as f64;
    let n = n as f64;
    OspaError {
        total: ((loc_sum + card_sum) / n).powf(1.0 / p).min(c),
        localization: (loc_sum / n).powf(1.0 / p),
        cardinality: (card_sum / n).powf(1.0 / p),
    }
}
