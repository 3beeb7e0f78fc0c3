//! Ranked (K-best) association maps via Murty's partitioning.
//!
//! A label either misses (index 0) or takes one measurement `1..=m`, and no
//! two labels share a measurement. Each row gets a private miss column so the
//! problem becomes an ordinary rectangular assignment.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::metrics::solve_rows;

const ORDER_SLACK: f64 = 1e-9;

/// Per-label association costs, row-major `n_labels x (n_meas + 1)`; column
/// 0 is the missed detection. `f64::INFINITY` marks forbidden pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociationCosts {
    n_labels: usize,
    n_meas: usize,
    costs: Vec<f64>,
}

impl AssociationCosts {
    pub fn new(n_labels: usize, n_meas: usize, costs: Vec<f64>) -> Self {
        assert_eq!(costs.len(), n_labels * (n_meas + 1), "cost matrix shape");
        assert!(costs.iter().all(|c| !c.is_nan()), "NaN association cost");
        Self {
            n_labels,
            n_meas,
            costs,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n_meas = rows.first().map_or(0, |r| r.len().saturating_sub(1));
        assert!(
            rows.iter().all(|r| r.len() == n_meas + 1),
            "ragged cost rows"
        );
        Self::new(rows.len(), n_meas, rows.iter().flatten().copied().collect())
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn n_meas(&self) -> usize {
        self.n_meas
    }

    pub fn get(&self, label: usize, assoc: usize) -> f64 {
        self.costs[label * (self.n_meas + 1) + assoc]
    }

    /// Cost of a full association map, summed in row order.
    pub fn total(&self, assoc: &[usize]) -> f64 {
        assoc.iter().enumerate().map(|(i, &a)| self.get(i, a)).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedAssignment {
    /// `assoc[i]` is 0 for a miss or the 1-based measurement index.
    pub assoc: Vec<usize>,
    pub cost: f64,
}

struct Node {
    cost: f64,
    /// Expanded-column solution per row.
    cols: Vec<usize>,
    forced: Vec<(usize, usize)>,
    forbidden: Vec<(usize, usize)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then_with(|| self.cols.cmp(&other.cols))
    }
}

struct Expanded<'a> {
    costs: &'a AssociationCosts,
    cols: usize,
    base: Vec<f64>,
}

impl<'a> Expanded<'a> {
    fn new(costs: &'a AssociationCosts) -> Self {
        let (n, m) = (costs.n_labels, costs.n_meas);
        let cols = m + n;
        let mut base = vec![f64::INFINITY; n * cols];
        for i in 0..n {
            for j in 0..m {
                base[i * cols + j] = costs.get(i, j + 1);
            }
            base[i * cols + m + i] = costs.get(i, 0);
        }
        Self { costs, cols, base }
    }

    fn assoc_of(&self, cols: &[usize]) -> Vec<usize> {
        let m = self.costs.n_meas;
        cols.iter()
            .map(|&c| if c < m { c + 1 } else { 0 })
            .collect()
    }

    fn solve(&self, forced: &[(usize, usize)], forbidden: &[(usize, usize)]) -> Option<Node> {
        let n = self.costs.n_labels;
        let cols = self.cols;
        let mut matrix = self.base.clone();
        for &(r, c) in forbidden {
            matrix[r * cols + c] = f64::INFINITY;
        }
        for &(r, c) in forced {
            let keep = matrix[r * cols + c];
            for j in 0..cols {
                matrix[r * cols + j] = f64::INFINITY;
            }
            for i in 0..n {
                matrix[i * cols + c] = f64::INFINITY;
            }
            matrix[r * cols + c] = keep;
        }
        let sol = solve_rows(&matrix, n, cols)?;
        let cost = self.costs.total(&self.assoc_of(&sol));
        cost.is_finite().then(|| Node {
            cost,
            cols: sol,
            forced: forced.to_vec(),
            forbidden: forbidden.to_vec(),
        })
    }
}

/// The `m_best` cheapest association maps in non-decreasing cost order.
/// Exact ties are ordered lexicographically by the association vector.
/// Empty when no finite-cost map exists.
pub fn ranked_assignments(costs: &AssociationCosts, m_best: usize) -> Vec<RankedAssignment> {
    if m_best == 0 {
        return Vec::new();
    }
    let n = costs.n_labels;
    if n == 0 {
        return vec![RankedAssignment {
            assoc: Vec::new(),
            cost: 0.0,
        }];
    }
    let expanded = Expanded::new(costs);
    let cap = m_best.saturating_mul(64).saturating_add(4096);

    let mut heap = BinaryHeap::new();
    if let Some(root) = expanded.solve(&[], &[]) {
        heap.push(Reverse(root));
    }
    let mut found: Vec<RankedAssignment> = Vec::new();
    let mut best: BinaryHeap<OrdCost> = BinaryHeap::new();

    while let Some(Reverse(node)) = heap.pop() {
        if best.len() == m_best {
            let mth = best.peek().map_or(f64::INFINITY, |c| c.0);
            if node.cost > mth + ORDER_SLACK * mth.abs().max(1.0) || found.len() >= cap {
                break;
            }
        }
        // Partition the remaining solution space around this node's solution.
        let free: Vec<usize> = (0..n)
            .filter(|r| !node.forced.iter().any(|f| f.0 == *r))
            .collect();
        let mut forced = node.forced.clone();
        for &row in &free {
            let mut forbidden = node.forbidden.clone();
            forbidden.push((row, node.cols[row]));
            if let Some(child) = expanded.solve(&forced, &forbidden) {
                heap.push(Reverse(child));
            }
            forced.push((row, node.cols[row]));
        }

        best.push(OrdCost(node.cost));
        if best.len() > m_best {
            best.pop();
        }
        found.push(RankedAssignment {
            assoc: expanded.assoc_of(&node.cols),
            cost: node.cost,
        });
    }

    found.sort_by(|a, b| {
        a.cost
            .total_cmp(&b.cost)
            .then_with(|| a.assoc.cmp(&b.assoc))
    });
    found.truncate(m_best);
    found
}

/// Max-heap on cost, so the top is the worst of the kept costs.
#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdCost(f64);
impl Eq for OrdCost {}
impl PartialOrd for OrdCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OrdCost {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}
