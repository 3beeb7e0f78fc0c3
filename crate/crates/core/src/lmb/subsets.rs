//! K most probable label subsets of a product-form (multi-Bernoulli) weight.
//!
//! Every subset is the most probable subset `B = {i : r_i > 0.5}` with some
//! labels flipped in or out, and each flip multiplies the weight by
//! `min(r, 1 - r) / max(r, 1 - r) <= 1`. Ordering the labels by that ratio
//! turns the include/exclude trellis into a successor tree in which every
//! child weighs no more than its parent, so a best-first walk yields the
//! subsets in non-increasing weight order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::types::{clamp_existence, product_weight};

/// Relative slack used to decide that no unexplored subset can still tie
/// with or beat the K-th best one.
const ORDER_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct RankedSubset {
    /// Included component indices, ascending.
    pub members: Vec<usize>,
    pub weight: f64,
}

struct Node {
    weight: f64,
    /// Positions (into the flip order) of flipped labels, ascending.
    flips: Vec<usize>,
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
        self.weight
            .total_cmp(&other.weight)
            .then_with(|| other.flips.cmp(&self.flips))
    }
}

/// Returns the `k` subsets of `0..existence.len()` with the largest
/// product-form weight, heaviest first. Equal weights are ordered by the
/// lexicographic order of the sorted member lists.
///
/// Exploration is capped at `64 * k + 4096` subsets, which only matters
/// when very many subsets tie exactly.
pub fn top_k_subsets(existence: &[f64], k: usize) -> Vec<RankedSubset> {
    if k == 0 {
        return Vec::new();
    }
    let n = existence.len();
    let clamped: Vec<f64> = existence.iter().map(|&r| clamp_existence(r)).collect();
    let base: Vec<bool> = clamped.iter().map(|&r| r > 0.5).collect();
    let ratio = |i: usize| {
        let r = clamped[i];
        r.min(1.0 - r) / r.max(1.0 - r)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| ratio(b).total_cmp(&ratio(a)).then(a.cmp(&b)));

    let members_of = |flips: &[usize]| -> Vec<usize> {
        let mut included = base.clone();
        for &pos in flips {
            included[order[pos]] ^= true;
        }
        (0..n).filter(|&i| included[i]).collect()
    };
    let weight_of = |flips: &[usize]| -> f64 {
        let members = members_of(flips);
        product_weight(&clamped, |i| members.binary_search(&i).is_ok())
    };

    let cap = k.saturating_mul(64).saturating_add(4096);
    let mut heap = BinaryHeap::new();
    heap.push(Node {
        weight: weight_of(&[]),
        flips: Vec::new(),
    });
    let mut found: Vec<RankedSubset> = Vec::new();
    // k largest weights seen so far, as a min-heap.
    let mut best: BinaryHeap<std::cmp::Reverse<OrdF64>> = BinaryHeap::new();

    while let Some(node) = heap.pop() {
        if best.len() == k {
            let kth = best.peek().map(|w| w.0 .0).unwrap_or(0.0);
            if node.weight < kth * (1.0 - ORDER_SLACK) || found.len() >= cap {
                break;
            }
        }
        let next = node.flips.last().map_or(0, |&p| p + 1);
        if next < n {
            let mut add = node.flips.clone();
            add.push(next);
            heap.push(Node {
                weight: weight_of(&add),
                flips: add,
            });
            if let Some(last) = node.flips.last().copied() {
                let mut shift = node.flips.clone();
                *shift.last_mut().expect("non-empty") = last + 1;
                heap.push(Node {
                    weight: weight_of(&shift),
                    flips: shift,
                });
            }
        }
        best.push(std::cmp::Reverse(OrdF64(node.weight)));
        if best.len() > k {
            best.pop();
        }
        found.push(RankedSubset {
            members: members_of(&node.flips),
            weight: node.weight,
        });
    }

    found.sort_by(|a, b| {
        b.weight
            .total_cmp(&a.weight)
            .then_with(|| a.members.cmp(&b.members))
    });
    found.truncate(k);
    found
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);
impl Eq for OrdF64 {}
impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}
