//! Best-first branch and bound over boxes.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::domain::InputBox;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BnBConfig {
    /// Absolute gap at which the search stops.
    pub tolerance: f64,
    /// Cap on the number of regions evaluated.
    pub max_regions: usize,
}

impl Default for BnBConfig {
    fn default() -> Self {
        BnBConfig {
            tolerance: 1e-3,
            max_regions: 10_000,
        }
    }
}

impl BnBConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::input(format!(
                "tolerance must be finite and > 0, got {}",
                self.tolerance
            )));
        }
        if self.max_regions < 1 {
            return Err(Error::input("max_regions must be >= 1"));
        }
        Ok(())
    }
}

/// Certified bounds on an extremum over a box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub lower: f64,
    pub upper: f64,
    /// Point whose objective value lies in `[lower, upper]`.
    pub witness: Vec<f64>,
    /// Regions evaluated.
    pub iterations: usize,
    pub converged: bool,
}

impl BoundResult {
    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }

    /// Bounds on the supremum of `−f` from bounds on the infimum of `f`.
    pub(crate) fn negated(self) -> BoundResult {
        BoundResult {
            lower: -self.upper,
            upper: -self.lower,
            ..self
        }
    }
}

/// Per-region bounds on `inf_{x ∈ region} f(x)`: `lower` must not exceed the
/// infimum and `upper = f(witness)`.
#[derive(Clone, Debug)]
pub(crate) struct RegionBound {
    pub lower: f64,
    pub upper: f64,
    pub witness: Vec<f64>,
}

struct Node {
    lower: f64,
    index: usize,
    region: InputBox,
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
    // reversed so that BinaryHeap pops the smallest lower bound, then the
    // lowest region index
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .lower
            .total_cmp(&self.lower)
            .then_with(|| other.index.cmp(&self.index))
    }
}

/// Bound `inf_{x ∈ root} f(x)` given a region-wise bounding oracle.
///
/// Regions are processed lowest-bound first and split at the midpoint of
/// their widest side. A child's bound is never below its parent's, so the
/// global gap never widens.
pub(crate) fn minimize<F>(root: &InputBox, cfg: &BnBConfig, mut bound: F) -> Result<BoundResult>
where
    F: FnMut(&InputBox) -> Result<RegionBound>,
{
    cfg.validate()?;
    let first = bound(root)?;
    let mut evaluated = 1;
    let mut best_upper = first.upper;
    let mut witness = first.witness;
    // regions that cannot be split any further
    let mut settled = f64::INFINITY;
    let mut heap = BinaryHeap::new();
    heap.push(Node {
        lower: first.lower,
        index: 0,
        region: root.clone(),
    });
    let mut next_index = 1;

    let converged = loop {
        let frontier = heap.peek().map_or(f64::INFINITY, |n| n.lower).min(settled);
        if best_upper - frontier <= cfg.tolerance {
            break true;
        }
        let Some(node) = heap.pop() else {
            break true;
        };
        if evaluated + 2 > cfg.max_regions {
            heap.push(node);
            break false;
        }
        let Some((left, right)) = node.region.bisect() else {
            settled = settled.min(node.lower);
            continue;
        };
        for child in [left, right] {
            let rb = bound(&child)?;
            evaluated += 1;
            if rb.upper < best_upper {
                best_upper = rb.upper;
                witness = rb.witness;
            }
            heap.push(Node {
                lower: rb.lower.max(node.lower),
                index: next_index,
                region: child,
            });
            next_index += 1;
        }
    };

    let frontier = heap.peek().map_or(f64::INFINITY, |n| n.lower).min(settled);
    Ok(BoundResult {
        lower: frontier.min(best_upper),
        upper: best_upper,
        witness,
        iterations: evaluated,
        converged,
    })
}
