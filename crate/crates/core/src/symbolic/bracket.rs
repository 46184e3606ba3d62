use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::field::{lie_bracket, VectorField};
use crate::error::{Error, Result};

/// Formal iterated bracket of the controlled fields `g_1..g_m`.
/// Leaves hold 0-based indices and print as `g1`, `g2`, ...
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BracketTree {
    Leaf(usize),
    Node(Box<BracketTree>, Box<BracketTree>),
}

impl BracketTree {
    pub fn pair(a: BracketTree, b: BracketTree) -> Self {
        BracketTree::Node(Box::new(a), Box::new(b))
    }

    /// Number of leaves (the bracket's degree).
    pub fn degree(&self) -> usize {
        match self {
            BracketTree::Leaf(_) => 1,
            BracketTree::Node(a, b) => a.degree() + b.degree(),
        }
    }

    pub fn max_leaf(&self) -> usize {
        match self {
            BracketTree::Leaf(i) => *i,
            BracketTree::Node(a, b) => a.max_leaf().max(b.max_leaf()),
        }
    }

    /// Recursively realizes the bracket on `fields` (the `g_i`).
    pub fn realize(&self, fields: &[VectorField]) -> Result<VectorField> {
        match self {
            BracketTree::Leaf(i) => fields.get(*i).cloned().ok_or_else(|| {
                Error::Invalid(format!("bracket leaf g{} but only {} fields", i + 1, fields.len()))
            }),
            BracketTree::Node(a, b) => lie_bracket(&a.realize(fields)?, &b.realize(fields)?),
        }
    }
}

/// Structural order: leaves before nodes, leaves by index, nodes by
/// (left, right).
fn structural(a: &BracketTree, b: &BracketTree) -> Ordering {
    use BracketTree::*;
    match (a, b) {
        (Leaf(i), Leaf(j)) => i.cmp(j),
        (Leaf(_), Node(..)) => Ordering::Less,
        (Node(..), Leaf(_)) => Ordering::Greater,
        (Node(a1, b1), Node(a2, b2)) => structural(a1, a2).then_with(|| structural(b1, b2)),
    }
}

/// Output order: degree first, then structural.
impl Ord for BracketTree {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| structural(self, other))
    }
}

impl PartialOrd for BracketTree {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Representative choice for `{[A,B], [B,A]}`: the higher-degree operand goes
/// left, equal degrees are kept in structural order. This keeps `[g1,g2]`
/// and `[[g1,g2],g2]` rather than `[g2,g1]` or `[g2,[g1,g2]]`.
fn canonical_pair(a: &BracketTree, b: &BracketTree) -> bool {
    match a.degree().cmp(&b.degree()) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => structural(a, b) == Ordering::Less,
    }
}

/// All brackets of `g_1..g_m` with at most `max_degree` leaves, pruning
/// `[A,A]` and keeping one of `[A,B]`, `[B,A]`. No Jacobi reduction.
pub fn enumerate_brackets(m: usize, max_degree: usize) -> Vec<BracketTree> {
    let mut by_degree: Vec<Vec<BracketTree>> = vec![Vec::new(); max_degree + 1];
    if m == 0 || max_degree == 0 {
        return Vec::new();
    }
    by_degree[1] = (0..m).map(BracketTree::Leaf).collect();
    for d in 2..=max_degree {
        let mut trees = Vec::new();
        for left_deg in 1..d {
            let right_deg = d - left_deg;
            for a in &by_degree[left_deg] {
                for b in &by_degree[right_deg] {
                    if a != b && canonical_pair(a, b) {
                        trees.push(BracketTree::pair(a.clone(), b.clone()));
                    }
                }
            }
        }
        trees.sort();
        by_degree[d] = trees;
    }
    by_degree.into_iter().flatten().collect()
}

impl fmt::Display for BracketTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BracketTree::Leaf(i) => write!(f, "g{}", i + 1),
            BracketTree::Node(a, b) => write!(f, "[{a},{b}]"),
        }
    }
}
