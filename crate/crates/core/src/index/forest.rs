//! Random-projection forest for approximate candidate generation.
//!
//! Each tree recursively splits a node's points by the sign of their dot
//! product with a direction derived from two distinct sampled points. A
//! query descends every tree to one leaf; the union of those leaves is
//! the candidate set the caller re-ranks exactly.

use std::collections::BinaryHeap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::IndexEntry;

/// Heap entry for best-first descent, ordered by margin only. The margin
/// of a node is the smallest distance-to-boundary along its root path,
/// so popping the maximum expands the region nearest the query first.
struct Frontier<'a> {
    margin: f64,
    node: &'a Node,
}

impl PartialEq for Frontier<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.margin == other.margin
    }
}

impl Eq for Frontier<'_> {}

impl PartialOrd for Frontier<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier<'_> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.margin.total_cmp(&other.margin)
    }
}

/// Attempts to find a splitting pair before a node gives up and becomes
/// a leaf. Guards against nodes whose points are all identical or all on
/// one side of every sampled direction.
const SPLIT_ATTEMPTS: usize = 3;

#[derive(Debug)]
pub(crate) enum Node {
    Leaf(Vec<usize>),
    Split {
        direction: Vec<f64>,
        left: Box<Node>,
        right: Box<Node>,
    },
}

#[derive(Debug)]
pub(crate) struct Forest {
    trees: Vec<Node>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Normalized difference of two points, or `None` when they coincide.
fn split_direction(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let norm = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return None;
    }
    Some(diff.into_iter().map(|v| v / norm).collect())
}

fn build_node(
    entries: &[IndexEntry],
    points: Vec<usize>,
    leaf_size: usize,
    rng: &mut ChaCha8Rng,
) -> Node {
    if points.len() <= leaf_size {
        return Node::Leaf(points);
    }
    for _ in 0..SPLIT_ATTEMPTS {
        let mut anchors = points.choose_multiple(rng, 2);
        let (&a, &b) = (
            anchors.next().expect("node has >= 2 points"),
            anchors.next().expect("node has >= 2 points"),
        );
        let Some(direction) =
            split_direction(entries[a].vector.values(), entries[b].vector.values())
        else {
            continue;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = points
            .iter()
            .partition(|&&i| dot(entries[i].vector.values(), &direction) >= 0.0);
        if left.is_empty() || right.is_empty() {
            continue;
        }
        return Node::Split {
            direction,
            left: Box::new(build_node(entries, left, leaf_size, rng)),
            right: Box::new(build_node(entries, right, leaf_size, rng)),
        };
    }
    Node::Leaf(points)
}

impl Forest {
    /// Builds `n_trees` trees over normalized `entries`. Deterministic:
    /// each tree derives its own generator from `seed` and its position.
    pub(crate) fn build(
        entries: &[IndexEntry],
        n_trees: usize,
        leaf_size: usize,
        seed: u64,
    ) -> Forest {
        let trees = (0..n_trees)
            .map(|tree_idx| {
                let tree_seed =
                    seed.wrapping_add((tree_idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                let mut rng = ChaCha8Rng::seed_from_u64(tree_seed);
                build_node(entries, (0..entries.len()).collect(), leaf_size, &mut rng)
            })
            .collect();
        Forest { trees }
    }

    /// Union of candidate leaves across all trees: a margin-ordered
    /// best-first descent that keeps expanding the split whose boundary
    /// lies closest to the query until `budget` leaf points (counted
    /// with duplicates) are collected. Deduplicated, ascending.
    pub(crate) fn candidates(&self, query: &[f64], budget: usize) -> Vec<usize> {
        let mut heap: BinaryHeap<Frontier<'_>> = self
            .trees
            .iter()
            .map(|tree| Frontier {
                margin: f64::INFINITY,
                node: tree,
            })
            .collect();
        let mut ids = Vec::new();
        while let Some(Frontier { margin, node }) = heap.pop() {
            if ids.len() >= budget {
                break;
            }
            match node {
                Node::Leaf(points) => ids.extend_from_slice(points),
                Node::Split {
                    direction,
                    left,
                    right,
                } => {
                    let m = dot(query, direction);
                    heap.push(Frontier {
                        margin: margin.min(m),
                        node: left,
                    });
                    heap.push(Frontier {
                        margin: margin.min(-m),
                        node: right,
                    });
                }
            }
        }
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Leaf contents per tree, for structural checks.
    #[cfg(test)]
    pub(crate) fn leaf_partitions(&self) -> Vec<Vec<Vec<usize>>> {
        fn collect(node: &Node, out: &mut Vec<Vec<usize>>) {
            match node {
                Node::Leaf(points) => out.push(points.clone()),
                Node::Split { left, right, .. } => {
                    collect(left, out);
                    collect(right, out);
                }
            }
        }
        self.trees
            .iter()
            .map(|tree| {
                let mut leaves = Vec::new();
                collect(tree, &mut leaves);
                leaves
            })
            .collect()
    }
}
