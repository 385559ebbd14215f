//! Synthetic graph generators for tests, benchmarks and planted-structure runs.

use std::collections::HashSet;

use rand::Rng;

use super::BipartiteGraph;
use crate::rng::{derived_rng, Stream};

/// Exactly `edges` distinct uniformly random pairs.
///
/// Panics if `edges` exceeds half of all possible pairs, where rejection
/// sampling stops being a sensible strategy.
pub fn random_graph(users: usize, items: usize, edges: usize, seed: u64) -> BipartiteGraph {
    assert!(
        edges * 2 <= users * items,
        "{edges} edges is too dense for a {users}x{items} random graph"
    );
    let mut rng = derived_rng(seed, Stream::Synthetic, 0);
    let mut seen = HashSet::with_capacity(edges);
    let mut list = Vec::with_capacity(edges);
    while list.len() < edges {
        let pair = (rng.gen_range(0..users), rng.gen_range(0..items));
        if seen.insert(pair) {
            list.push(pair);
        }
    }
    BipartiteGraph::new(users, items, list).expect("indices in range")
}

/// Stochastic block model with `clusters` co-clusters of contiguous user and
/// item index blocks.
#[derive(Clone, Debug)]
pub struct PlantedGraph {
    pub graph: BipartiteGraph,
    pub user_cluster: Vec<usize>,
    pub item_cluster: Vec<usize>,
}

pub fn planted_coclusters(
    users: usize,
    items: usize,
    clusters: usize,
    p_within: f64,
    p_across: f64,
    seed: u64,
) -> PlantedGraph {
    let user_cluster: Vec<_> = (0..users).map(|u| u * clusters / users).collect();
    let item_cluster: Vec<_> = (0..items).map(|v| v * clusters / items).collect();
    let mut rng = derived_rng(seed, Stream::Synthetic, 1);
    let mut edges = Vec::new();
    for u in 0..users {
        for v in 0..items {
            let p = if user_cluster[u] == item_cluster[v] {
                p_within
            } else {
                p_across
            };
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    PlantedGraph {
        graph: BipartiteGraph::new(users, items, edges).expect("indices in range"),
        user_cluster,
        item_cluster,
    }
}

/// Complete `n×n` bipartite graph with the perfect matching `(i, i)` removed.
pub fn complete_minus_matching(n: usize) -> BipartiteGraph {
    let edges = (0..n).flat_map(|u| (0..n).filter(move |&v| v != u).map(move |v| (u, v)));
    BipartiteGraph::new(n, n, edges).expect("indices in range")
}
