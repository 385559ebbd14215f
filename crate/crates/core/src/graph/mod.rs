//! Bipartite interaction graphs, splits, negative sampling and batching.

pub mod io;
pub mod sampling;
pub mod split;
pub mod synthetic;

use crate::error::{Error, Result};

pub use io::{load_edge_list, read_graph, write_graph, EdgeFormat, LoadedGraph};
pub use sampling::{make_batches, sample_negatives, strict_by_default, Batch};
pub use split::{
    read_split, split_link_prediction, split_top_n, write_split, LinkSplit, SplitData, SplitSpec,
    SplitTask, TopNSplit,
};

/// User–item interaction graph with dense 0-based indices on both sides.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BipartiteGraph {
    user_count: usize,
    item_count: usize,
    edges: Vec<(usize, usize)>,
    // sorted item lists per user, used for membership tests
    adjacency: Vec<Vec<usize>>,
}

impl BipartiteGraph {
    /// Builds a graph, dropping repeated pairs (first occurrence wins).
    pub fn new(
        user_count: usize,
        item_count: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); user_count];
        let mut kept = Vec::new();
        for (u, v) in edges {
            if u >= user_count {
                return Err(Error::IndexOutOfRange {
                    what: "user",
                    index: u,
                    size: user_count,
                });
            }
            if v >= item_count {
                return Err(Error::IndexOutOfRange {
                    what: "item",
                    index: v,
                    size: item_count,
                });
            }
            let row = &mut adjacency[u];
            if let Err(pos) = row.binary_search(&v) {
                row.insert(pos, v);
                kept.push((u, v));
            }
        }
        Ok(Self {
            user_count,
            item_count,
            edges: kept,
            adjacency,
        })
    }

    pub fn user_count(&self) -> usize {
        self.user_count
    }

    pub fn item_count(&self) -> usize {
        self.item_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, user: usize, item: usize) -> bool {
        self.adjacency
            .get(user)
            .is_some_and(|items| items.binary_search(&item).is_ok())
    }

    /// Items of `user` in ascending order.
    pub fn neighbors(&self, user: usize) -> &[usize] {
        &self.adjacency[user]
    }

    pub fn degree(&self, user: usize) -> usize {
        self.adjacency[user].len()
    }

    /// `|E| / (I·J)`.
    pub fn density(&self) -> f64 {
        let cells = self.user_count as f64 * self.item_count as f64;
        if cells == 0.0 {
            0.0
        } else {
            self.edges.len() as f64 / cells
        }
    }

    /// Same node sets with additional edges.
    pub fn with_extra_edges(&self, extra: &[(usize, usize)]) -> Result<Self> {
        Self::new(
            self.user_count,
            self.item_count,
            self.edges.iter().copied().chain(extra.iter().copied()),
        )
    }
}
