use rand::seq::SliceRandom;
use rand::Rng;

use super::BipartiteGraph;
use crate::error::{Error, Result};
use crate::rng::{derived_rng, Stream};

/// Strict rejection sampling is the default below this many edges.
pub const STRICT_SAMPLING_EDGE_LIMIT: usize = 1_000_000;

pub fn strict_by_default(edge_count: usize) -> bool {
    edge_count < STRICT_SAMPLING_EDGE_LIMIT
}

/// Training rows: each positive pair followed by its sampled negatives.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Batch {
    pub users: Vec<usize>,
    pub items: Vec<usize>,
    pub targets: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn push(&mut self, user: usize, item: usize, target: f64) {
        self.users.push(user);
        self.items.push(item);
        self.targets.push(target);
    }

    pub fn rows(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.users
            .iter()
            .zip(&self.items)
            .zip(&self.targets)
            .map(|((u, v), t)| (*u, *v, *t))
    }
}

/// Pairs every positive `(u, v)` with `negatives` items drawn uniformly for the
/// same user. In strict mode draws are rejected until `(u, v')` is not an
/// edge of `graph`.
pub fn sample_negatives<R: Rng + ?Sized>(
    graph: &BipartiteGraph,
    positives: &[(usize, usize)],
    negatives: usize,
    strict: bool,
    rng: &mut R,
) -> Result<Batch> {
    if negatives == 0 {
        return Err(Error::Config("number of negatives must be at least 1".into()));
    }
    let items = graph.item_count();
    if items == 0 {
        return Err(Error::EmptyGraph("no items to sample from".into()));
    }
    let max_rejections = items * 100;
    let mut batch = Batch::default();
    for &(u, v) in positives {
        batch.push(u, v, 1.0);
        for _ in 0..negatives {
            let mut rejections = 0;
            let item = loop {
                let candidate = rng.gen_range(0..items);
                if !strict || !graph.contains(u, candidate) {
                    break candidate;
                }
                rejections += 1;
                if rejections >= max_rejections {
                    return Err(Error::SamplingExhausted(format!(
                        "user {u} has no non-interacted item after {rejections} draws"
                    )));
                }
            };
            batch.push(u, item, 0.0);
        }
    }
    Ok(batch)
}

/// Shuffles `edges` with a stream derived from `(seed, epoch)` and cuts it into
/// chunks of `batch_size` (the last chunk may be shorter).
pub fn make_batches(
    edges: &[(usize, usize)],
    batch_size: usize,
    seed: u64,
    epoch: u64,
) -> Result<Vec<Vec<(usize, usize)>>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    let mut shuffled = edges.to_vec();
    shuffled.shuffle(&mut derived_rng(seed, Stream::Shuffle, epoch));
    Ok(shuffled.chunks(batch_size).map(<[_]>::to_vec).collect())
}
