use std::time::Instant;

use super::Trainer;
use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::graph::synthetic::random_graph;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchRow {
    pub edges: usize,
    pub users: usize,
    pub items: usize,
    pub batches: usize,
    pub seconds_per_batch: f64,
    pub seconds_per_epoch: f64,
}

/// Small graphs run extra epochs until at least this many batches are timed.
pub const MIN_TIMED_BATCHES: usize = 400;

/// Times training epochs on uniform random graphs with the given edge counts.
/// `seconds_per_batch` is the median over all timed batches, which shrugs off
/// scheduler hiccups that a mean would absorb; `seconds_per_epoch` is the mean
/// wall time of the epochs run.
///
/// All graphs share one node count (large enough for the biggest size at
/// density ≤ 1/4), so only `|E|` varies between rows.
pub fn benchmark_epoch(config: &TrainConfig, sizes: &[usize]) -> Result<Vec<BenchRow>> {
    if sizes.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Config(format!("benchmark sizes must be ascending, got {sizes:?}")));
    }
    let Some(&largest) = sizes.last() else {
        return Ok(Vec::new());
    };
    let nodes = ((4 * largest) as f64).sqrt().ceil().max(2.0) as usize;
    let mut rows = Vec::with_capacity(sizes.len());
    for &edges in sizes {
        if edges == 0 {
            return Err(Error::Config("benchmark sizes must be positive".into()));
        }
        let graph = random_graph(nodes, nodes, edges, config.seed);
        let mut trainer = Trainer::new(&graph, config, None)?;
        let mut per_batch = Vec::new();
        let mut batch_count = 0;
        let mut epochs = 0;
        let start = Instant::now();
        while per_batch.len() < MIN_TIMED_BATCHES {
            epochs += 1;
            let batches = trainer.epoch_batches(epochs)?;
            batch_count = batches.len();
            for (b, positives) in batches.iter().enumerate() {
                let t = Instant::now();
                trainer.run_batch(epochs, b, positives)?;
                per_batch.push(t.elapsed().as_secs_f64());
            }
        }
        let seconds = start.elapsed().as_secs_f64() / epochs as f64;
        per_batch.sort_by(f64::total_cmp);
        rows.push(BenchRow {
            edges,
            users: nodes,
            items: nodes,
            batches: batch_count,
            seconds_per_batch: per_batch[per_batch.len() / 2],
            seconds_per_epoch: seconds,
        });
    }
    Ok(rows)
}

/// Least-squares slope of `ln(seconds_per_epoch)` against `ln(edges)`.
pub fn log_log_slope(rows: &[BenchRow]) -> Option<f64> {
    if rows.len() < 2 {
        return None;
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| ((r.edges as f64).ln(), r.seconds_per_epoch.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
