//! Top-N and link-prediction evaluation and the report file.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;

use super::metrics::{auc_pr, auc_roc, ndcg_at_k, rank_by_scores, recall_at_k};
use crate::config::{Averaging, Candidates, EvalConfig};
use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, SplitData, SplitTask};
use crate::model::Scorer;
use crate::rng::{derived_rng, Stream};

pub const TOP_N_CUTOFFS: [usize; 3] = [3, 5, 10];

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub task: SplitTask,
    /// Metric name and value, in a fixed order.
    pub metrics: Vec<(String, f64)>,
    /// Header entries describing the protocol, in insertion order.
    pub protocol: Vec<(String, String)>,
}

impl EvalReport {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn protocol_value(&self, key: &str) -> Option<&str> {
        self.protocol
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn with_protocol(mut self, key: &str, value: impl ToString) -> Self {
        self.protocol.push((key.to_string(), value.to_string()));
        self
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# task\t{}\n", self.task);
        for (k, v) in &self.protocol {
            out.push_str(&format!("# {k}\t{v}\n"));
        }
        out.push_str("#metric\tvalue\n");
        for (k, v) in &self.metrics {
            out.push_str(&format!("{k}\t{v}\n"));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(self.to_text().as_bytes())?;
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bad = |detail: String| Error::Format {
            path: path.to_path_buf(),
            detail,
        };
        let mut task = None;
        let mut protocol = Vec::new();
        let mut metrics = Vec::new();
        for line in BufReader::new(File::open(path)?).lines() {
            let line = line?;
            if line.starts_with("#metric") || line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("# ") {
                let (k, v) = rest
                    .split_once('\t')
                    .ok_or_else(|| bad(format!("bad header line '{line}'")))?;
                if k == "task" {
                    task = Some(v.parse()?);
                } else {
                    protocol.push((k.to_string(), v.to_string()));
                }
                continue;
            }
            let (k, v) = line
                .split_once('\t')
                .ok_or_else(|| bad(format!("bad metric line '{line}'")))?;
            let v = v.parse().map_err(|_| bad(format!("bad value in '{line}'")))?;
            metrics.push((k.to_string(), v));
        }
        Ok(Self {
            task: task.ok_or_else(|| bad("missing task header".into()))?,
            metrics,
            protocol,
        })
    }
}

/// Up to `n` distinct items outside `excluded`, drawn without replacement.
fn sample_candidates<R: Rng>(
    items: usize,
    excluded: &HashSet<usize>,
    n: usize,
    rng: &mut R,
) -> Vec<usize> {
    let available = items - excluded.len();
    if available <= 2 * n {
        let pool: Vec<usize> = (0..items).filter(|v| !excluded.contains(v)).collect();
        let take = n.min(pool.len());
        return sample(rng, pool.len(), take).into_iter().map(|i| pool[i]).collect();
    }
    let mut chosen = Vec::with_capacity(n);
    let mut seen = HashSet::with_capacity(n);
    while chosen.len() < n {
        let v = rng.gen_range(0..items);
        if !excluded.contains(&v) && seen.insert(v) {
            chosen.push(v);
        }
    }
    chosen
}

struct Case {
    user: usize,
    positive: usize,
}

/// Ranks each held-out positive among sampled (or all) items the user never
/// interacted with, in train or test.
///
/// `threads = 0` runs sequentially; any other value evaluates cases on a
/// private pool of that size. Per-case results are collected in order before
/// averaging, so both paths give identical numbers.
pub fn evaluate_top_n(
    scorer: &Scorer<'_>,
    train: &BipartiteGraph,
    test_items: &[Vec<usize>],
    eval: &EvalConfig,
    threads: usize,
) -> Result<EvalReport> {
    if test_items.len() > train.user_count() {
        return Err(Error::Protocol(format!(
            "split has {} users but the training graph has {}",
            test_items.len(),
            train.user_count()
        )));
    }
    if train.user_count() != scorer.user_count() || train.item_count() != scorer.item_count() {
        return Err(Error::Protocol(format!(
            "checkpoint is {}x{} but the graph is {}x{}",
            scorer.user_count(),
            scorer.item_count(),
            train.user_count(),
            train.item_count()
        )));
    }
    let mut cases = Vec::new();
    for (user, items) in test_items.iter().enumerate() {
        let mut items = items.clone();
        items.sort_unstable();
        items.dedup();
        for positive in items {
            if positive >= train.item_count() {
                return Err(Error::IndexOutOfRange {
                    what: "item",
                    index: positive,
                    size: train.item_count(),
                });
            }
            cases.push(Case { user, positive });
        }
    }

    let run_case = |(idx, case): (usize, &Case)| -> Option<(usize, [f64; 6])> {
        let mut excluded: HashSet<usize> = train.neighbors(case.user).iter().copied().collect();
        excluded.extend(test_items[case.user].iter().copied());
        let negatives = match eval.candidates {
            Candidates::All => (0..train.item_count())
                .filter(|v| !excluded.contains(v))
                .collect(),
            Candidates::Sampled(n) => {
                let mut rng = derived_rng(eval.seed, Stream::Candidates, idx as u64);
                sample_candidates(train.item_count(), &excluded, n, &mut rng)
            }
        };
        if negatives.is_empty() {
            return None;
        }
        let mut items = Vec::with_capacity(negatives.len() + 1);
        items.push(case.positive);
        items.extend(negatives);
        let scores: Vec<f64> = items.iter().map(|&v| scorer.score(case.user, v)).collect();
        let ranked = rank_by_scores(&items, &scores);
        let relevant = [case.positive];
        let mut m = [0.0; 6];
        for (c, &k) in TOP_N_CUTOFFS.iter().enumerate() {
            m[c] = ndcg_at_k(&ranked, &relevant, k);
            m[3 + c] = recall_at_k(&ranked, &relevant, k);
        }
        Some((case.user, m))
    };

    let results: Vec<Option<(usize, [f64; 6])>> = if threads == 0 {
        cases.iter().enumerate().map(run_case).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| cases.par_iter().enumerate().map(run_case).collect())
    };

    let skipped = results.iter().filter(|r| r.is_none()).count();
    let done: Vec<(usize, [f64; 6])> = results.into_iter().flatten().collect();
    if done.is_empty() {
        return Err(Error::Protocol(
            "no evaluable (user, positive) cases: every case lacked candidates".into(),
        ));
    }
    let means = match eval.average {
        Averaging::PerCase => mean_rows(done.iter().map(|(_, m)| *m)),
        Averaging::PerUser => {
            let mut per_user: Vec<[f64; 6]> = Vec::new();
            let mut i = 0;
            while i < done.len() {
                let user = done[i].0;
                let mut j = i;
                while j < done.len() && done[j].0 == user {
                    j += 1;
                }
                per_user.push(mean_rows(done[i..j].iter().map(|(_, m)| *m)));
                i = j;
            }
            mean_rows(per_user.into_iter())
        }
    };

    let mut metrics = Vec::new();
    for (c, k) in TOP_N_CUTOFFS.iter().enumerate() {
        metrics.push((format!("NDCG@{k}"), means[c]));
    }
    for (c, k) in TOP_N_CUTOFFS.iter().enumerate() {
        metrics.push((format!("Recall@{k}"), means[3 + c]));
    }
    Ok(EvalReport {
        task: SplitTask::TopN,
        metrics,
        protocol: Vec::new(),
    }
    .with_protocol("candidates", eval.candidates)
    .with_protocol("average", eval.average)
    .with_protocol("seed", eval.seed)
    .with_protocol("cases", done.len())
    .with_protocol("skipped", skipped))
}

fn mean_rows(rows: impl Iterator<Item = [f64; 6]>) -> [f64; 6] {
    let mut sum = [0.0; 6];
    let mut n = 0usize;
    for r in rows {
        for (s, v) in sum.iter_mut().zip(r) {
            *s += v;
        }
        n += 1;
    }
    sum.map(|s| s / n as f64)
}

pub fn evaluate_link_prediction(
    scorer: &Scorer<'_>,
    positives: &[(usize, usize)],
    negatives: &[(usize, usize)],
) -> Result<EvalReport> {
    let pos = scorer.score_pairs(positives)?;
    let neg = scorer.score_pairs(negatives)?;
    Ok(EvalReport {
        task: SplitTask::LinkPrediction,
        metrics: vec![
            ("AUC-ROC".into(), auc_roc(&pos, &neg)?),
            ("AUC-PR".into(), auc_pr(&pos, &neg)?),
        ],
        protocol: Vec::new(),
    }
    .with_protocol("positives", positives.len())
    .with_protocol("negatives", negatives.len()))
}

/// Evaluates whichever task `split` describes.
pub fn evaluate_split(
    scorer: &Scorer<'_>,
    train: &BipartiteGraph,
    split: &SplitData,
    eval: &EvalConfig,
    threads: usize,
) -> Result<EvalReport> {
    match split {
        SplitData::LinkPrediction {
            positives,
            negatives,
        } => evaluate_link_prediction(scorer, positives, negatives),
        SplitData::TopN { test_items } => evaluate_top_n(scorer, train, test_items, eval, threads),
    }
}

/// The early-stopping criterion: NDCG@10 for top-N, AUC-ROC for link prediction.
pub fn selection_metric(report: &EvalReport) -> f64 {
    let name = match report.task {
        SplitTask::TopN => "NDCG@10",
        SplitTask::LinkPrediction => "AUC-ROC",
    };
    report.metric(name).unwrap_or(f64::NAN)
}
