use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use super::io::{header_usize, parse_header_fields};
use super::BipartiteGraph;
use crate::error::{Error, Result};
use crate::rng::{derived_rng, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitTask {
    LinkPrediction,
    TopN,
}

impl FromStr for SplitTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "link_prediction" | "link" => Ok(SplitTask::LinkPrediction),
            "top_n" | "topn" => Ok(SplitTask::TopN),
            other => Err(Error::Config(format!("unknown split task '{other}'"))),
        }
    }
}

impl fmt::Display for SplitTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitTask::LinkPrediction => "link_prediction",
            SplitTask::TopN => "top_n",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitSpec {
    pub task: SplitTask,
    /// Fraction of all edges held out for link prediction.
    pub test_fraction: f64,
    /// Fraction of each eligible user's edges held out for top-N.
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn link_prediction(seed: u64) -> Self {
        Self {
            task: SplitTask::LinkPrediction,
            test_fraction: 0.4,
            holdout_fraction: 0.2,
            seed,
        }
    }

    pub fn top_n(seed: u64) -> Self {
        Self {
            task: SplitTask::TopN,
            ..Self::link_prediction(seed)
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("test_fraction", self.test_fraction),
            ("holdout_fraction", self.holdout_fraction),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} must be in (0, 1), got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct LinkSplit {
    pub train: BipartiteGraph,
    pub test_positives: Vec<(usize, usize)>,
    pub test_negatives: Vec<(usize, usize)>,
}

#[derive(Clone, Debug)]
pub struct TopNSplit {
    pub train: BipartiteGraph,
    /// Held-out items per user, ascending.
    pub test_items: Vec<Vec<usize>>,
}

impl TopNSplit {
    pub fn test_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.test_items
            .iter()
            .enumerate()
            .flat_map(|(u, items)| items.iter().map(move |&v| (u, v)))
    }
}

/// Holds out a random `test_fraction` of all edges plus an equal number of
/// distinct non-edges.
pub fn split_link_prediction(graph: &BipartiteGraph, spec: &SplitSpec) -> Result<LinkSplit> {
    spec.validate()?;
    let total = graph.edge_count();
    if total < 10 {
        return Err(Error::Precondition(format!(
            "link-prediction split needs at least 10 edges, graph has {total}"
        )));
    }
    let test_count = (spec.test_fraction * total as f64).round() as usize;
    if test_count == 0 || test_count >= total {
        return Err(Error::Precondition(format!(
            "test fraction {} yields {test_count} of {total} test edges",
            spec.test_fraction
        )));
    }

    let mut rng = derived_rng(spec.seed, Stream::Split, 0);
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut rng);
    let held: HashSet<usize> = order[..test_count].iter().copied().collect();
    let test_positives: Vec<_> = order[..test_count]
        .iter()
        .map(|&i| graph.edges()[i])
        .collect();
    let train_edges = graph
        .edges()
        .iter()
        .enumerate()
        .filter(|(i, _)| !held.contains(i))
        .map(|(_, e)| *e);
    let train = BipartiteGraph::new(graph.user_count(), graph.item_count(), train_edges)?;

    let max_attempts = 1000 * test_count;
    let mut seen = HashSet::with_capacity(test_count);
    let mut test_negatives = Vec::with_capacity(test_count);
    let mut attempts = 0;
    while test_negatives.len() < test_count {
        if attempts >= max_attempts {
            return Err(Error::SamplingExhausted(format!(
                "found {} of {test_count} non-edges after {attempts} attempts",
                test_negatives.len()
            )));
        }
        attempts += 1;
        let u = rng.gen_range(0..graph.user_count());
        let v = rng.gen_range(0..graph.item_count());
        if !graph.contains(u, v) && seen.insert((u, v)) {
            test_negatives.push((u, v));
        }
    }

    Ok(LinkSplit {
        train,
        test_positives,
        test_negatives,
    })
}

/// Moves `round(holdout_fraction · degree)` edges (at least one, never all)
/// of every user with degree ≥ 2 into that user's test set.
pub fn split_top_n(graph: &BipartiteGraph, spec: &SplitSpec) -> Result<TopNSplit> {
    spec.validate()?;
    if graph.is_empty() {
        return Err(Error::EmptyGraph("cannot split a graph without edges".into()));
    }
    let mut rng = derived_rng(spec.seed, Stream::Split, 1);
    let mut test_items = vec![Vec::new(); graph.user_count()];
    for (user, held) in test_items.iter_mut().enumerate() {
        let degree = graph.degree(user);
        if degree < 2 {
            continue;
        }
        let count = ((spec.holdout_fraction * degree as f64).round() as usize).clamp(1, degree - 1);
        let mut items = graph.neighbors(user).to_vec();
        items.shuffle(&mut rng);
        items.truncate(count);
        items.sort_unstable();
        *held = items;
    }
    let train_edges = graph
        .edges()
        .iter()
        .filter(|(u, v)| test_items[*u].binary_search(v).is_err())
        .copied();
    let train = BipartiteGraph::new(graph.user_count(), graph.item_count(), train_edges)?;
    Ok(TopNSplit { train, test_items })
}

/// Test-side content of a split manifest.
#[derive(Clone, Debug, PartialEq)]
pub enum SplitData {
    LinkPrediction {
        positives: Vec<(usize, usize)>,
        negatives: Vec<(usize, usize)>,
    },
    TopN {
        test_items: Vec<Vec<usize>>,
    },
}

impl SplitData {
    pub fn task(&self) -> SplitTask {
        match self {
            SplitData::LinkPrediction { .. } => SplitTask::LinkPrediction,
            SplitData::TopN { .. } => SplitTask::TopN,
        }
    }

    pub fn positives(&self) -> Vec<(usize, usize)> {
        match self {
            SplitData::LinkPrediction { positives, .. } => positives.clone(),
            SplitData::TopN { test_items } => test_items
                .iter()
                .enumerate()
                .flat_map(|(u, items)| items.iter().map(move |&v| (u, v)))
                .collect(),
        }
    }
}

impl From<&LinkSplit> for SplitData {
    fn from(s: &LinkSplit) -> Self {
        SplitData::LinkPrediction {
            positives: s.test_positives.clone(),
            negatives: s.test_negatives.clone(),
        }
    }
}

impl From<&TopNSplit> for SplitData {
    fn from(s: &TopNSplit) -> Self {
        SplitData::TopN {
            test_items: s.test_items.clone(),
        }
    }
}

/// Writes a split manifest: header lines with the split parameters, then one
/// `u<TAB>v<TAB>label` line per test pair.
pub fn write_split(
    path: &Path,
    spec: &SplitSpec,
    users: usize,
    items: usize,
    data: &SplitData,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "# split={} seed={} test_fraction={} holdout_fraction={}",
        data.task(),
        spec.seed,
        spec.test_fraction,
        spec.holdout_fraction
    )?;
    writeln!(w, "# users={users} items={items}")?;
    writeln!(w, "#u\tv\tlabel")?;
    match data {
        SplitData::LinkPrediction {
            positives,
            negatives,
        } => {
            for (u, v) in positives {
                writeln!(w, "{u}\t{v}\t1")?;
            }
            for (u, v) in negatives {
                writeln!(w, "{u}\t{v}\t0")?;
            }
        }
        SplitData::TopN { .. } => {
            for (u, v) in data.positives() {
                writeln!(w, "{u}\t{v}\t1")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a manifest written by [`write_split`], returning the spec, the node
/// counts and the test pairs.
pub fn read_split(path: &Path) -> Result<(SplitSpec, usize, usize, SplitData)> {
    let reader = BufReader::new(File::open(path)?);
    let mut header = std::collections::HashMap::new();
    let mut rows = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.starts_with('#') {
            header.extend(parse_header_fields(&line));
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<_> = line.split('\t').collect();
        let parsed = (parts.len() == 3)
            .then(|| {
                Some((
                    parts[0].parse::<usize>().ok()?,
                    parts[1].parse::<usize>().ok()?,
                    parts[2].parse::<u8>().ok()?,
                ))
            })
            .flatten();
        match parsed {
            Some(r) => rows.push(r),
            None => {
                return Err(Error::Ingest {
                    path: path.to_path_buf(),
                    line: n + 1,
                    detail: format!("expected 'u<TAB>v<TAB>label', got '{line}'"),
                })
            }
        }
    }
    let format_err = |detail: String| Error::Format {
        path: path.to_path_buf(),
        detail,
    };
    let task: SplitTask = header
        .get("split")
        .ok_or_else(|| format_err("missing split= header".into()))?
        .parse()?;
    let float = |key: &str| -> Result<f64> {
        header
            .get(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| format_err(format!("missing {key}= header")))
    };
    let spec = SplitSpec {
        task,
        test_fraction: float("test_fraction")?,
        holdout_fraction: float("holdout_fraction")?,
        seed: header
            .get("seed")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| format_err("missing seed= header".into()))?,
    };
    let users = header_usize(&header, "users", path)?;
    let items = header_usize(&header, "items", path)?;
    if let Some(&(u, v, _)) = rows.iter().find(|(u, v, _)| *u >= users || *v >= items) {
        return Err(format_err(format!("pair ({u}, {v}) out of range")));
    }

    let data = match task {
        SplitTask::LinkPrediction => SplitData::LinkPrediction {
            positives: rows.iter().filter(|r| r.2 == 1).map(|r| (r.0, r.1)).collect(),
            negatives: rows.iter().filter(|r| r.2 == 0).map(|r| (r.0, r.1)).collect(),
        },
        SplitTask::TopN => {
            let mut test_items = vec![Vec::new(); users];
            for (u, v, _) in rows.iter().filter(|r| r.2 == 1) {
                test_items[*u].push(*v);
            }
            test_items.iter_mut().for_each(|items| items.sort_unstable());
            SplitData::TopN { test_items }
        }
    };
    Ok((spec, users, items, data))
}
