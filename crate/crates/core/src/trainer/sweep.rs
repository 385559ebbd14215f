use std::fmt;
use std::str::FromStr;

use super::{train, TrainOptions};
use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::eval::{evaluate_split, EvalReport};
use crate::graph::{BipartiteGraph, SplitData};
use crate::model::Scorer;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    Alpha,
    Beta,
    Dim,
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(SweepParam::Alpha),
            "beta" => Ok(SweepParam::Beta),
            "d" | "dim" => Ok(SweepParam::Dim),
            other => Err(Error::Config(format!(
                "sweep parameter must be alpha, beta or d, got '{other}'"
            ))),
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::Alpha => "alpha",
            SweepParam::Beta => "beta",
            SweepParam::Dim => "d",
        })
    }
}

impl SweepParam {
    pub fn apply(self, config: &TrainConfig, value: f64) -> Result<TrainConfig> {
        let mut cfg = config.clone();
        match self {
            SweepParam::Alpha => cfg.alpha = value,
            SweepParam::Beta => cfg.beta = value,
            SweepParam::Dim => {
                if value.fract() != 0.0 || value < 1.0 {
                    return Err(Error::Config(format!("d must be a positive integer, got {value}")));
                }
                cfg.dim = value as usize;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub value: f64,
    pub report: EvalReport,
    pub best_epoch: Option<usize>,
}

/// Trains one model per value (same seed for all) and evaluates each on
/// `split`. Rows come back sorted by value.
pub fn sweep(
    graph: &BipartiteGraph,
    config: &TrainConfig,
    param: SweepParam,
    values: &[f64],
    split: &SplitData,
    options: TrainOptions<'_>,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let configs = values
        .iter()
        .map(|&v| param.apply(config, v).map(|c| (v, c)))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(values.len());
    for (value, cfg) in configs {
        let out = train(
            graph,
            &cfg,
            TrainOptions {
                checkpoint_dir: None,
                ..options
            },
        )?;
        let scorer = Scorer::new(&out.params, cfg.variant_config())?;
        let report = evaluate_split(&scorer, graph, split, &cfg.eval, options.threads)?;
        rows.push(SweepRow {
            value,
            report,
            best_epoch: out.best_epoch,
        });
    }
    rows.sort_by(|a, b| a.value.total_cmp(&b.value));
    Ok(rows)
}
