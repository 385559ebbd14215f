//! Mini-batch training with Adam, checkpointing and early stopping.

mod bench;
mod history;
mod sweep;

pub use bench::{benchmark_epoch, log_log_slope, BenchRow};
pub use history::{EpochRecord, TrainHistory};
pub use sweep::{sweep, SweepParam, SweepRow};

use std::path::Path;
use std::time::Instant;

use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::eval::{evaluate_split, selection_metric};
use crate::graph::{make_batches, sample_negatives, BipartiteGraph, SplitData};
use crate::model::{params, total_loss, CcbieParams, Checkpoint, Scorer};
use crate::numerics::{adam_step, AdamState, ParamSlot};
use crate::rng::{derived_rng, Stream};

#[derive(Clone, Copy, Debug, Default)]
pub struct TrainOptions<'a> {
    /// Held-out data for early stopping and best-checkpoint selection.
    pub validation: Option<&'a SplitData>,
    /// Graph whose edges strict sampling must avoid; defaults to the
    /// training graph. Pass train ∪ test to keep test edges out of negatives.
    pub exclusion: Option<&'a BipartiteGraph>,
    pub checkpoint_dir: Option<&'a Path>,
    /// Threads for validation; 0 is the sequential path.
    pub threads: usize,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: CcbieParams,
    pub history: TrainHistory,
    pub best_epoch: Option<usize>,
    pub best_metric: Option<f64>,
}

/// Loss components of one epoch, averaged over its batches.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub loss: f64,
    pub structure: f64,
    pub cluster: f64,
    pub batches: usize,
}

/// Parameters and optimizer state of a run in progress.
pub struct Trainer<'a> {
    graph: &'a BipartiteGraph,
    exclusion: &'a BipartiteGraph,
    config: TrainConfig,
    strict: bool,
    params: CcbieParams,
    adam: AdamState,
}

impl<'a> Trainer<'a> {
    pub fn new(
        graph: &'a BipartiteGraph,
        config: &TrainConfig,
        exclusion: Option<&'a BipartiteGraph>,
    ) -> Result<Self> {
        config.validate()?;
        if graph.is_empty() {
            return Err(Error::EmptyGraph("training graph has no edges".into()));
        }
        let exclusion = exclusion.unwrap_or(graph);
        if exclusion.user_count() != graph.user_count() || exclusion.item_count() != graph.item_count() {
            return Err(Error::Precondition(
                "exclusion graph must have the training graph's node counts".into(),
            ));
        }
        let params = CcbieParams::init(&config.shape(graph.user_count(), graph.item_count()), config.seed)?;
        let adam = AdamState::new(&params.block_shapes());
        Ok(Self {
            graph,
            exclusion,
            strict: config.strict_sampling_for(exclusion.edge_count()),
            config: config.clone(),
            params,
            adam,
        })
    }

    pub fn params(&self) -> &CcbieParams {
        &self.params
    }

    pub fn into_params(self) -> CcbieParams {
        self.params
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.graph.edge_count().div_ceil(self.config.batch_size)
    }

    /// Shuffled positive batches of `epoch` (1-based).
    pub fn epoch_batches(&self, epoch: usize) -> Result<Vec<Vec<(usize, usize)>>> {
        make_batches(self.graph.edges(), self.config.batch_size, self.config.seed, epoch as u64)
    }

    /// One optimizer step on batch `b` of `epoch`: sample negatives, record
    /// the loss, backpropagate, take one Adam step. Returns
    /// `(loss, structure, cluster)`.
    pub fn run_batch(&mut self, epoch: usize, b: usize, positives: &[(usize, usize)]) -> Result<(f64, f64, f64)> {
        let cfg = &self.config;
        let variant = cfg.variant_config();
        let mut rng = derived_rng(cfg.seed, Stream::Negatives, ((epoch as u64) << 32) | b as u64);
        let batch = sample_negatives(self.exclusion, positives, cfg.negatives, self.strict, &mut rng)?;
        let lg = total_loss(&batch, &self.params, &variant)?;
        let loss = lg.value();
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                batch: b,
                structure: lg.structure,
                cluster: lg.cluster,
            });
        }
        let grads = lg.backward()?;
        let slots: Vec<Option<&_>> = (0..params::BLOCK_COUNT)
            .map(|s| grads.get(ParamSlot(s)))
            .collect();
        adam_step(&mut self.params.blocks_mut(), &slots, &mut self.adam, cfg.lr)?;
        if !self.params.is_finite() {
            return Err(Error::NonFinite(format!(
                "parameters became non-finite at epoch {epoch}, batch {b} (loss {loss})"
            )));
        }
        Ok((loss, lg.structure, lg.cluster))
    }

    /// Runs every batch of `epoch` (1-based) in order.
    pub fn run_epoch(&mut self, epoch: usize) -> Result<EpochStats> {
        let batches = self.epoch_batches(epoch)?;
        let mut sums = (0.0, 0.0, 0.0);
        for (b, positives) in batches.iter().enumerate() {
            let (loss, structure, cluster) = self.run_batch(epoch, b, positives)?;
            sums.0 += loss;
            sums.1 += structure;
            sums.2 += cluster;
        }
        let n = batches.len() as f64;
        Ok(EpochStats {
            loss: sums.0 / n,
            structure: sums.1 / n,
            cluster: sums.2 / n,
            batches: batches.len(),
        })
    }
}

fn save(dir: Option<&Path>, name: &str, params: &CcbieParams, config: &TrainConfig) -> Result<()> {
    if let Some(dir) = dir {
        Checkpoint {
            params: params.clone(),
            config: config.clone(),
            seed: config.seed,
        }
        .save(&dir.join(name))?;
    }
    Ok(())
}

/// Trains from a Xavier start for `config.epochs` epochs.
///
/// With validation data the model is evaluated every `eval_every` epochs
/// (and after the last one); the best-scoring parameters are returned and
/// training stops after `patience` evaluations without improvement
/// (`patience = 0` disables stopping). Without validation the final
/// parameters are returned.
pub fn train(graph: &BipartiteGraph, config: &TrainConfig, options: TrainOptions<'_>) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(graph, config, options.exclusion)?;
    let variant = config.variant_config();
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, usize, CcbieParams)> = None;
    let mut stale = 0;

    for epoch in 1..=config.epochs {
        let start = Instant::now();
        let stats = trainer.run_epoch(epoch)?;
        let checkpoint_due = epoch % config.eval_every == 0 || epoch == config.epochs;
        let mut val_metric = None;
        if checkpoint_due {
            save(options.checkpoint_dir, &format!("ckpt_epoch{epoch}"), trainer.params(), config)?;
            if let Some(split) = options.validation {
                let scorer = Scorer::new(trainer.params(), variant)?;
                let report = evaluate_split(&scorer, graph, split, &config.eval, options.threads)?;
                let metric = selection_metric(&report);
                val_metric = Some(metric);
                if best.as_ref().is_none_or(|(m, _, _)| metric > *m) {
                    best = Some((metric, epoch, trainer.params().clone()));
                    save(options.checkpoint_dir, "ckpt_best", trainer.params(), config)?;
                    stale = 0;
                } else {
                    stale += 1;
                }
            }
        }
        history.records.push(EpochRecord {
            epoch,
            loss: stats.loss,
            structure: stats.structure,
            cluster: stats.cluster,
            seconds: start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE),
            val_metric,
        });
        if config.patience > 0 && stale >= config.patience {
            break;
        }
    }

    let (params, best_epoch, best_metric) = match best {
        Some((m, e, p)) => (p, Some(e), Some(m)),
        None => {
            let p = trainer.into_params();
            save(options.checkpoint_dir, "ckpt_best", &p, config)?;
            (p, None, None)
        }
    };
    if let Some(dir) = options.checkpoint_dir {
        history.write(dir)?;
    }
    Ok(TrainOutcome {
        params,
        history,
        best_epoch,
        best_metric,
    })
}
