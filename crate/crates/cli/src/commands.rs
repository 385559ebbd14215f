//! One function per subcommand. Each writes its artifacts plus a run
//! manifest and returns the data it printed, so tests can drive the same
//! code paths as the binary.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context as _, Result};
use ccbie::eval::{evaluate_split, EvalReport};
use ccbie::graph::io::write_id_map;
use ccbie::graph::{
    load_edge_list, read_graph, read_split, split_link_prediction, split_top_n, write_graph,
    write_split, BipartiteGraph, EdgeFormat, SplitData, SplitSpec, SplitTask,
};
use ccbie::model::gradcheck::DEFAULT_TOLERANCE;
use ccbie::model::{check_gradients, GradCheckOptions};
use ccbie::trainer::{benchmark_epoch, log_log_slope, sweep, BenchRow, SweepParam, SweepRow};
use ccbie::{
    train, Checkpoint, ModelShape, Scorer, TrainConfig, TrainOptions, TrainOutcome, VariantConfig,
    VariantMode,
};

use crate::manifest::RunManifest;
use crate::table::{Table, TableFormat};

pub const GRAPH_FILE: &str = "graph.tsv";
pub const TRAIN_FILE: &str = "train.tsv";
pub const TEST_SPLIT_FILE: &str = "test.tsv";
pub const VALID_SPLIT_FILE: &str = "valid.tsv";
pub const REPORT_FILE: &str = "report.tsv";

/// Settings shared by every command.
#[derive(Clone, Debug, Default)]
pub struct RunContext {
    /// Recorded verbatim in the manifest.
    pub command: String,
    pub format: TableFormat,
    /// Evaluation threads; 0 is the sequential reference path.
    pub threads: usize,
}

/// Loads a config file (or the defaults) and applies `--seed`/`--variant`.
pub fn resolve_config(
    path: Option<&Path>,
    seed: Option<u64>,
    variant: Option<VariantMode>,
) -> Result<TrainConfig> {
    let mut cfg = match path {
        Some(p) => TrainConfig::load(p).with_context(|| format!("loading config {}", p.display()))?,
        None => TrainConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(v) = variant {
        cfg.variant = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphSummary {
    pub users: usize,
    pub items: usize,
    pub edges: usize,
    pub density: f64,
}

impl GraphSummary {
    pub fn of(g: &BipartiteGraph) -> Self {
        Self {
            users: g.user_count(),
            items: g.item_count(),
            edges: g.edge_count(),
            density: g.density(),
        }
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(["users", "items", "edges", "density"]);
        t.push([
            self.users.to_string(),
            self.items.to_string(),
            self.edges.to_string(),
            format!("{:.4e}", self.density),
        ]);
        t
    }
}

/// Reads a raw interaction file and writes the densified graph and both id
/// maps into `out`.
pub fn cmd_ingest(ctx: &RunContext, input: &Path, format: EdgeFormat, out: &Path) -> Result<GraphSummary> {
    let mut manifest = RunManifest::start(&ctx.command, 0);
    manifest.add_input(input)?;
    let loaded = load_edge_list(input, format)?;
    create_out(out)?;
    write_graph(&out.join(GRAPH_FILE), &loaded.graph)?;
    write_id_map(&out.join("user_ids.tsv"), &loaded.user_ids)?;
    write_id_map(&out.join("item_ids.tsv"), &loaded.item_ids)?;
    let summary = GraphSummary::of(&loaded.graph);
    summary.table().write(&out.join("summary.tsv"), ctx.format)?;
    manifest.finish(out)?;
    Ok(summary)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitSummary {
    pub train_edges: usize,
    pub test_positives: usize,
    pub valid_positives: usize,
}

impl SplitSummary {
    pub fn table(&self) -> Table {
        let mut t = Table::new(["train_edges", "test_positives", "valid_positives"]);
        t.push([self.train_edges, self.test_positives, self.valid_positives]);
        t
    }
}

fn split_once(graph: &BipartiteGraph, spec: &SplitSpec) -> Result<(BipartiteGraph, SplitData)> {
    Ok(match spec.task {
        SplitTask::LinkPrediction => {
            let s = split_link_prediction(graph, spec)?;
            let data = SplitData::from(&s);
            (s.train, data)
        }
        SplitTask::TopN => {
            let s = split_top_n(graph, spec)?;
            let data = SplitData::from(&s);
            (s.train, data)
        }
    })
}

/// Holds out test edges per `spec`, then optionally carves a validation set
/// of `valid_fraction` out of what is left. Writes `train.tsv`, `test.tsv`
/// and (if requested) `valid.tsv`.
pub fn cmd_split(
    ctx: &RunContext,
    graph_dir: &Path,
    spec: &SplitSpec,
    valid_fraction: Option<f64>,
    out: &Path,
) -> Result<SplitSummary> {
    let graph_path = graph_dir.join(GRAPH_FILE);
    let mut manifest = RunManifest::start(&ctx.command, spec.seed);
    manifest.add_input(&graph_path)?;
    let graph = read_graph(&graph_path)?;
    let (mut train_graph, test) = split_once(&graph, spec)?;

    let valid = match valid_fraction {
        None => None,
        Some(f) => {
            let vspec = SplitSpec {
                test_fraction: f,
                holdout_fraction: f,
                seed: spec.seed.wrapping_add(1),
                ..*spec
            };
            let (rest, mut data) = split_once(&train_graph, &vspec)?;
            // negatives drawn against the reduced graph may be test edges
            if let SplitData::LinkPrediction { negatives, .. } = &mut data {
                negatives.retain(|&(u, v)| !graph.contains(u, v));
            }
            train_graph = rest;
            Some((vspec, data))
        }
    };

    create_out(out)?;
    write_graph(&out.join(TRAIN_FILE), &train_graph)?;
    let (users, items) = (graph.user_count(), graph.item_count());
    write_split(&out.join(TEST_SPLIT_FILE), spec, users, items, &test)?;
    if let Some((vspec, data)) = &valid {
        write_split(&out.join(VALID_SPLIT_FILE), vspec, users, items, data)?;
    }
    let summary = SplitSummary {
        train_edges: train_graph.edge_count(),
        test_positives: test.positives().len(),
        valid_positives: valid.as_ref().map_or(0, |(_, d)| d.positives().len()),
    };
    summary.table().write(&out.join("summary.tsv"), ctx.format)?;
    manifest.finish(out)?;
    Ok(summary)
}

/// A training graph plus whatever held-out data sits next to it.
#[derive(Clone, Debug)]
pub struct DataDir {
    pub train: BipartiteGraph,
    /// Every known edge: train, validation and test positives.
    pub full: BipartiteGraph,
    pub test: Option<SplitData>,
    pub valid: Option<SplitData>,
    pub files: Vec<PathBuf>,
}

impl DataDir {
    /// Accepts the output of `split` (train.tsv, test.tsv, optional
    /// valid.tsv) or of `ingest` (graph.tsv, trained on in full).
    pub fn load(dir: &Path) -> Result<Self> {
        let train_path = dir.join(TRAIN_FILE);
        let graph_path = dir.join(GRAPH_FILE);
        let (train, mut files) = if train_path.exists() {
            (read_graph(&train_path)?, vec![train_path])
        } else if graph_path.exists() {
            (read_graph(&graph_path)?, vec![graph_path])
        } else {
            bail!("{} has neither {TRAIN_FILE} nor {GRAPH_FILE}", dir.display());
        };
        let mut read = |name: &str| -> Result<Option<SplitData>> {
            let path = dir.join(name);
            if !path.exists() {
                return Ok(None);
            }
            let (_, users, items, data) = read_split(&path)?;
            ensure!(
                (users, items) == (train.user_count(), train.item_count()),
                "{} is for a {users}x{items} graph but the training graph is {}x{}",
                path.display(),
                train.user_count(),
                train.item_count()
            );
            files.push(path);
            Ok(Some(data))
        };
        let test = read(TEST_SPLIT_FILE)?;
        let valid = read(VALID_SPLIT_FILE)?;
        let mut held = Vec::new();
        for d in test.iter().chain(&valid) {
            held.extend(d.positives());
        }
        let full = train.with_extra_edges(&held)?;
        Ok(Self {
            train,
            full,
            test,
            valid,
            files,
        })
    }

    /// Training graph plus validation positives: everything a test-time
    /// candidate must avoid besides the user's own test items.
    pub fn known_for_test(&self) -> Result<BipartiteGraph> {
        match &self.valid {
            Some(v) => Ok(self.train.with_extra_edges(&v.positives())?),
            None => Ok(self.train.clone()),
        }
    }
}

fn train_into(ctx: &RunContext, data: &DataDir, cfg: &TrainConfig, out: &Path) -> Result<TrainOutcome> {
    create_out(out)?;
    let mut manifest = RunManifest::start(&ctx.command, cfg.seed).with_config(cfg);
    for f in &data.files {
        manifest.add_input(f)?;
    }
    let outcome = train(
        &data.train,
        cfg,
        TrainOptions {
            validation: data.valid.as_ref(),
            exclusion: Some(&data.full),
            checkpoint_dir: Some(out),
            threads: ctx.threads,
        },
    )?;
    manifest.finish(out)?;
    Ok(outcome)
}

/// Trains on `data_dir`, early-stopping on its validation split when one
/// exists. Writes `ckpt_epoch<k>`, `ckpt_best`, `history.tsv`,
/// `timing.tsv`, `config.txt` and the manifest.
pub fn cmd_train(ctx: &RunContext, data_dir: &Path, cfg: &TrainConfig, out: &Path) -> Result<TrainOutcome> {
    train_into(ctx, &DataDir::load(data_dir)?, cfg, out)
}

/// Which held-out set to score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum HeldOut {
    #[default]
    Test,
    Valid,
}

fn evaluate_params(
    ctx: &RunContext,
    data: &DataDir,
    held: HeldOut,
    params: &ccbie::CcbieParams,
    variant: VariantConfig,
    cfg: &TrainConfig,
) -> Result<EvalReport> {
    let (split, known) = match held {
        HeldOut::Test => (data.test.as_ref(), data.known_for_test()?),
        HeldOut::Valid => (data.valid.as_ref(), data.train.clone()),
    };
    let Some(split) = split else {
        bail!("data directory has no {held:?} split");
    };
    let scorer = Scorer::new(params, variant)?;
    Ok(evaluate_split(&scorer, &known, split, &cfg.eval, ctx.threads)?)
}

/// Scores a checkpoint on the test (or validation) split of `data_dir`.
/// `eval` replaces the checkpoint's evaluation settings when given; with
/// `out` the report and a manifest are written there.
pub fn cmd_evaluate(
    ctx: &RunContext,
    checkpoint: &Path,
    data_dir: &Path,
    held: HeldOut,
    eval: Option<ccbie::EvalConfig>,
    out: Option<&Path>,
) -> Result<EvalReport> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let data = DataDir::load(data_dir)?;
    let mut cfg = ckpt.config.clone();
    if let Some(e) = eval {
        cfg.eval = e;
    }
    let split_file = match held {
        HeldOut::Test => TEST_SPLIT_FILE,
        HeldOut::Valid => VALID_SPLIT_FILE,
    };
    let report = evaluate_params(ctx, &data, held, &ckpt.params, cfg.variant_config(), &cfg)?
        .with_protocol("checkpoint", checkpoint.display())
        .with_protocol("split", data_dir.join(split_file).display());
    if let Some(dir) = out {
        create_out(dir)?;
        report.write(&dir.join(REPORT_FILE))?;
        let mut manifest = RunManifest::start(&ctx.command, cfg.eval.seed).with_config(&cfg);
        manifest.add_input(checkpoint)?;
        for f in &data.files {
            manifest.add_input(f)?;
        }
        manifest.finish(dir)?;
    }
    Ok(report)
}

fn metrics_table(first: &str, rows: &[(String, &EvalReport)], extra: &[(&str, Vec<String>)]) -> Table {
    let names: Vec<String> = rows
        .first()
        .map(|(_, r)| r.metrics.iter().map(|(n, _)| n.clone()).collect())
        .unwrap_or_default();
    let mut header = vec![first.to_string()];
    header.extend(names.iter().cloned());
    header.extend(extra.iter().map(|(n, _)| n.to_string()));
    let mut t = Table::new(header);
    for (i, (label, report)) in rows.iter().enumerate() {
        let mut row = vec![label.clone()];
        row.extend(report.metrics.iter().map(|(_, v)| v.to_string()));
        row.extend(extra.iter().map(|(_, col)| col[i].clone()));
        t.push(row);
    }
    t
}

/// Trains and tests every variant with otherwise identical settings, one
/// subdirectory per variant, and writes `ablation.tsv`.
pub fn cmd_ablate(
    ctx: &RunContext,
    data_dir: &Path,
    cfg: &TrainConfig,
    out: &Path,
) -> Result<Vec<(VariantMode, EvalReport)>> {
    let data = DataDir::load(data_dir)?;
    ensure!(data.test.is_some(), "ablation needs a split directory with {TEST_SPLIT_FILE}");
    let mut results = Vec::new();
    for mode in VariantMode::ALL {
        let vcfg = TrainConfig {
            variant: mode,
            ..cfg.clone()
        };
        let dir = out.join(mode.name());
        let outcome = train_into(ctx, &data, &vcfg, &dir)?;
        let report = evaluate_params(ctx, &data, HeldOut::Test, &outcome.params, vcfg.variant_config(), &vcfg)?;
        report.write(&dir.join(REPORT_FILE))?;
        results.push((mode, report));
    }
    let labelled: Vec<_> = results.iter().map(|(m, r)| (m.name().to_string(), r)).collect();
    metrics_table("variant", &labelled, &[]).write(&out.join("ablation.tsv"), ctx.format)?;
    RunManifest::start(&ctx.command, cfg.seed).with_config(cfg).finish(out)?;
    Ok(results)
}

pub fn sweep_table(param: SweepParam, rows: &[SweepRow]) -> Table {
    let labelled: Vec<_> = rows.iter().map(|r| (r.value.to_string(), &r.report)).collect();
    let best: Vec<String> = rows
        .iter()
        .map(|r| r.best_epoch.map_or("-".to_string(), |e| e.to_string()))
        .collect();
    metrics_table(&param.to_string(), &labelled, &[("best_epoch", best)])
}

/// One model per value of `param`, all other settings fixed; results in
/// `sweep.tsv`.
pub fn cmd_sweep(
    ctx: &RunContext,
    data_dir: &Path,
    cfg: &TrainConfig,
    param: SweepParam,
    values: &[f64],
    out: &Path,
) -> Result<Vec<SweepRow>> {
    let data = DataDir::load(data_dir)?;
    let Some(test) = &data.test else {
        bail!("sweep needs a split directory with {TEST_SPLIT_FILE}");
    };
    create_out(out)?;
    let mut manifest = RunManifest::start(&ctx.command, cfg.seed).with_config(cfg);
    for f in &data.files {
        manifest.add_input(f)?;
    }
    let rows = sweep(
        &data.train,
        cfg,
        param,
        values,
        test,
        TrainOptions {
            validation: data.valid.as_ref(),
            exclusion: Some(&data.full),
            checkpoint_dir: None,
            threads: ctx.threads,
        },
    )?;
    sweep_table(param, &rows).write(&out.join("sweep.tsv"), ctx.format)?;
    manifest.finish(out)?;
    Ok(rows)
}

/// Parses `I,J,d,K,K_h,K_q`.
pub fn parse_shape(s: &str) -> Result<ModelShape> {
    let v: Vec<usize> = s
        .split(',')
        .map(|x| x.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("size '{s}' is not a list of integers"))?;
    let [users, items, dim, clusters, hidden, assign] = v[..] else {
        bail!("size '{s}' must have six fields I,J,d,K,K_h,K_q");
    };
    let shape = ModelShape {
        users,
        items,
        dim,
        clusters,
        hidden,
        assign,
    };
    ensure!(users > 0 && items > 0, "size '{s}' needs at least one user and one item");
    shape.validate()?;
    Ok(shape)
}

pub fn shape_label(s: &ModelShape) -> String {
    format!("{},{},{},{},{},{}", s.users, s.items, s.dim, s.clusters, s.hidden, s.assign)
}

/// Sizes checked when none are given: the largest instance and a
/// degenerate one with a single reassigned cluster.
pub fn default_gradcheck_shapes() -> Vec<ModelShape> {
    vec![
        ModelShape {
            users: 6,
            items: 8,
            dim: 8,
            clusters: 3,
            hidden: 3,
            assign: 2,
        },
        ModelShape {
            users: 3,
            items: 4,
            dim: 4,
            clusters: 2,
            hidden: 2,
            assign: 1,
        },
    ]
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckRow {
    pub shape: ModelShape,
    pub variant: VariantMode,
    pub seeds: u64,
    pub max_error: f64,
    pub worst_block: &'static str,
    pub worst_seed: u64,
}

impl GradcheckRow {
    pub fn passed(&self) -> bool {
        self.max_error < DEFAULT_TOLERANCE
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckSummary {
    pub rows: Vec<GradcheckRow>,
    pub seconds: f64,
}

impl GradcheckSummary {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(GradcheckRow::passed)
    }

    pub fn max_error(&self) -> f64 {
        self.rows.iter().map(|r| r.max_error).fold(0.0, f64::max)
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(["size", "variant", "seeds", "max_rel_error", "worst_block", "worst_seed", "status"]);
        for r in &self.rows {
            t.push([
                shape_label(&r.shape),
                r.variant.to_string(),
                r.seeds.to_string(),
                format!("{:.3e}", r.max_error),
                r.worst_block.to_string(),
                r.worst_seed.to_string(),
                if r.passed() { "PASS" } else { "FAIL" }.to_string(),
            ]);
        }
        t.note("tolerance", DEFAULT_TOLERANCE);
        t
    }
}

/// Tape gradients against finite differences of an independent
/// extended-precision loss, for `seeds` consecutive seeds from `first_seed`
/// on every shape and variant.
#[allow(clippy::too_many_arguments)]
pub fn cmd_gradcheck(
    ctx: &RunContext,
    shapes: &[ModelShape],
    variants: &[VariantMode],
    first_seed: u64,
    seeds: u64,
    cfg: &TrainConfig,
    options: GradCheckOptions,
    out: Option<&Path>,
) -> Result<GradcheckSummary> {
    let start = std::time::Instant::now();
    let mut rows = Vec::new();
    for shape in shapes {
        for &mode in variants {
            let variant = VariantConfig::new(mode, cfg.alpha, cfg.beta)?;
            let mut row = GradcheckRow {
                shape: *shape,
                variant: mode,
                seeds,
                max_error: 0.0,
                worst_block: "-",
                worst_seed: first_seed,
            };
            for seed in first_seed..first_seed + seeds {
                let report = check_gradients(shape, &variant, seed, options)?;
                // NaN must not hide behind a comparison
                if !(report.max_error <= row.max_error) {
                    row.max_error = report.max_error;
                    row.worst_block = report.worst_block;
                    row.worst_seed = seed;
                }
            }
            rows.push(row);
        }
    }
    let summary = GradcheckSummary {
        rows,
        seconds: start.elapsed().as_secs_f64(),
    };
    if let Some(dir) = out {
        create_out(dir)?;
        summary.table().write(&dir.join("gradcheck.tsv"), ctx.format)?;
        RunManifest::start(&ctx.command, first_seed).with_config(cfg).finish(dir)?;
    }
    Ok(summary)
}

pub fn bench_table(rows: &[BenchRow]) -> Table {
    let mut t = Table::new(["edges", "users", "items", "batches", "seconds_per_batch", "seconds_per_epoch"]);
    for r in rows {
        t.push([
            r.edges.to_string(),
            r.users.to_string(),
            r.items.to_string(),
            r.batches.to_string(),
            format!("{:.6e}", r.seconds_per_batch),
            format!("{:.6e}", r.seconds_per_epoch),
        ]);
    }
    if let Some(slope) = log_log_slope(rows) {
        t.note("log_log_slope", format!("{slope:.4}"));
    }
    t
}

/// Times one epoch per graph size; writes `bench.tsv` when `out` is given.
pub fn cmd_bench(ctx: &RunContext, cfg: &TrainConfig, sizes: &[usize], out: Option<&Path>) -> Result<Vec<BenchRow>> {
    let rows = benchmark_epoch(cfg, sizes)?;
    if let Some(dir) = out {
        create_out(dir)?;
        bench_table(&rows).write(&dir.join("bench.tsv"), ctx.format)?;
        RunManifest::start(&ctx.command, cfg.seed).with_config(cfg).finish(dir)?;
    }
    Ok(rows)
}
