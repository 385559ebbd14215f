//! Command-line front end: argument parsing, dispatch and exit codes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod manifest;
pub mod table;

use std::path::PathBuf;

use anyhow::{anyhow, Context as _, Result};
use ccbie::graph::{EdgeFormat, SplitSpec, SplitTask};
use ccbie::model::GradCheckOptions;
use ccbie::trainer::SweepParam;
use ccbie::VariantMode;
use clap::{Args, Parser, Subcommand};

use commands::{HeldOut, RunContext};
use table::TableFormat;

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Raised when a gradient check runs to completion but fails tolerance.
#[derive(Debug)]
pub struct GradcheckFailed(pub f64);

impl std::fmt::Display for GradcheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "gradient check failed: max relative error {:.3e}", self.0)
    }
}

impl std::error::Error for GradcheckFailed {}

/// 3 for numeric failures, 2 for everything caused by input.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<GradcheckFailed>().is_some() {
        return EXIT_NUMERIC;
    }
    match err.chain().find_map(|e| e.downcast_ref::<ccbie::Error>()) {
        Some(e) if e.is_numeric() => EXIT_NUMERIC,
        _ => EXIT_INPUT,
    }
}

fn parse_variant(s: &str) -> std::result::Result<VariantMode, String> {
    s.parse().map_err(|e: ccbie::Error| e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "ccbie", version, about = "Bipartite graph embedding with cluster constraints")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// `key = value` config file; unset keys keep their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed (the split seed for `split`, the
    /// evaluation seed for `evaluate`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (required except for `gradcheck` and `bench`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Separator of printed and written tables.
    #[arg(long, global = true, value_enum, default_value_t = TableFormat::Tsv)]
    pub format: TableFormat,
    /// Model variant: full, explicit_only, implicit_only, no_mlp or softmax_assign.
    #[arg(long, global = true, value_parser = parse_variant)]
    pub variant: Option<VariantMode>,
    /// Evaluation threads; 0 runs the sequential reference path.
    #[arg(long, global = true, env = "CCBIE_THREADS", default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Densify a raw `user item [...]` file into a graph directory.
    Ingest {
        input: PathBuf,
        /// `tsv` (any whitespace) or `csv`.
        #[arg(long, default_value = "tsv")]
        input_format: String,
    },
    /// Hold out test (and optionally validation) edges.
    Split {
        graph_dir: PathBuf,
        /// `link_prediction` or `top_n`.
        #[arg(long, default_value = "link_prediction")]
        task: String,
        /// Share of edges held out for link prediction [default: 0.4].
        #[arg(long)]
        test_fraction: Option<f64>,
        /// Share of each user's edges held out for top-N [default: 0.2].
        #[arg(long)]
        holdout_fraction: Option<f64>,
        /// Share of the training part carved off for validation.
        #[arg(long)]
        valid_fraction: Option<f64>,
    },
    /// Train on a graph or split directory.
    Train { data_dir: PathBuf },
    /// Score a checkpoint on a split directory.
    Evaluate {
        checkpoint: PathBuf,
        data_dir: PathBuf,
        /// Which held-out split to score.
        #[arg(long, value_enum, default_value_t = HeldOut::Test)]
        on: HeldOut,
    },
    /// Train and test every model variant.
    Ablate { data_dir: PathBuf },
    /// Train one model per value of alpha, beta or d.
    Sweep {
        data_dir: PathBuf,
        /// `alpha`, `beta` or `d`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Compare tape gradients with finite differences.
    Gradcheck {
        /// `I,J,d,K,K_h,K_q`; repeatable.
        #[arg(long = "size")]
        sizes: Vec<String>,
        /// Consecutive seeds per shape and variant.
        #[arg(long, default_value_t = 100)]
        seeds: u64,
        /// Test hook: perturb one analytic gradient entry.
        #[arg(long)]
        corrupt: bool,
    },
    /// Time one epoch on random graphs of the given edge counts.
    Bench {
        /// Comma-separated edge counts, ascending.
        #[arg(long, value_delimiter = ',', default_value = "10000,100000,1000000")]
        sizes: Vec<usize>,
    },
}

fn require_out(common: &Common) -> Result<&PathBuf> {
    common
        .out
        .as_ref()
        .ok_or_else(|| anyhow!("this command needs --out DIR"))
}

/// Runs one parsed invocation, printing its table to stdout.
pub fn run(cli: Cli, command_line: String) -> Result<()> {
    let c = &cli.common;
    let ctx = RunContext {
        command: command_line,
        format: c.format,
        threads: c.threads,
    };
    let print = |t: table::Table| print!("{}", t.render(c.format));
    match &cli.command {
        Command::Ingest { input, input_format } => {
            let format: EdgeFormat = input_format.parse()?;
            let summary = commands::cmd_ingest(&ctx, input, format, require_out(c)?)?;
            print(summary.table());
        }
        Command::Split {
            graph_dir,
            task,
            test_fraction,
            holdout_fraction,
            valid_fraction,
        } => {
            let task: SplitTask = task.parse()?;
            let seed = c.seed.unwrap_or(0);
            let mut spec = match task {
                SplitTask::LinkPrediction => SplitSpec::link_prediction(seed),
                SplitTask::TopN => SplitSpec::top_n(seed),
            };
            if let Some(f) = test_fraction {
                spec.test_fraction = *f;
            }
            if let Some(f) = holdout_fraction {
                spec.holdout_fraction = *f;
            }
            let summary = commands::cmd_split(&ctx, graph_dir, &spec, *valid_fraction, require_out(c)?)?;
            print(summary.table());
        }
        Command::Train { data_dir } => {
            let cfg = commands::resolve_config(c.config.as_deref(), c.seed, c.variant)?;
            let out = commands::cmd_train(&ctx, data_dir, &cfg, require_out(c)?)?;
            let mut t = table::Table::new(["epochs", "final_loss", "best_epoch", "best_metric"]);
            let last = out.history.records.last();
            t.push([
                out.history.len().to_string(),
                last.map_or("-".into(), |r| r.loss.to_string()),
                out.best_epoch.map_or("-".into(), |e| e.to_string()),
                out.best_metric.map_or("-".into(), |m| m.to_string()),
            ]);
            print(t);
        }
        Command::Evaluate {
            checkpoint,
            data_dir,
            on,
        } => {
            let eval = match (&c.config, c.seed) {
                (None, None) => None,
                _ => {
                    let base = match &c.config {
                        Some(p) => commands::resolve_config(Some(p), None, None)?.eval,
                        None => ccbie::Checkpoint::load(checkpoint)
                            .with_context(|| format!("loading {}", checkpoint.display()))?
                            .config
                            .eval,
                    };
                    Some(ccbie::EvalConfig {
                        seed: c.seed.unwrap_or(base.seed),
                        ..base
                    })
                }
            };
            let report = commands::cmd_evaluate(&ctx, checkpoint, data_dir, *on, eval, c.out.as_deref())?;
            print!("{}", report.to_text());
        }
        Command::Ablate { data_dir } => {
            let cfg = commands::resolve_config(c.config.as_deref(), c.seed, None)?;
            let out = require_out(c)?;
            commands::cmd_ablate(&ctx, data_dir, &cfg, out)?;
            print!("{}", std::fs::read_to_string(out.join("ablation.tsv"))?);
        }
        Command::Sweep {
            data_dir,
            param,
            values,
        } => {
            let cfg = commands::resolve_config(c.config.as_deref(), c.seed, c.variant)?;
            let param: SweepParam = param.parse()?;
            let rows = commands::cmd_sweep(&ctx, data_dir, &cfg, param, values, require_out(c)?)?;
            print(commands::sweep_table(param, &rows));
        }
        Command::Gradcheck {
            sizes,
            seeds,
            corrupt,
        } => {
            let cfg = commands::resolve_config(c.config.as_deref(), None, None)?;
            let shapes = if sizes.is_empty() {
                commands::default_gradcheck_shapes()
            } else {
                sizes.iter().map(|s| commands::parse_shape(s)).collect::<Result<_>>()?
            };
            let variants = match c.variant {
                Some(v) => vec![v],
                None => VariantMode::ALL.to_vec(),
            };
            let options = GradCheckOptions {
                corrupt: *corrupt,
                ..GradCheckOptions::default()
            };
            let summary = commands::cmd_gradcheck(
                &ctx,
                &shapes,
                &variants,
                c.seed.unwrap_or(0),
                *seeds,
                &cfg,
                options,
                c.out.as_deref(),
            )?;
            print(summary.table());
            if !summary.passed() {
                return Err(GradcheckFailed(summary.max_error()).into());
            }
        }
        Command::Bench { sizes } => {
            let cfg = commands::resolve_config(c.config.as_deref(), c.seed, c.variant)?;
            let rows = commands::cmd_bench(&ctx, &cfg, sizes, c.out.as_deref())?;
            print(commands::bench_table(&rows));
        }
    }
    Ok(())
}
