//! Run configuration and its `key = value` text form.
//!
//! ```text
//! # comments start with '#'
//! model.d = 64
//! model.variant = full
//! eval.candidates = all
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{ModelShape, VariantConfig, VariantMode};

/// How many negatives each held-out positive is ranked against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Candidates {
    Sampled(usize),
    All,
}

impl fmt::Display for Candidates {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Candidates::Sampled(n) => write!(f, "{n}"),
            Candidates::All => f.write_str("all"),
        }
    }
}

impl FromStr for Candidates {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            return Ok(Candidates::All);
        }
        match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Candidates::Sampled(n)),
            _ => Err(Error::Config(format!(
                "eval.candidates must be a positive integer or 'all', got '{s}'"
            ))),
        }
    }
}

/// Whether top-N metrics are averaged over (user, positive) cases or users.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Averaging {
    #[default]
    PerCase,
    PerUser,
}

impl fmt::Display for Averaging {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Averaging::PerCase => "case",
            Averaging::PerUser => "user",
        })
    }
}

impl FromStr for Averaging {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "case" => Ok(Averaging::PerCase),
            "user" => Ok(Averaging::PerUser),
            other => Err(Error::Config(format!(
                "eval.average must be 'case' or 'user', got '{other}'"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalConfig {
    pub candidates: Candidates,
    pub average: Averaging,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            candidates: Candidates::Sampled(99),
            average: Averaging::PerCase,
            seed: 0,
        }
    }
}

/// Every hyperparameter of a training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Embedding dimension `d`.
    pub dim: usize,
    /// Number of cluster centers `K`.
    pub clusters: usize,
    /// MLP hidden width `K_h`.
    pub hidden: usize,
    /// MLP output width `K_q` (clusters after reassignment).
    pub assign: usize,
    pub variant: VariantMode,
    pub alpha: f64,
    pub beta: f64,
    pub batch_size: usize,
    /// Negatives sampled per positive.
    pub negatives: usize,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    /// `None` picks strict sampling for graphs under a million edges.
    pub strict_sampling: Option<bool>,
    /// Validation (and checkpoint) interval in epochs.
    pub eval_every: usize,
    /// Early stopping after this many evaluations without improvement.
    pub patience: usize,
    pub eval: EvalConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            clusters: 32,
            hidden: 48,
            assign: 16,
            variant: VariantMode::Full,
            alpha: 0.7,
            beta: 0.005,
            batch_size: 256,
            negatives: 5,
            lr: 0.002,
            epochs: 300,
            seed: 0,
            strict_sampling: None,
            eval_every: 5,
            patience: 10,
            eval: EvalConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.variant_config().validate()?;
        self.shape(1, 1).validate()?;
        if self.batch_size == 0 {
            return Err(Error::Config("train.batch_size must be at least 1".into()));
        }
        if self.negatives == 0 {
            return Err(Error::Config("train.negatives must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("train.lr must be positive, got {}", self.lr)));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("train.eval_every must be at least 1".into()));
        }
        Ok(())
    }

    pub fn variant_config(&self) -> VariantConfig {
        VariantConfig {
            mode: self.variant,
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    pub fn shape(&self, users: usize, items: usize) -> ModelShape {
        ModelShape {
            users,
            items,
            dim: self.dim,
            clusters: self.clusters,
            hidden: self.hidden,
            assign: self.assign,
        }
    }

    /// Every setting as `(key, value)` pairs, in a fixed order.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("model.d", self.dim.to_string()),
            ("model.k", self.clusters.to_string()),
            ("model.k_hidden", self.hidden.to_string()),
            ("model.k_assign", self.assign.to_string()),
            ("model.variant", self.variant.to_string()),
            ("model.alpha", self.alpha.to_string()),
            ("model.beta", self.beta.to_string()),
            ("train.batch_size", self.batch_size.to_string()),
            ("train.negatives", self.negatives.to_string()),
            ("train.lr", self.lr.to_string()),
            ("train.epochs", self.epochs.to_string()),
            ("train.seed", self.seed.to_string()),
            (
                "train.strict_sampling",
                match self.strict_sampling {
                    None => "auto".to_string(),
                    Some(b) => b.to_string(),
                },
            ),
            ("train.eval_every", self.eval_every.to_string()),
            ("train.patience", self.patience.to_string()),
            ("eval.candidates", self.eval.candidates.to_string()),
            ("eval.average", self.eval.average.to_string()),
            ("eval.seed", self.eval.seed.to_string()),
        ]
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("invalid value '{value}' for {key}")))
        }
        match key {
            "model.d" => self.dim = num(key, value)?,
            "model.k" => self.clusters = num(key, value)?,
            "model.k_hidden" => self.hidden = num(key, value)?,
            "model.k_assign" => self.assign = num(key, value)?,
            "model.variant" => self.variant = value.parse()?,
            "model.alpha" => self.alpha = num(key, value)?,
            "model.beta" => self.beta = num(key, value)?,
            "train.batch_size" => self.batch_size = num(key, value)?,
            "train.negatives" => self.negatives = num(key, value)?,
            "train.lr" => self.lr = num(key, value)?,
            "train.epochs" => self.epochs = num(key, value)?,
            "train.seed" => self.seed = num(key, value)?,
            "train.strict_sampling" => {
                self.strict_sampling = match value {
                    "auto" => None,
                    _ => Some(num(key, value)?),
                }
            }
            "train.eval_every" => self.eval_every = num(key, value)?,
            "train.patience" => self.patience = num(key, value)?,
            "eval.candidates" => self.eval.candidates = value.parse()?,
            "eval.average" => self.eval.average = value.parse()?,
            "eval.seed" => self.eval.seed = num(key, value)?,
            other => return Err(Error::Config(format!("unknown configuration key '{other}'"))),
        }
        Ok(())
    }

    /// Parses config text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value', got '{line}'", n + 1))
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Canonical text with every default materialized.
    pub fn to_text(&self) -> String {
        self.to_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn strict_sampling_for(&self, edge_count: usize) -> bool {
        self.strict_sampling
            .unwrap_or_else(|| crate::graph::strict_by_default(edge_count))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = TrainConfig::default();
        cfg.validate().unwrap();
        assert_eq!(TrainConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn parse_with_comments_and_overrides() {
        let text = "# run\nmodel.alpha = 0.1  # sparse graph\n\ntrain.strict_sampling = false\neval.candidates = all\n";
        let cfg = TrainConfig::parse(text).unwrap();
        assert_eq!(cfg.alpha, 0.1);
        assert_eq!(cfg.strict_sampling, Some(false));
        assert_eq!(cfg.eval.candidates, Candidates::All);
        assert_eq!(cfg.dim, 64);
    }

    #[test]
    fn bad_inputs_are_config_errors() {
        for text in [
            "model.bogus = 1",
            "model.d 64",
            "model.alpha = 2",
            "model.d = 8\nmodel.k_hidden = 48",
            "eval.candidates = 0",
            "train.negatives = 0",
        ] {
            assert!(matches!(TrainConfig::parse(text), Err(Error::Config(_))), "{text}");
        }
    }
}
