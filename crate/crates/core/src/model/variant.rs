use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// The full model and its four ablations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum VariantMode {
    #[default]
    Full,
    /// Cosine relation only (`Y = Ỹ`).
    ExplicitOnly,
    /// Cluster-mediated relation only (`Y = Ŷ`).
    ImplicitOnly,
    /// Cluster affinities bypass both MLPs.
    NoMlp,
    /// Item assignments use a softmax over the sigmoid outputs instead of
    /// uniform row normalization.
    SoftmaxAssign,
}

impl VariantMode {
    pub const ALL: [VariantMode; 5] = [
        VariantMode::Full,
        VariantMode::ExplicitOnly,
        VariantMode::ImplicitOnly,
        VariantMode::NoMlp,
        VariantMode::SoftmaxAssign,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VariantMode::Full => "full",
            VariantMode::ExplicitOnly => "explicit_only",
            VariantMode::ImplicitOnly => "implicit_only",
            VariantMode::NoMlp => "no_mlp",
            VariantMode::SoftmaxAssign => "softmax_assign",
        }
    }

    pub fn uses_explicit(self) -> bool {
        self != VariantMode::ImplicitOnly
    }

    pub fn uses_implicit(self) -> bool {
        self != VariantMode::ExplicitOnly
    }

    pub fn uses_mlp(self) -> bool {
        self.uses_implicit() && self != VariantMode::NoMlp
    }
}

impl fmt::Display for VariantMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VariantMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "full" | "ccbie" => VariantMode::Full,
            "explicit_only" | "e" | "ccbie_e" => VariantMode::ExplicitOnly,
            "implicit_only" | "i" | "ccbie_i" => VariantMode::ImplicitOnly,
            "no_mlp" | "m" | "ccbie_m" => VariantMode::NoMlp,
            "softmax_assign" | "s" | "ccbie_s" => VariantMode::SoftmaxAssign,
            other => return Err(Error::Config(format!("unknown variant '{other}'"))),
        })
    }
}

/// Variant plus the fusion weight `alpha` and cluster-separation weight `beta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VariantConfig {
    pub mode: VariantMode,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for VariantConfig {
    fn default() -> Self {
        Self {
            mode: VariantMode::Full,
            alpha: 0.7,
            beta: 0.005,
        }
    }
}

impl VariantConfig {
    pub fn new(mode: VariantMode, alpha: f64, beta: f64) -> Result<Self> {
        let v = Self { mode, alpha, beta };
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!(
                "alpha must be in [0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::Config(format!(
                "beta must be a nonnegative number, got {}",
                self.beta
            )));
        }
        Ok(())
    }

    /// The weight actually applied to the explicit relation.
    pub fn effective_alpha(&self) -> f64 {
        match self.mode {
            VariantMode::ExplicitOnly => 1.0,
            VariantMode::ImplicitOnly => 0.0,
            _ => self.alpha,
        }
    }
}
