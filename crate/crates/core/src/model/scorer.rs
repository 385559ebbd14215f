use super::forward::{item_cluster_assignment, user_cluster_preference};
use super::params::CcbieParams;
use super::variant::{VariantConfig, VariantMode};
use crate::error::{Error, Result};
use crate::numerics::matrix::{dot, norm};
use crate::numerics::ops::COSINE_EPS;
use crate::numerics::DenseMatrix;

/// Precomputes per-node quantities so that scoring one pair costs O(d + K_q).
///
/// Scores are bitwise identical to the fused scores recorded on the training
/// tape for the same parameters.
pub struct Scorer<'a> {
    params: &'a CcbieParams,
    variant: VariantConfig,
    user_norms: Vec<f64>,
    item_norms: Vec<f64>,
    preference: Option<DenseMatrix>,
    assignment: Option<DenseMatrix>,
}

impl<'a> Scorer<'a> {
    pub fn new(params: &'a CcbieParams, variant: VariantConfig) -> Result<Self> {
        variant.validate()?;
        let (preference, assignment) = if variant.mode.uses_implicit() {
            (
                Some(user_cluster_preference(
                    &params.users,
                    &params.clusters,
                    &params.user_mlp,
                    variant.mode,
                )?),
                Some(item_cluster_assignment(
                    &params.items,
                    &params.clusters,
                    &params.item_mlp,
                    variant.mode,
                )?),
            )
        } else {
            (None, None)
        };
        Ok(Self {
            params,
            variant,
            user_norms: params.users.row_iter().map(norm).collect(),
            item_norms: params.items.row_iter().map(norm).collect(),
            preference,
            assignment,
        })
    }

    pub fn user_count(&self) -> usize {
        self.user_norms.len()
    }

    pub fn item_count(&self) -> usize {
        self.item_norms.len()
    }

    /// Ỹ for one pair.
    pub fn explicit(&self, user: usize, item: usize) -> f64 {
        let cos = dot(self.params.users.row(user), self.params.items.row(item))
            / (self.user_norms[user].max(COSINE_EPS) * self.item_norms[item].max(COSINE_EPS));
        0.5 * cos + 0.5
    }

    /// Ŷ for one pair; zero when the variant has no implicit relation.
    pub fn implicit(&self, user: usize, item: usize) -> f64 {
        match (&self.preference, &self.assignment) {
            (Some(p), Some(t)) => dot(p.row(user), t.row(item)),
            _ => 0.0,
        }
    }

    /// Fused score `Y` without bounds checks.
    pub fn score(&self, user: usize, item: usize) -> f64 {
        match self.variant.mode {
            VariantMode::ExplicitOnly => self.explicit(user, item),
            VariantMode::ImplicitOnly => self.implicit(user, item),
            _ => {
                let a = self.variant.alpha;
                (a * self.explicit(user, item) + 0.0) + ((1.0 - a) * self.implicit(user, item) + 0.0)
            }
        }
    }

    pub fn checked_score(&self, user: usize, item: usize) -> Result<f64> {
        if user >= self.user_count() {
            return Err(Error::IndexOutOfRange {
                what: "user",
                index: user,
                size: self.user_count(),
            });
        }
        if item >= self.item_count() {
            return Err(Error::IndexOutOfRange {
                what: "item",
                index: item,
                size: self.item_count(),
            });
        }
        Ok(self.score(user, item))
    }

    pub fn score_pairs(&self, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
        pairs.iter().map(|&(u, v)| self.checked_score(u, v)).collect()
    }
}

/// Fused scores for a list of `(user, item)` pairs.
pub fn score_pairs(
    params: &CcbieParams,
    variant: &VariantConfig,
    pairs: &[(usize, usize)],
) -> Result<Vec<f64>> {
    Scorer::new(params, *variant)?.score_pairs(pairs)
}
