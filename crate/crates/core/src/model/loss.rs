//! The training objective recorded on a [`Tape`].

use std::collections::HashMap;

use super::params::{self, CcbieParams, Mlp};
use super::variant::{VariantConfig, VariantMode};
use crate::error::Result;
use crate::graph::Batch;
use crate::numerics::ops::{COSINE_EPS, NORMALIZE_EPS};
use crate::numerics::{Gradients, NodeId, ParamSlot, Tape};

/// A recorded batch objective.
pub struct LossGraph {
    pub tape: Tape,
    /// `structure + cluster`, a 1×1 node.
    pub total: NodeId,
    /// Per-row fused scores `Y`, an n×1 node.
    pub scores: NodeId,
    pub structure: f64,
    pub cluster: f64,
}

impl LossGraph {
    pub fn value(&self) -> f64 {
        self.tape.scalar(self.total)
    }

    pub fn backward(&self) -> Result<Gradients> {
        self.tape.backward(self.total)
    }
}

/// Distinct values in first-seen order plus, for every input position, the
/// index of its value in that list.
fn dedup(indices: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut position = HashMap::with_capacity(indices.len());
    let mut unique = Vec::new();
    let map = indices
        .iter()
        .map(|&i| {
            *position.entry(i).or_insert_with(|| {
                unique.push(i);
                unique.len() - 1
            })
        })
        .collect();
    (unique, map)
}

fn record_mlp(tape: &mut Tape, x: NodeId, mlp: &Mlp, slots: [ParamSlot; 4]) -> Result<NodeId> {
    let w1 = tape.param(slots[0], &mlp.w1);
    let b1 = tape.param(slots[1], &mlp.b1);
    let w2 = tape.param(slots[2], &mlp.w2);
    let b2 = tape.param(slots[3], &mlp.b2);
    let h = tape.affine(x, w1, b1)?;
    let h = tape.relu(h)?;
    tape.affine(h, w2, b2)
}

/// Records `L = Σ (target − Y)² − β Σ_{i<j} ‖C_i − C_j‖²` for one batch.
///
/// Only the embedding rows touched by the batch enter the tape. The cluster
/// term is omitted in explicit-only mode, so cluster parameters get no
/// gradient there.
pub fn total_loss(batch: &Batch, params: &CcbieParams, variant: &VariantConfig) -> Result<LossGraph> {
    variant.validate()?;
    let mode = variant.mode;
    let alpha = variant.effective_alpha();
    let (unique_users, user_pos) = dedup(&batch.users);
    let (unique_items, item_pos) = dedup(&batch.items);

    let mut tape = Tape::new();
    let users = tape.param_rows(params::USERS, &params.users, &unique_users)?;
    let items = tape.param_rows(params::ITEMS, &params.items, &unique_items)?;

    let explicit = if mode.uses_explicit() {
        let u = tape.gather_rows(users, &user_pos)?;
        let v = tape.gather_rows(items, &item_pos)?;
        let cos = tape.paired_cosine(u, v, COSINE_EPS)?;
        Some(tape.scale_shift(cos, 0.5, 0.5)?)
    } else {
        None
    };

    let (implicit, clusters) = if mode.uses_implicit() {
        let clusters = tape.param(params::CLUSTERS, &params.clusters);

        let affinity = tape.cosine_rows(items, clusters, COSINE_EPS)?;
        let item_logits = match mode {
            VariantMode::NoMlp => affinity,
            _ => record_mlp(&mut tape, affinity, &params.item_mlp, params::ITEM_MLP)?,
        };
        let item_sig = tape.sigmoid(item_logits)?;
        let assignment = match mode {
            VariantMode::SoftmaxAssign => tape.row_softmax(item_sig)?,
            _ => tape.row_normalize(item_sig, NORMALIZE_EPS)?,
        };

        let pref_raw = tape.cosine_rows(users, clusters, COSINE_EPS)?;
        let user_logits = match mode {
            VariantMode::NoMlp => pref_raw,
            _ => record_mlp(&mut tape, pref_raw, &params.user_mlp, params::USER_MLP)?,
        };
        let preference = tape.sigmoid(user_logits)?;

        let p = tape.gather_rows(preference, &user_pos)?;
        let t = tape.gather_rows(assignment, &item_pos)?;
        (Some(tape.paired_dot(p, t)?), Some(clusters))
    } else {
        (None, None)
    };

    let scores = match (explicit, implicit) {
        (Some(e), Some(i)) => {
            let e = tape.scale(e, alpha)?;
            let i = tape.scale(i, 1.0 - alpha)?;
            tape.add(e, i)?
        }
        (Some(e), None) => e,
        (None, Some(i)) => i,
        (None, None) => unreachable!("every variant uses at least one relation"),
    };

    let structure_node = tape.squared_error(scores, &batch.targets)?;
    let structure = tape.scalar(structure_node);
    let (total, cluster) = match clusters {
        Some(c) => {
            let spread = tape.pairwise_distance(c)?;
            let cluster_node = tape.scale(spread, -variant.beta)?;
            let cluster = tape.scalar(cluster_node);
            (tape.add(structure_node, cluster_node)?, cluster)
        }
        None => (structure_node, 0.0),
    };

    Ok(LossGraph {
        tape,
        total,
        scores,
        structure,
        cluster,
    })
}
