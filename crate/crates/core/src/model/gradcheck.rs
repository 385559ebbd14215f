//! Tape gradients of [`total_loss`] against central finite differences.
//!
//! The differenced loss is an independent scalar-loop evaluation in
//! double-double arithmetic, taken relative to its value at the base point.
//! In plain f64 the rounding noise of the loss, divided by `2h`, is about
//! 1e-10, which swamps gradient entries below 1e-5.

use rand::Rng;

use super::loss::total_loss;
use super::params::{CcbieParams, ModelShape, BLOCK_NAMES};
use super::params::Mlp;
use super::variant::{VariantConfig, VariantMode};
use crate::error::Result;
use crate::graph::Batch;
use crate::numerics::gradcheck::{finite_difference_grad, relative_error};
use crate::numerics::ops::{COSINE_EPS, NORMALIZE_EPS};
use crate::numerics::{Dd, DenseMatrix, ParamSlot};
use crate::rng::{derived_rng, Stream};

pub const DEFAULT_TOLERANCE: f64 = 1e-5;

#[derive(Clone, Copy, Debug)]
pub struct GradCheckOptions {
    pub step: f64,
    /// Test hook: perturbs one analytic gradient entry before comparison.
    pub corrupt: bool,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: crate::numerics::gradcheck::DEFAULT_STEP,
            corrupt: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_error: f64,
    pub worst_block: &'static str,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub parameters: usize,
    /// `|tape loss − reference loss|` at the base point.
    pub loss_gap: f64,
}

impl GradCheckReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_error < tolerance
    }
}

/// A seeded random problem: initialized parameters with nonzero biases and a
/// batch touching every user, with 0/1 targets.
pub fn random_instance(shape: &ModelShape, seed: u64) -> Result<(CcbieParams, Batch)> {
    let mut params = CcbieParams::init(shape, seed)?;
    let mut rng = derived_rng(seed, Stream::Synthetic, 0x67c);
    for mlp in [&mut params.item_mlp, &mut params.user_mlp] {
        for b in [&mut mlp.b1, &mut mlp.b2] {
            for v in b.data_mut() {
                *v = rng.gen_range(-0.5..0.5);
            }
        }
    }
    let mut batch = Batch::default();
    for r in 0..shape.users + shape.items {
        let user = r % shape.users;
        let item = if r < shape.items { r } else { rng.gen_range(0..shape.items) };
        batch.push(user, item, if rng.gen_bool(0.5) { 1.0 } else { 0.0 });
    }
    Ok((params, batch))
}

pub fn check_gradients(
    shape: &ModelShape,
    variant: &VariantConfig,
    seed: u64,
    options: GradCheckOptions,
) -> Result<GradCheckReport> {
    let (params, batch) = random_instance(shape, seed)?;
    check_instance(&params, &batch, variant, options)
}

pub fn check_instance(
    params: &CcbieParams,
    batch: &Batch,
    variant: &VariantConfig,
    options: GradCheckOptions,
) -> Result<GradCheckReport> {
    let grads = total_loss(batch, params, variant)?.backward()?;
    let mut analytic = Vec::with_capacity(params.parameter_count());
    let mut owner = Vec::with_capacity(params.parameter_count());
    for (slot, block) in params.blocks().iter().enumerate() {
        let zeros;
        let g = match grads.get(ParamSlot(slot)) {
            Some(g) => g,
            None => {
                zeros = DenseMatrix::zeros(block.rows(), block.cols());
                &zeros
            }
        };
        for (i, v) in g.data().iter().enumerate() {
            analytic.push(*v);
            owner.push((slot, i));
        }
    }
    if options.corrupt {
        if let Some(first) = analytic.first_mut() {
            *first = *first * 1.5 + 1e-3;
        }
    }

    let tape_loss = total_loss(batch, params, variant)?.value();
    let base = reference_loss(params, batch, variant);
    let mut probe = params.clone();
    let mut fd_error = None;
    let numeric = finite_difference_grad(
        |theta| match probe.set_flat(theta) {
            Ok(()) => (reference_loss(&probe, batch, variant) - base).to_f64(),
            Err(e) => {
                fd_error.get_or_insert(e);
                f64::NAN
            }
        },
        &params.to_flat(),
        options.step,
    );
    if let Some(e) = fd_error {
        return Err(e);
    }
    let numeric = numeric?;
    let loss_gap = (tape_loss - base.to_f64()).abs();

    let mut report = GradCheckReport {
        max_error: 0.0,
        worst_block: BLOCK_NAMES[0],
        worst_index: 0,
        analytic: analytic.first().copied().unwrap_or(0.0),
        numeric: numeric.first().copied().unwrap_or(0.0),
        parameters: analytic.len(),
        loss_gap,
    };
    for (k, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
        let err = relative_error(*a, *n);
        if err > report.max_error {
            let (slot, i) = owner[k];
            report = GradCheckReport {
                max_error: err,
                worst_block: BLOCK_NAMES[slot],
                worst_index: i,
                analytic: *a,
                numeric: *n,
                parameters: analytic.len(),
                loss_gap,
            };
        }
    }
    Ok(report)
}

fn dd_row(row: &[f64]) -> Vec<Dd> {
    row.iter().map(|&v| Dd::from(v)).collect()
}

fn dd_dot(a: &[Dd], b: &[Dd]) -> Dd {
    a.iter().zip(b).fold(Dd::ZERO, |acc, (x, y)| acc + *x * *y)
}

fn dd_cosine(a: &[Dd], b: &[Dd]) -> Dd {
    let eps = Dd::from(COSINE_EPS);
    dd_dot(a, b) / (dd_dot(a, a).sqrt().max(eps) * dd_dot(b, b).sqrt().max(eps))
}

fn dd_mlp(x: &[Dd], mlp: &Mlp) -> Vec<Dd> {
    let layer = |x: &[Dd], w: &DenseMatrix, b: &DenseMatrix| -> Vec<Dd> {
        (0..w.cols())
            .map(|c| {
                (0..w.rows()).fold(Dd::from(b.get(0, c)), |acc, r| acc + x[r] * Dd::from(w.get(r, c)))
            })
            .collect()
    };
    let h: Vec<Dd> = layer(x, &mlp.w1, &mlp.b1)
        .into_iter()
        .map(|v| v.max(Dd::ZERO))
        .collect();
    layer(&h, &mlp.w2, &mlp.b2)
}

/// Cluster weights of one node: cosine to every center, optional MLP, sigmoid.
fn dd_cluster_row(node: &[Dd], clusters: &[Vec<Dd>], mlp: &Mlp, mode: VariantMode) -> Vec<Dd> {
    let affinity: Vec<Dd> = clusters.iter().map(|c| dd_cosine(node, c)).collect();
    let logits = if mode == VariantMode::NoMlp {
        affinity
    } else {
        dd_mlp(&affinity, mlp)
    };
    logits.into_iter().map(Dd::sigmoid).collect()
}

/// The batch objective evaluated row by row in double-double arithmetic.
pub fn reference_loss(params: &CcbieParams, batch: &Batch, variant: &VariantConfig) -> Dd {
    let mode = variant.mode;
    let alpha = Dd::from(variant.effective_alpha());
    let clusters: Vec<Vec<Dd>> = params.clusters.row_iter().map(dd_row).collect();
    let mut total = Dd::ZERO;
    for (u, i, target) in batch.rows() {
        let user = dd_row(params.users.row(u));
        let item = dd_row(params.items.row(i));
        let explicit = Dd::from(0.5) * dd_cosine(&user, &item) + Dd::from(0.5);
        let implicit = if mode.uses_implicit() {
            let pref = dd_cluster_row(&user, &clusters, &params.user_mlp, mode);
            let raw = dd_cluster_row(&item, &clusters, &params.item_mlp, mode);
            let assign: Vec<Dd> = if mode == VariantMode::SoftmaxAssign {
                let top = raw.iter().copied().fold(raw[0], Dd::max);
                let e: Vec<Dd> = raw.iter().map(|&v| (v - top).exp()).collect();
                let sum = e.iter().fold(Dd::ZERO, |a, &b| a + b);
                e.into_iter().map(|v| v / sum).collect()
            } else {
                let sum = raw.iter().fold(Dd::ZERO, |a, &b| a + b).max(Dd::from(NORMALIZE_EPS));
                raw.into_iter().map(|v| v / sum).collect()
            };
            dd_dot(&pref, &assign)
        } else {
            Dd::ZERO
        };
        let y = alpha * explicit + (Dd::ONE - alpha) * implicit;
        total = total + (Dd::from(target) - y).square();
    }
    if mode.uses_implicit() {
        let mut spread = Dd::ZERO;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                for (x, y) in clusters[a].iter().zip(&clusters[b]) {
                    spread = spread + (*x - *y).square();
                }
            }
        }
        total = total - Dd::from(variant.beta) * spread;
    }
    total
}
