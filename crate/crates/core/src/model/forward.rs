//! Pure forward computations of the model on whole matrices.

use super::params::Mlp;
use super::variant::VariantMode;
use crate::error::{Error, Result};
use crate::numerics::matrix::matmul_nt;
use crate::numerics::ops::{
    affine, cosine_rows, pairwise_sq_distance_sum, relu, row_normalize, row_softmax, sigmoid,
    squared_error_sum, COSINE_EPS, NORMALIZE_EPS,
};
use crate::numerics::DenseMatrix;

/// Cosine similarity mapped into `[0, 1]`: `(cos(u_i, v_j) + 1) / 2`.
pub fn explicit_scores(user_rows: &DenseMatrix, item_rows: &DenseMatrix) -> Result<DenseMatrix> {
    Ok(cosine_rows(user_rows, item_rows, COSINE_EPS)?.map(|c| 0.5 * c + 0.5))
}

/// `T = cos(V, C)`: affinity of every item to every cluster center.
pub fn item_cluster_affinity(items: &DenseMatrix, clusters: &DenseMatrix) -> Result<DenseMatrix> {
    cosine_rows(items, clusters, COSINE_EPS)
}

/// Raw (pre-sigmoid) output of a two-layer ReLU perceptron.
pub fn mlp_forward(x: &DenseMatrix, mlp: &Mlp) -> Result<DenseMatrix> {
    if x.cols() != mlp.input_dim() {
        return Err(Error::dim(
            "mlp_forward",
            format!("input has {} columns, MLP expects {}", x.cols(), mlp.input_dim()),
        ));
    }
    let hidden = relu(&affine(x, &mlp.w1, &mlp.b1)?);
    affine(&hidden, &mlp.w2, &mlp.b2)
}

/// Row-stochastic soft assignment `T^V` of items to clusters.
pub fn item_cluster_assignment(
    items: &DenseMatrix,
    clusters: &DenseMatrix,
    mlp: &Mlp,
    mode: VariantMode,
) -> Result<DenseMatrix> {
    let affinity = item_cluster_affinity(items, clusters)?;
    let logits = match mode {
        VariantMode::NoMlp => affinity,
        _ => mlp_forward(&affinity, mlp)?,
    };
    let squashed = sigmoid(&logits);
    match mode {
        VariantMode::SoftmaxAssign => Ok(row_softmax(&squashed)),
        _ => row_normalize(&squashed, NORMALIZE_EPS),
    }
}

/// Per-cluster user preference `P^O ∈ (0, 1)`; rows are not normalized.
pub fn user_cluster_preference(
    users: &DenseMatrix,
    clusters: &DenseMatrix,
    mlp: &Mlp,
    mode: VariantMode,
) -> Result<DenseMatrix> {
    let affinity = cosine_rows(users, clusters, COSINE_EPS)?;
    let logits = match mode {
        VariantMode::NoMlp => affinity,
        _ => mlp_forward(&affinity, mlp)?,
    };
    Ok(sigmoid(&logits))
}

/// `Ŷ = P^O · (T^V)ᵀ`.
pub fn implicit_scores(preference: &DenseMatrix, assignment: &DenseMatrix) -> Result<DenseMatrix> {
    matmul_nt(preference, assignment)
}

/// `Y = α·Ỹ + (1 − α)·Ŷ`.
pub fn combined_scores(
    explicit: &DenseMatrix,
    implicit: &DenseMatrix,
    alpha: f64,
) -> Result<DenseMatrix> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("alpha must be in [0, 1], got {alpha}")));
    }
    explicit.ensure_same_shape(implicit, "combined_scores")?;
    let data = explicit
        .data()
        .iter()
        .zip(implicit.data())
        .map(|(e, i)| (alpha * e + 0.0) + ((1.0 - alpha) * i + 0.0))
        .collect();
    DenseMatrix::from_vec(explicit.rows(), explicit.cols(), data)
}

/// `Σ (target − y)²`.
pub fn structure_loss(pred: &[f64], targets: &[f64]) -> Result<f64> {
    let col = DenseMatrix::from_vec(pred.len(), 1, pred.to_vec())?;
    squared_error_sum(&col, targets)
}

/// `−β · Σ_{i<j} ‖C_i − C_j‖²`, never positive.
pub fn cluster_separation_loss(clusters: &DenseMatrix, beta: f64) -> f64 {
    -beta * pairwise_sq_distance_sum(clusters) + 0.0
}
