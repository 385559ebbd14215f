//! Forward kernels shared by the pure scoring path and the tape.
//!
//! Every kernel here is a plain function of its inputs. The tape in
//! [`super::tape`] records calls to these same kernels, so a value computed on
//! the tape is bitwise identical to the value computed directly.

use super::matrix::{dot, matmul, norm, DenseMatrix};
use crate::error::{Error, Result};

/// Floor applied to vector norms inside cosine similarities.
pub const COSINE_EPS: f64 = 1e-12;
/// Floor applied to row sums in [`row_normalize`].
pub const NORMALIZE_EPS: f64 = 1e-12;
/// Sigmoid arguments are clamped to `±SIGMOID_CLAMP` before exponentiation.
pub const SIGMOID_CLAMP: f64 = 500.0;

// Largest double strictly below one.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

pub(crate) fn row_norms(m: &DenseMatrix) -> Vec<f64> {
    m.row_iter().map(norm).collect()
}

/// All-pairs cosine similarity between the rows of `a` (n×d) and `b` (m×d).
///
/// Norms are floored at `eps` so zero rows produce a cosine of zero instead
/// of NaN.
pub fn cosine_rows(a: &DenseMatrix, b: &DenseMatrix, eps: f64) -> Result<DenseMatrix> {
    if a.cols() != b.cols() {
        return Err(Error::dim(
            "cosine_rows",
            format!("inner dimensions {} and {}", a.cols(), b.cols()),
        ));
    }
    if !(eps > 0.0) {
        return Err(Error::Domain {
            op: "cosine_rows",
            detail: format!("eps must be positive, got {eps}"),
        });
    }
    let na = row_norms(a);
    let nb = row_norms(b);
    let mut out = DenseMatrix::zeros(a.rows(), b.rows());
    for i in 0..a.rows() {
        let ai = a.row(i);
        let di = na[i].max(eps);
        for j in 0..b.rows() {
            let v = dot(ai, b.row(j)) / (di * nb[j].max(eps));
            out.set(i, j, v);
        }
    }
    Ok(out)
}

/// Row-aligned cosine: `out[i] = cos(a_i, b_i)` as an n×1 column.
pub fn paired_cosine(a: &DenseMatrix, b: &DenseMatrix, eps: f64) -> Result<DenseMatrix> {
    a.ensure_same_shape(b, "paired_cosine")?;
    let mut out = DenseMatrix::zeros(a.rows(), 1);
    for i in 0..a.rows() {
        let (ai, bi) = (a.row(i), b.row(i));
        let v = dot(ai, bi) / (norm(ai).max(eps) * norm(bi).max(eps));
        out.set(i, 0, v);
    }
    Ok(out)
}

/// Row-aligned dot product: `out[i] = a_i · b_i` as an n×1 column.
pub fn paired_dot(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    a.ensure_same_shape(b, "paired_dot")?;
    let mut out = DenseMatrix::zeros(a.rows(), 1);
    for i in 0..a.rows() {
        out.set(i, 0, dot(a.row(i), b.row(i)));
    }
    Ok(out)
}

#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    let x = x.clamp(-SIGMOID_CLAMP, SIGMOID_CLAMP);
    (1.0 / (1.0 + (-x).exp())).min(BELOW_ONE)
}

/// Elementwise logistic function. Outputs stay strictly inside (0, 1).
pub fn sigmoid(m: &DenseMatrix) -> DenseMatrix {
    m.map(sigmoid_scalar)
}

pub fn relu(m: &DenseMatrix) -> DenseMatrix {
    m.map(|v| v.max(0.0))
}

/// Divides each row by its sum (floored at `eps`). Entries must be nonnegative.
pub fn row_normalize(m: &DenseMatrix, eps: f64) -> Result<DenseMatrix> {
    let mut out = m.clone();
    for r in 0..m.rows() {
        let row = out.row_mut(r);
        if let Some(bad) = row.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::Domain {
                op: "row_normalize",
                detail: format!("row {r} has negative or NaN entry {bad}"),
            });
        }
        let denom = row.iter().sum::<f64>().max(eps);
        row.iter_mut().for_each(|v| *v /= denom);
    }
    Ok(out)
}

/// Numerically stable softmax over each row.
pub fn row_softmax(m: &DenseMatrix) -> DenseMatrix {
    let mut out = m.clone();
    for r in 0..m.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.iter_mut().for_each(|v| *v = (*v - max).exp());
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= total);
    }
    out
}

/// `x · w + bias`, with `bias` a 1×m row broadcast over every output row.
pub fn affine(x: &DenseMatrix, w: &DenseMatrix, bias: &DenseMatrix) -> Result<DenseMatrix> {
    if bias.rows() != 1 || bias.cols() != w.cols() {
        return Err(Error::dim(
            "affine",
            format!("bias {:?} for weight {:?}", bias.shape(), w.shape()),
        ));
    }
    let mut out = matmul(x, w)?;
    let b = bias.row(0);
    for r in 0..out.rows() {
        for (o, bv) in out.row_mut(r).iter_mut().zip(b) {
            *o += bv;
        }
    }
    Ok(out)
}

/// `Σ_{i<j} ‖m_i − m_j‖²` over the rows of `m`.
pub fn pairwise_sq_distance_sum(m: &DenseMatrix) -> f64 {
    let mut total = 0.0;
    for i in 0..m.rows() {
        let ri = m.row(i);
        for j in (i + 1)..m.rows() {
            total += ri
                .iter()
                .zip(m.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        }
    }
    total
}

/// `Σ (target − pred)²` over an n×1 prediction column.
pub fn squared_error_sum(pred: &DenseMatrix, targets: &[f64]) -> Result<f64> {
    if pred.cols() != 1 || pred.rows() != targets.len() {
        return Err(Error::dim(
            "squared_error",
            format!("{:?} predictions, {} targets", pred.shape(), targets.len()),
        ));
    }
    Ok(pred
        .data()
        .iter()
        .zip(targets)
        .map(|(p, t)| (t - p) * (t - p))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        let data = (0..rows * cols).map(|_| rng.gen_range(-2.0..2.0)).collect();
        DenseMatrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn cosine_basic_directions() {
        let a = DenseMatrix::from_rows(&[[1.0, 0.0]]).unwrap();
        let b = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let c = cosine_rows(&a, &b, COSINE_EPS).unwrap();
        assert_eq!(c.get(0, 0), 1.0);
        assert_eq!(c.get(0, 1), 0.0);
    }

    #[test]
    fn cosine_matches_scalar_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random(3, 4, &mut rng);
        let b = random(2, 4, &mut rng);
        let c = cosine_rows(&a, &b, COSINE_EPS).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
                for l in 0..4 {
                    ab += a.get(i, l) * b.get(j, l);
                    aa += a.get(i, l) * a.get(i, l);
                    bb += b.get(j, l) * b.get(j, l);
                }
                assert!((c.get(i, j) - ab / (aa.sqrt() * bb.sqrt())).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cosine_rejects_mismatch_and_handles_zero_rows() {
        let a = DenseMatrix::zeros(2, 3);
        let b = DenseMatrix::zeros(2, 4);
        assert!(matches!(
            cosine_rows(&a, &b, COSINE_EPS),
            Err(Error::Dimension { .. })
        ));
        let z = cosine_rows(&a, &DenseMatrix::filled(1, 3, 1.0), COSINE_EPS).unwrap();
        assert!(z.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sigmoid_reference_points() {
        assert_eq!(sigmoid_scalar(0.0), 0.5);
        let hi = sigmoid_scalar(1000.0);
        assert!(hi > 1.0 - 1e-12 && hi < 1.0);
        let lo = sigmoid_scalar(-1000.0);
        assert!(lo > 0.0 && lo < 1e-200);
        assert_eq!(sigmoid_scalar(2.0), 1.0 / (1.0 + (-2.0f64).exp()));
    }

    #[test]
    fn row_normalize_examples() {
        let m = DenseMatrix::from_rows(&[[0.5, 0.5, 1.0], [3.0, 3.0, 3.0]]).unwrap();
        let n = row_normalize(&m, NORMALIZE_EPS).unwrap();
        assert_eq!(n.row(0), &[0.25, 0.25, 0.5]);
        for v in n.row(1) {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let neg = DenseMatrix::from_rows(&[[0.5, -0.1]]).unwrap();
        assert!(matches!(
            row_normalize(&neg, NORMALIZE_EPS),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn row_normalize_random_rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random(4, 5, &mut rng).map(f64::abs);
        let n = row_normalize(&m, NORMALIZE_EPS).unwrap();
        for r in n.row_iter() {
            assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn softmax_examples() {
        let m = DenseMatrix::from_rows(&[[0.0, 0.0], [1.0, 2.0]]).unwrap();
        let s = row_softmax(&m);
        assert_eq!(s.row(0), &[0.5, 0.5]);
        let shifted = row_softmax(&m.map(|v| v + 123.0));
        assert!((shifted.get(1, 0) - s.get(1, 0)).abs() < 1e-15);

        let s3 = row_softmax(&DenseMatrix::from_rows(&[[1.0, 2.0, 3.0]]).unwrap());
        let z: f64 = [1.0f64, 2.0, 3.0].iter().map(|v| v.exp()).sum();
        for (j, x) in [1.0f64, 2.0, 3.0].iter().enumerate() {
            assert!((s3.get(0, j) - x.exp() / z).abs() < 1e-12);
        }
    }

    #[test]
    fn affine_checks_bias_shape() {
        let x = DenseMatrix::zeros(2, 3);
        let w = DenseMatrix::zeros(3, 4);
        assert!(affine(&x, &w, &DenseMatrix::zeros(1, 3)).is_err());
        let out = affine(&x, &w, &DenseMatrix::filled(1, 4, 2.0)).unwrap();
        assert!(out.data().iter().all(|v| *v == 2.0));
    }

    #[test]
    fn pairwise_distance_small() {
        let c = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(pairwise_sq_distance_sum(&c), 2.0);
        let same = DenseMatrix::from_rows(&[[0.3, 0.7], [0.3, 0.7], [0.3, 0.7]]).unwrap();
        assert_eq!(pairwise_sq_distance_sum(&same), 0.0);
    }
}
