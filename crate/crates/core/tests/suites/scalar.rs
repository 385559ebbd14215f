//! Plain-loop reference implementations, written without the library kernels.

use ccbie::model::{CcbieParams, Mlp, ModelShape, VariantMode};
use ccbie::numerics::DenseMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const EPS: f64 = 1e-12;

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for k in 0..a.len() {
        dot += a[k] * b[k];
        na += a[k] * a[k];
        nb += b[k] * b[k];
    }
    dot / (na.sqrt().max(EPS) * nb.sqrt().max(EPS))
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn mlp(x: &[f64], m: &Mlp) -> Vec<f64> {
    let mut hidden = vec![0.0; m.w1.cols()];
    for (h, out) in hidden.iter_mut().enumerate() {
        let mut s = m.b1.get(0, h);
        for (k, xv) in x.iter().enumerate() {
            s += xv * m.w1.get(k, h);
        }
        *out = if s > 0.0 { s } else { 0.0 };
    }
    let mut y = vec![0.0; m.w2.cols()];
    for (q, out) in y.iter_mut().enumerate() {
        let mut s = m.b2.get(0, q);
        for (h, hv) in hidden.iter().enumerate() {
            s += hv * m.w2.get(h, q);
        }
        *out = s;
    }
    y
}

fn cluster_logits(node: &[f64], clusters: &DenseMatrix, m: &Mlp, mode: VariantMode) -> Vec<f64> {
    let t: Vec<f64> = (0..clusters.rows()).map(|k| cosine(node, clusters.row(k))).collect();
    if mode == VariantMode::NoMlp {
        t
    } else {
        mlp(&t, m)
    }
}

pub fn assignment_row(item: &[f64], clusters: &DenseMatrix, m: &Mlp, mode: VariantMode) -> Vec<f64> {
    let o: Vec<f64> = cluster_logits(item, clusters, m, mode)
        .into_iter()
        .map(sigmoid)
        .collect();
    if mode == VariantMode::SoftmaxAssign {
        let top = o.iter().cloned().fold(f64::MIN, f64::max);
        let e: Vec<f64> = o.iter().map(|v| (v - top).exp()).collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|v| v / s).collect()
    } else {
        let s: f64 = o.iter().sum();
        o.into_iter().map(|v| v / s.max(EPS)).collect()
    }
}

pub fn preference_row(user: &[f64], clusters: &DenseMatrix, m: &Mlp, mode: VariantMode) -> Vec<f64> {
    cluster_logits(user, clusters, m, mode)
        .into_iter()
        .map(sigmoid)
        .collect()
}

/// Fused score of one pair from the definitions.
pub fn score(p: &CcbieParams, mode: VariantMode, alpha: f64, u: usize, v: usize) -> f64 {
    let explicit = (cosine(p.users.row(u), p.items.row(v)) + 1.0) / 2.0;
    let pref = preference_row(p.users.row(u), &p.clusters, &p.user_mlp, mode);
    let assign = assignment_row(p.items.row(v), &p.clusters, &p.item_mlp, mode);
    let implicit: f64 = pref.iter().zip(&assign).map(|(a, b)| a * b).sum();
    match mode {
        VariantMode::ExplicitOnly => explicit,
        VariantMode::ImplicitOnly => implicit,
        _ => alpha * explicit + (1.0 - alpha) * implicit,
    }
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DenseMatrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect();
    DenseMatrix::from_vec(rows, cols, data).unwrap()
}

/// Initialized parameters with MLP weights scaled by `scale` and random biases.
pub fn random_params(shape: &ModelShape, seed: u64, scale: f64) -> CcbieParams {
    let mut p = CcbieParams::init(shape, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for m in [&mut p.item_mlp, &mut p.user_mlp] {
        for w in [&mut m.w1, &mut m.w2] {
            for v in w.data_mut() {
                *v *= scale;
            }
        }
        for b in [&mut m.b1, &mut m.b2] {
            for v in b.data_mut() {
                *v = rng.gen_range(-scale..scale);
            }
        }
    }
    p
}

pub fn small_shape(rng: &mut ChaCha8Rng) -> ModelShape {
    let assign = rng.gen_range(1..=3);
    let clusters = assign + rng.gen_range(0..=2);
    let hidden = clusters + rng.gen_range(0..=2);
    ModelShape {
        users: rng.gen_range(1..=6),
        items: rng.gen_range(1..=8),
        dim: hidden + rng.gen_range(0..=3),
        clusters,
        hidden,
        assign,
    }
}
