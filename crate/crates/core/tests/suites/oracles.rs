//! Library kernels against direct, slow evaluations of their definitions.

use std::collections::HashSet;

use ccbie::eval::{auc_pr, auc_roc, ndcg_at_k, rank_by_scores, recall_at_k};
use ccbie::model::{
    cluster_separation_loss, explicit_scores, implicit_scores, item_cluster_assignment,
    mlp_forward, structure_loss, user_cluster_preference, Scorer, VariantConfig, VariantMode,
};
use ccbie::numerics::{cosine_rows, DenseMatrix};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::scalar;

pub const TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct OracleResult {
    pub name: &'static str,
    pub instances: usize,
    pub max_error: f64,
}

impl OracleResult {
    pub fn passed(&self) -> bool {
        self.max_error <= TOLERANCE
    }
}

fn run(name: &'static str, instances: usize, seed: u64, mut f: impl FnMut(&mut ChaCha8Rng) -> f64) -> OracleResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_error = (0..instances).map(|_| f(&mut rng)).fold(0.0, f64::max);
    OracleResult {
        name,
        instances,
        max_error,
    }
}

fn max_diff(m: &DenseMatrix, f: impl Fn(usize, usize) -> f64) -> f64 {
    let mut worst = 0.0f64;
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            worst = worst.max((m.get(r, c) - f(r, c)).abs());
        }
    }
    worst
}

fn scores(rng: &mut ChaCha8Rng, n: usize, grid: bool) -> Vec<f64> {
    (0..n)
        .map(|_| {
            if grid {
                rng.gen_range(0..8) as f64 / 8.0
            } else {
                rng.gen::<f64>()
            }
        })
        .collect()
}

fn pair_counting_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut wins = 0.0;
    for p in pos {
        for n in neg {
            if p > n {
                wins += 1.0;
            } else if p == n {
                wins += 0.5;
            }
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

/// Precision at every positive, with tied negatives ranked ahead of it and
/// tied positives ordered by index.
fn direct_average_precision(pos: &[f64], neg: &[f64]) -> f64 {
    let mut total = 0.0;
    for (i, &s) in pos.iter().enumerate() {
        let pos_ahead = pos
            .iter()
            .enumerate()
            .filter(|&(j, &t)| t > s || (t == s && j < i))
            .count();
        let neg_ahead = neg.iter().filter(|&&t| t >= s).count();
        let hits = pos_ahead + 1;
        total += hits as f64 / (pos_ahead + neg_ahead + 1) as f64;
    }
    total / pos.len() as f64
}

fn direct_ndcg(ranked: &[usize], relevant: &HashSet<usize>, k: usize) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let gain = |pos: usize| 1.0 / ((pos + 1) as f64).ln() * std::f64::consts::LN_2;
    let mut dcg = 0.0;
    for (i, item) in ranked.iter().enumerate() {
        if i < k && relevant.contains(item) {
            dcg += gain(i + 1);
        }
    }
    let mut idcg = 0.0;
    for pos in 1..=k {
        if pos <= relevant.len() {
            idcg += gain(pos);
        }
    }
    dcg / idcg
}

pub fn all(instances: usize) -> Vec<OracleResult> {
    let modes = VariantMode::ALL;
    vec![
        run("cosine_rows vs scalar loop", instances, 1, |rng| {
            let (n, m, d) = (rng.gen_range(1..6), rng.gen_range(1..6), rng.gen_range(1..7));
            let a = scalar::random_matrix(rng, n, d, 3.0);
            let b = scalar::random_matrix(rng, m, d, 3.0);
            let c = cosine_rows(&a, &b, scalar::EPS).unwrap();
            max_diff(&c, |i, j| scalar::cosine(a.row(i), b.row(j)))
        }),
        run("explicit scores vs scalar loop", instances, 2, |rng| {
            let (n, m, d) = (rng.gen_range(1..6), rng.gen_range(1..6), rng.gen_range(1..7));
            let a = scalar::random_matrix(rng, n, d, 3.0);
            let b = scalar::random_matrix(rng, m, d, 3.0);
            let e = explicit_scores(&a, &b).unwrap();
            max_diff(&e, |i, j| (scalar::cosine(a.row(i), b.row(j)) + 1.0) / 2.0)
        }),
        run("implicit scores vs triple loop", instances, 3, |rng| {
            let (i, j, q) = (rng.gen_range(1..7), rng.gen_range(1..7), rng.gen_range(1..5));
            let p = scalar::random_matrix(rng, i, q, 1.0);
            let t = scalar::random_matrix(rng, j, q, 1.0);
            let y = implicit_scores(&p, &t).unwrap();
            max_diff(&y, |a, b| {
                let mut s = 0.0;
                for k in 0..q {
                    s += p.get(a, k) * t.get(b, k);
                }
                s
            })
        }),
        run("MLP vs scalar loop", instances, 4, |rng| {
            let shape = scalar::small_shape(rng);
            let params = scalar::random_params(&shape, rng.gen(), 2.0);
            let rows = rng.gen_range(1..6);
            let x = scalar::random_matrix(rng, rows, shape.clusters, 1.0);
            let y = mlp_forward(&x, &params.item_mlp).unwrap();
            let mut worst = 0.0f64;
            for r in 0..x.rows() {
                let want = scalar::mlp(x.row(r), &params.item_mlp);
                for (c, w) in want.iter().enumerate() {
                    worst = worst.max((y.get(r, c) - w).abs());
                }
            }
            worst
        }),
        run("item assignment vs composed scalar pipeline", instances, 5, |rng| {
            let shape = scalar::small_shape(rng);
            let params = scalar::random_params(&shape, rng.gen(), 2.0);
            let mode = modes[rng.gen_range(0..modes.len())];
            let t = item_cluster_assignment(&params.items, &params.clusters, &params.item_mlp, mode)
                .unwrap();
            let mut worst = 0.0f64;
            for j in 0..shape.items {
                let want = scalar::assignment_row(params.items.row(j), &params.clusters, &params.item_mlp, mode);
                for (k, w) in want.iter().enumerate() {
                    worst = worst.max((t.get(j, k) - w).abs());
                }
            }
            worst
        }),
        run("user preference vs composed scalar pipeline", instances, 6, |rng| {
            let shape = scalar::small_shape(rng);
            let params = scalar::random_params(&shape, rng.gen(), 2.0);
            let mode = modes[rng.gen_range(0..modes.len())];
            let p = user_cluster_preference(&params.users, &params.clusters, &params.user_mlp, mode)
                .unwrap();
            let mut worst = 0.0f64;
            for i in 0..shape.users {
                let want = scalar::preference_row(params.users.row(i), &params.clusters, &params.user_mlp, mode);
                for (k, w) in want.iter().enumerate() {
                    worst = worst.max((p.get(i, k) - w).abs());
                }
            }
            worst
        }),
        run("fused pair scores vs scalar definition", instances, 7, |rng| {
            let shape = scalar::small_shape(rng);
            let params = scalar::random_params(&shape, rng.gen(), 2.0);
            let mode = modes[rng.gen_range(0..modes.len())];
            let alpha = rng.gen::<f64>();
            let v = VariantConfig::new(mode, alpha, 0.005).unwrap();
            let scorer = Scorer::new(&params, v).unwrap();
            let mut worst = 0.0f64;
            for u in 0..shape.users {
                for i in 0..shape.items {
                    let want = scalar::score(&params, mode, alpha, u, i);
                    worst = worst.max((scorer.score(u, i) - want).abs());
                }
            }
            worst
        }),
        run("structure loss vs scalar sum", instances, 8, |rng| {
            let n = rng.gen_range(1..40);
            let pred: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            let targets: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.3) { 1.0 } else { 0.0 }).collect();
            let want: f64 = pred.iter().zip(&targets).map(|(p, t)| (t - p) * (t - p)).sum();
            (structure_loss(&pred, &targets).unwrap() - want).abs()
        }),
        run("cluster loss vs double loop", instances, 9, |rng| {
            let (k, d) = (rng.gen_range(1..7), rng.gen_range(1..5));
            let c = scalar::random_matrix(rng, k, d, 2.0);
            let beta = rng.gen::<f64>() * 0.1;
            let mut want = 0.0;
            for a in 0..k {
                for b in a + 1..k {
                    for x in 0..d {
                        want += (c.get(a, x) - c.get(b, x)).powi(2);
                    }
                }
            }
            (cluster_separation_loss(&c, beta) - (-beta * want)).abs()
        }),
        run("AUC-ROC vs pair counting", instances, 10, |rng| {
            let grid = rng.gen_bool(0.5);
            let n_pos = rng.gen_range(1..60);
            let pos = scores(rng, n_pos, grid);
            let n_neg = rng.gen_range(1..60);
            let neg = scores(rng, n_neg, grid);
            (auc_roc(&pos, &neg).unwrap() - pair_counting_auc(&pos, &neg)).abs()
        }),
        run("AUC-PR vs direct definition", instances, 11, |rng| {
            let grid = rng.gen_bool(0.5);
            let n_pos = rng.gen_range(1..40);
            let pos = scores(rng, n_pos, grid);
            let n_neg = rng.gen_range(1..40);
            let neg = scores(rng, n_neg, grid);
            (auc_pr(&pos, &neg).unwrap() - direct_average_precision(&pos, &neg)).abs()
        }),
        run("NDCG@k vs direct definition", instances, 12, |rng| {
            let n = rng.gen_range(1..30);
            let mut ranked: Vec<usize> = (0..n).collect();
            ranked.shuffle(rng);
            let relevant: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.3)).collect();
            let set: HashSet<usize> = relevant.iter().copied().collect();
            let k = rng.gen_range(1..=n + 2);
            (ndcg_at_k(&ranked, &relevant, k) - direct_ndcg(&ranked, &set, k)).abs()
        }),
        run("Recall@k vs direct definition", instances, 13, |rng| {
            let n = rng.gen_range(1..30);
            let mut ranked: Vec<usize> = (0..n).collect();
            ranked.shuffle(rng);
            let relevant: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.3)).collect();
            let k = rng.gen_range(1..=n + 2);
            let want = if relevant.is_empty() {
                0.0
            } else {
                ranked[..k.min(n)].iter().filter(|v| relevant.contains(v)).count() as f64
                    / relevant.len() as f64
            };
            (recall_at_k(&ranked, &relevant, k) - want).abs()
        }),
        run("ranking vs full sort oracle", instances, 14, |rng| {
            let mut items: Vec<usize> = (0..500).collect();
            items.shuffle(rng);
            items.truncate(100);
            let s: Vec<f64> = items.iter().map(|_| rng.gen_range(0..20) as f64 / 20.0).collect();
            let mut oracle: Vec<(f64, usize)> = s.iter().copied().zip(items.iter().copied()).collect();
            oracle.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            let want: Vec<usize> = oracle.into_iter().map(|x| x.1).collect();
            if rank_by_scores(&items, &s) == want {
                0.0
            } else {
                f64::INFINITY
            }
        }),
    ]
}
