//! Randomized properties, run through proptest's runner so the acceptance
//! suite can report case counts.

use std::collections::HashSet;

use ccbie::eval::{auc_pr, auc_roc, ndcg_at_k, recall_at_k};
use ccbie::graph::synthetic::random_graph;
use ccbie::graph::{
    make_batches, sample_negatives, split_link_prediction, split_top_n, BipartiteGraph, Batch,
    SplitSpec,
};
use ccbie::model::{
    cluster_separation_loss, explicit_scores, implicit_scores, item_cluster_affinity,
    item_cluster_assignment, mlp_forward,
    total_loss, user_cluster_preference, Scorer, VariantConfig, VariantMode,
};
use ccbie::numerics::ops::{pairwise_sq_distance_sum, sigmoid_scalar, NORMALIZE_EPS};
use ccbie::numerics::{
    adam_step, cosine_rows, row_normalize, row_softmax, sigmoid, AdamState, DenseMatrix, ParamSlot, Tape,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::scalar;

/// Rounding slack on derived score ranges, matching the cosine contract.
const SLACK: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct PropertyResult {
    pub name: &'static str,
    pub cases: u32,
    pub failure: Option<String>,
}

fn check<S: Strategy>(
    name: &'static str,
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> PropertyResult {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let failure = runner.run(&strategy, test).err().map(|e| e.to_string());
    PropertyResult {
        name,
        cases,
        failure,
    }
}

fn matrix(rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> impl Strategy<Value = DenseMatrix> {
    (rows, cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(prop_oneof![4 => -5.0..5.0f64, 1 => Just(0.0)], r * c)
            .prop_map(move |d| DenseMatrix::from_vec(r, c, d).unwrap())
    })
}

fn pair(d: std::ops::Range<usize>) -> impl Strategy<Value = (DenseMatrix, DenseMatrix)> {
    d.prop_flat_map(|d| (matrix(1..6, d..d + 1), matrix(1..6, d..d + 1)))
}

fn in_unit(v: f64, what: &str) -> Result<(), TestCaseError> {
    prop_assert!((-SLACK..=1.0 + SLACK).contains(&v), "{what} = {v} outside [0, 1]");
    Ok(())
}

/// (seed, weight scale, mode index, alpha).
fn model_case() -> impl Strategy<Value = (u64, f64, usize, f64)> {
    (any::<u64>(), 0.1..20.0f64, 0..VariantMode::ALL.len(), 0.0..=1.0f64)
}

fn model(seed: u64, scale: f64) -> (ccbie::model::ModelShape, ccbie::CcbieParams) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = scalar::small_shape(&mut rng);
    (shape, scalar::random_params(&shape, seed, scale))
}

fn small_graph(seed: u64) -> BipartiteGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let users = rng.gen_range(2..12);
    let items = rng.gen_range(2..12);
    let p = rng.gen_range(0.1..0.9);
    let edges: Vec<_> = (0..users)
        .flat_map(|u| (0..items).map(move |v| (u, v)))
        .filter(|_| rng.gen_bool(p))
        .collect();
    BipartiteGraph::new(users, items, edges).unwrap()
}

pub fn all(cases: u32) -> Vec<PropertyResult> {
    vec![
        check("cosine within [-1-1e-12, 1+1e-12]", cases, pair(1..8), |(a, b)| {
            for v in cosine_rows(&a, &b, scalar::EPS).unwrap().data() {
                prop_assert!(v.abs() <= 1.0 + 1e-12, "cosine {v}");
            }
            Ok(())
        }),
        check("explicit scores in [0, 1]", cases, pair(1..8), |(a, b)| {
            for &v in explicit_scores(&a, &b).unwrap().data() {
                in_unit(v, "explicit score")?;
            }
            Ok(())
        }),
        check("row_normalize and row_softmax are row-stochastic", cases, matrix(1..6, 1..8), |m| {
            let positive = m.map(f64::abs);
            for out in [row_normalize(&positive, 1e-12).unwrap(), row_softmax(&m)] {
                for (r, row) in out.row_iter().enumerate() {
                    let s: f64 = row.iter().sum();
                    let input_sum: f64 = positive.row(r).iter().sum();
                    if input_sum >= 1e-12 {
                        prop_assert!((s - 1.0).abs() < 1e-10, "row sum {s}");
                    }
                }
            }
            Ok(())
        }),
        check("sigmoid strictly inside (0, 1) and monotone", cases, (-1e3..1e3f64, 0.0..10.0f64), |(x, dx)| {
            let (a, b) = (sigmoid_scalar(x), sigmoid_scalar(x + dx));
            prop_assert!(a > 0.0 && a < 1.0, "sigmoid({x}) = {a}");
            prop_assert!(b >= a);
            Ok(())
        }),
        check("item assignment T^V row-stochastic with entries in [0, 1]", cases, model_case(), |(seed, scale, m, _)| {
            let (_, p) = model(seed, scale);
            let mode = VariantMode::ALL[m];
            let t = item_cluster_assignment(&p.items, &p.clusters, &p.item_mlp, mode).unwrap();
            // uniform normalization floors the denominator at eps, so a row
            // whose sigmoid outputs all underflow sums to less than one
            let affinity = item_cluster_affinity(&p.items, &p.clusters).unwrap();
            let squashed = match mode {
                VariantMode::NoMlp => sigmoid(&affinity),
                _ => sigmoid(&mlp_forward(&affinity, &p.item_mlp).unwrap()),
            };
            for (r, row) in t.row_iter().enumerate() {
                let total: f64 = row.iter().sum();
                if mode == VariantMode::SoftmaxAssign || squashed.row(r).iter().sum::<f64>() >= NORMALIZE_EPS {
                    prop_assert!((total - 1.0).abs() < 1e-10, "row sum {total}");
                } else {
                    prop_assert!(total <= 1.0 + 1e-10, "row sum {total}");
                }
                for &v in row {
                    prop_assert!((0.0..=1.0).contains(&v), "entry {v}");
                }
            }
            Ok(())
        }),
        check("user preference P^O strictly inside (0, 1)", cases, model_case(), |(seed, scale, m, _)| {
            let (_, p) = model(seed, scale);
            let pref = user_cluster_preference(&p.users, &p.clusters, &p.user_mlp, VariantMode::ALL[m]).unwrap();
            for &v in pref.data() {
                prop_assert!(v > 0.0 && v < 1.0, "preference {v}");
            }
            Ok(())
        }),
        check("implicit scores in [0, 1]", cases, model_case(), |(seed, scale, m, _)| {
            let (_, p) = model(seed, scale);
            let mode = VariantMode::ALL[m];
            let pref = user_cluster_preference(&p.users, &p.clusters, &p.user_mlp, mode).unwrap();
            let t = item_cluster_assignment(&p.items, &p.clusters, &p.item_mlp, mode).unwrap();
            for &v in implicit_scores(&pref, &t).unwrap().data() {
                in_unit(v, "implicit score")?;
            }
            Ok(())
        }),
        check("fused scores in [0, 1] for alpha in [0, 1]", cases, model_case(), |(seed, scale, m, alpha)| {
            let (shape, p) = model(seed, scale);
            let scorer = Scorer::new(&p, VariantConfig::new(VariantMode::ALL[m], alpha, 0.005).unwrap()).unwrap();
            for u in 0..shape.users {
                for i in 0..shape.items {
                    in_unit(scorer.score(u, i), "fused score")?;
                }
            }
            Ok(())
        }),
        check("cluster separation loss is never positive", cases, (matrix(1..7, 1..6), 0.0..1.0f64), |(c, beta)| {
            prop_assert!(cluster_separation_loss(&c, beta) <= 0.0);
            Ok(())
        }),
        check("AUC-ROC invariant under strictly monotone transforms", cases,
            (prop::collection::vec(-40i32..40, 1..50), prop::collection::vec(-40i32..40, 1..50)),
            |(p, n)| {
                let pos: Vec<f64> = p.iter().map(|&k| k as f64 / 8.0).collect();
                let neg: Vec<f64> = n.iter().map(|&k| k as f64 / 8.0).collect();
                let f = |x: &f64| x.exp() + x.powi(3);
                let tp: Vec<f64> = pos.iter().map(f).collect();
                let tn: Vec<f64> = neg.iter().map(f).collect();
                prop_assert_eq!(auc_roc(&pos, &neg).unwrap(), auc_roc(&tp, &tn).unwrap());
                Ok(())
            }),
        check("AUC-ROC maps to 1 - AUC when the lists swap", cases,
            (prop::collection::vec(0.0..1.0f64, 1..50), prop::collection::vec(0.0..1.0f64, 1..50)),
            |(pos, neg)| {
                let a = auc_roc(&pos, &neg).unwrap();
                let b = auc_roc(&neg, &pos).unwrap();
                prop_assert!((a + b - 1.0).abs() < 1e-12);
                Ok(())
            }),
        check("Recall@k non-decreasing in k", cases,
            (Just((0..30usize).collect::<Vec<_>>()).prop_shuffle(), prop::collection::vec(0..30usize, 0..10)),
            |(ranked, relevant)| {
                let mut relevant = relevant;
                relevant.sort_unstable();
                relevant.dedup();
                for k in 1..30 {
                    prop_assert!(recall_at_k(&ranked, &relevant, k) <= recall_at_k(&ranked, &relevant, k + 1));
                }
                Ok(())
            }),
        check("NDCG@k non-decreasing in k for a single held-out item", cases,
            (Just((0..100usize).collect::<Vec<_>>()).prop_shuffle(), 0..100usize),
            |(ranked, target)| {
                for k in 1..100 {
                    prop_assert!(ndcg_at_k(&ranked, &[target], k) <= ndcg_at_k(&ranked, &[target], k + 1));
                }
                Ok(())
            }),
        check("every metric in [0, 1]", cases,
            (Just((0..30usize).collect::<Vec<_>>()).prop_shuffle(), prop::collection::vec(0..30usize, 0..10),
             1..35usize, prop::collection::vec(0.0..1.0f64, 1..20), prop::collection::vec(0.0..1.0f64, 1..20)),
            |(ranked, relevant, k, pos, neg)| {
                let mut relevant = relevant;
                relevant.sort_unstable();
                relevant.dedup();
                for v in [
                    ndcg_at_k(&ranked, &relevant, k),
                    recall_at_k(&ranked, &relevant, k),
                    auc_roc(&pos, &neg).unwrap(),
                    auc_pr(&pos, &neg).unwrap(),
                ] {
                    prop_assert!((0.0..=1.0).contains(&v), "metric {v}");
                }
                Ok(())
            }),
        check("scores independent of batch composition", cases, (model_case(), any::<u64>()), |((seed, scale, m, alpha), other)| {
            let (shape, p) = model(seed, scale);
            let v = VariantConfig::new(VariantMode::ALL[m], alpha, 0.005).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(other);
            let target = (rng.gen_range(0..shape.users), rng.gen_range(0..shape.items));
            let mut first = Batch::default();
            let mut second = Batch::default();
            first.push(target.0, target.1, 1.0);
            for _ in 0..rng.gen_range(0..6) {
                first.push(rng.gen_range(0..shape.users), rng.gen_range(0..shape.items), 0.0);
                second.push(rng.gen_range(0..shape.users), rng.gen_range(0..shape.items), 1.0);
            }
            second.push(target.0, target.1, 0.0);
            let a = total_loss(&first, &p, &v).unwrap();
            let b = total_loss(&second, &p, &v).unwrap();
            let sa = a.tape.value(a.scores).get(0, 0);
            let sb = b.tape.value(b.scores).get(second.len() - 1, 0);
            prop_assert_eq!(sa, sb);
            prop_assert_eq!(sa, Scorer::new(&p, v).unwrap().score(target.0, target.1));
            Ok(())
        }),
        check("alpha endpoints reproduce the single-relation variants", cases, (any::<u64>(), 0.1..20.0f64), |(seed, scale)| {
            let (shape, p) = model(seed, scale);
            let at = |mode, alpha| Scorer::new(&p, VariantConfig::new(mode, alpha, 0.005).unwrap()).unwrap();
            let (one, zero) = (at(VariantMode::Full, 1.0), at(VariantMode::Full, 0.0));
            let (e, i) = (at(VariantMode::ExplicitOnly, 0.7), at(VariantMode::ImplicitOnly, 0.7));
            for u in 0..shape.users {
                for v in 0..shape.items {
                    prop_assert_eq!(one.score(u, v), e.score(u, v));
                    prop_assert_eq!(zero.score(u, v), i.score(u, v));
                }
            }
            Ok(())
        }),
        check("strict negatives never hit an observed edge", cases, (any::<u64>(), 1..6usize), |(seed, n)| {
            let g = small_graph(seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
            match sample_negatives(&g, g.edges(), n, true, &mut rng) {
                Ok(batch) => {
                    prop_assert_eq!(batch.len(), g.edge_count() * (n + 1));
                    for (u, v, t) in batch.rows() {
                        if t == 0.0 {
                            prop_assert!(!g.contains(u, v), "negative ({u}, {v}) is an edge");
                        }
                    }
                }
                Err(_) => {
                    prop_assert!((0..g.user_count()).any(|u| g.degree(u) == g.item_count()));
                }
            }
            Ok(())
        }),
        check("link-prediction split partitions E and avoids it for negatives", cases, (any::<u64>(), 0.1..0.6f64), |(seed, frac)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (users, items) = (rng.gen_range(5..20), rng.gen_range(5..20));
            let edges = rng.gen_range(10..=(users * items / 3).max(10));
            let g = random_graph(users, items, edges, seed);
            let spec = SplitSpec { test_fraction: frac, ..SplitSpec::link_prediction(seed) };
            let s = split_link_prediction(&g, &spec).unwrap();
            let train: HashSet<_> = s.train.edges().iter().copied().collect();
            let test: HashSet<_> = s.test_positives.iter().copied().collect();
            prop_assert!(train.is_disjoint(&test));
            prop_assert_eq!(train.len() + test.len(), g.edge_count());
            prop_assert!(g.edges().iter().all(|e| train.contains(e) || test.contains(e)));
            prop_assert_eq!(s.test_negatives.len(), s.test_positives.len());
            prop_assert!(s.test_negatives.iter().all(|&(u, v)| !g.contains(u, v)));
            Ok(())
        }),
        check("top-N split partitions E", cases, (any::<u64>(), 0.05..0.6f64), |(seed, frac)| {
            let g = small_graph(seed);
            prop_assume!(!g.is_empty());
            let spec = SplitSpec { holdout_fraction: frac, ..SplitSpec::top_n(seed) };
            let s = split_top_n(&g, &spec).unwrap();
            let train: HashSet<_> = s.train.edges().iter().copied().collect();
            let test: HashSet<_> = s.test_pairs().collect();
            prop_assert!(train.is_disjoint(&test));
            prop_assert_eq!(train.len() + test.len(), g.edge_count());
            for u in 0..g.user_count() {
                if g.degree(u) == 1 {
                    prop_assert!(s.test_items[u].is_empty());
                }
            }
            Ok(())
        }),
        check("batches cover every edge exactly once", cases, (any::<u64>(), 1..50usize, 0..5u64), |(seed, b, epoch)| {
            let g = small_graph(seed);
            let batches = make_batches(g.edges(), b, seed, epoch).unwrap();
            let mut seen: Vec<_> = batches.concat();
            seen.sort_unstable();
            let mut want = g.edges().to_vec();
            want.sort_unstable();
            prop_assert_eq!(seen, want);
            Ok(())
        }),
        check("one Adam step on the cluster term spreads the centers", cases, (matrix(2..7, 1..6), 0.001..0.1f64), |(c, beta)| {
            prop_assume!(c.row_iter().any(|r| r != c.row(0)));
            let before = pairwise_sq_distance_sum(&c);
            let mut tape = Tape::new();
            let node = tape.param(ParamSlot(0), &c);
            let spread = tape.pairwise_distance(node).unwrap();
            let loss = tape.scale(spread, -beta).unwrap();
            let grads = tape.backward(loss).unwrap();
            let mut moved = c.clone();
            let mut state = AdamState::new(&[c.shape()]);
            adam_step(&mut [&mut moved], &[grads.get(ParamSlot(0))], &mut state, 0.002).unwrap();
            prop_assert!(pairwise_sq_distance_sum(&moved) > before);
            Ok(())
        }),
    ]
}
