//! Ranking and threshold-free classification metrics.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::model::Scorer;

/// `candidates` sorted by descending score; equal scores keep ascending item
/// index.
pub fn rank_items_for_user(scorer: &Scorer<'_>, user: usize, candidates: &[usize]) -> Vec<usize> {
    let scores: Vec<f64> = candidates.iter().map(|&v| scorer.score(user, v)).collect();
    rank_by_scores(candidates, &scores)
}

pub fn rank_by_scores(items: &[usize], scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then_with(|| items[a].cmp(&items[b]))
    });
    order.into_iter().map(|i| items[i]).collect()
}

fn discount(position: usize) -> f64 {
    1.0 / ((position + 1) as f64).log2()
}

/// Binary-relevance NDCG over the first `k` positions (1-based discount
/// `1/log2(i+1)`). Zero when nothing is relevant.
pub fn ndcg_at_k(ranked: &[usize], relevant: &[usize], k: usize) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, v)| relevant.contains(v))
        .map(|(i, _)| discount(i + 1))
        .sum();
    let idcg: f64 = (1..=k.min(relevant.len())).map(discount).sum();
    dcg / idcg
}

pub fn recall_at_k(ranked: &[usize], relevant: &[usize], k: usize) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let hits = ranked.iter().take(k).filter(|v| relevant.contains(v)).count();
    hits as f64 / relevant.len() as f64
}

fn require_both(pos: &[f64], neg: &[f64], metric: &str) -> Result<()> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Protocol(format!(
            "{metric} needs positive and negative scores, got {} and {}",
            pos.len(),
            neg.len()
        )));
    }
    if pos.iter().chain(neg).any(|s| s.is_nan()) {
        return Err(Error::NonFinite(format!("{metric} received a NaN score")));
    }
    Ok(())
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half (Mann–Whitney U via midranks).
pub fn auc_roc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    require_both(pos, neg, "AUC-ROC")?;
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Sum of (doubled) midranks of positives, in integers.
    let mut rank_sum2: u128 = 0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        let positives = all[i..j].iter().filter(|x| x.1).count() as u128;
        // Ranks i+1..=j average to (i+1+j)/2.
        rank_sum2 += positives * (i + 1 + j) as u128;
        i = j;
    }
    let (np, nn) = (pos.len() as u128, neg.len() as u128);
    let u2 = rank_sum2 - np * (np + 1);
    Ok(u2 as f64 / (2 * np * nn) as f64)
}

/// Average precision over positives in descending score order; among equal
/// scores negatives come first.
pub fn auc_pr(pos: &[f64], neg: &[f64]) -> Result<f64> {
    require_both(pos, neg, "AUC-PR")?;
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| match b.0.total_cmp(&a.0) {
        Ordering::Equal => a.1.cmp(&b.1),
        other => other,
    });
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &(_, positive)) in all.iter().enumerate() {
        if positive {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Ok(sum / pos.len() as f64)
}
