//! Top-K ranking metrics over binary relevance.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

fn check_metric_inputs(relevant: &BTreeSet<u32>, k: usize) -> Result<()> {
    if relevant.is_empty() {
        return Err(Error::invalid(
            "relevant set",
            "metrics are undefined for a user with no relevant bundles",
        ));
    }
    if k == 0 {
        return Err(Error::invalid("K", "cutoff must be positive"));
    }
    Ok(())
}

/// Fraction of the relevant set recovered within the top `k` of `ranked`.
pub fn recall_at_k(ranked: &[u32], relevant: &BTreeSet<u32>, k: usize) -> Result<f64> {
    check_metric_inputs(relevant, k)?;
    let hits = ranked
        .iter()
        .take(k)
        .filter(|b| relevant.contains(b))
        .count();
    Ok(hits as f64 / relevant.len() as f64)
}

/// Binary-relevance NDCG: positions discount as `1/log2(rank + 1)` (1-based
/// ranks), normalized by the gain of packing `min(k, |relevant|)` hits at the
/// top.
pub fn ndcg_at_k(ranked: &[u32], relevant: &BTreeSet<u32>, k: usize) -> Result<f64> {
    check_metric_inputs(relevant, k)?;
    let discount = |rank: usize| 1.0 / ((rank + 1) as f64).log2();
    let mut dcg = 0.0;
    for (pos, b) in ranked.iter().take(k).enumerate() {
        if relevant.contains(b) {
            dcg += discount(pos + 1);
        }
    }
    let mut idcg = 0.0;
    for rank in 1..=k.min(relevant.len()) {
        idcg += discount(rank);
    }
    Ok(dcg / idcg)
}

/// Sort candidate bundles by descending score; equal scores fall back to
/// ascending bundle index so rankings are reproducible.
pub fn rank_by_score(scored: &mut Vec<(u32, f64)>) -> Vec<u32> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.iter().map(|&(b, _)| b).collect()
}
