use std::collections::HashSet;

use rayon::prelude::*;

use super::features::{sq_dist, FeatureSpace};
use crate::data::{CausalQuery, Dataset};
use crate::error::Result;

/// Grows a repair found on a sample: each id brings along its `k_nn` nearest
/// alive neighbours in `full` (standardised `(Z, T, O)` space, Euclidean,
/// ties to the lower id). Returns the original ids followed by the new
/// neighbours, without duplicates.
pub fn amplify_with_knn(
    full: &Dataset,
    query: &CausalQuery,
    ids: &[usize],
    k_nn: usize,
) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(ids.len() * (k_nn + 1));
    let mut seen = HashSet::new();
    for &id in ids {
        if seen.insert(id) {
            out.push(id);
        }
    }
    if k_nn == 0 || ids.is_empty() {
        return Ok(out);
    }
    let space = FeatureSpace::build(full, query)?;
    let alive: Vec<usize> = full.alive_ids().collect();
    let neighbours: Vec<Vec<usize>> = ids
        .par_iter()
        .map(|&id| {
            let centre = space.point(id);
            let mut cand: Vec<(f64, usize)> = alive
                .iter()
                .filter(|&&r| r != id)
                .map(|&r| (sq_dist(centre, space.point(r)), r))
                .collect();
            let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if cand.len() > k_nn {
                cand.select_nth_unstable_by(k_nn - 1, order);
                cand.truncate(k_nn);
            }
            cand.sort_by(order);
            cand.into_iter().map(|(_, r)| r).collect()
        })
        .collect();
    for list in neighbours {
        for r in list {
            if seen.insert(r) {
                out.push(r);
            }
        }
    }
    Ok(out)
}
