use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::features::{sq_dist, FeatureSpace};
use super::kmeans::kmeans;
use crate::data::{CausalQuery, Dataset};
use crate::error::Result;

const KMEANS_MAX_ITER: usize = 100;

/// Default cluster count for `n` tuples: `max(5, min(⌊√n⌋, ⌊n/10⌋))`, never
/// more than `n`.
pub fn cluster_count(n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    let formula = 5.max(n.isqrt().min(n / 10));
    formula.min(n)
}

/// k-means partition of the alive tuples with a few representatives per
/// cluster.
#[derive(Debug, Clone, Serialize)]
pub struct ClusterIndex {
    pub k: usize,
    pub dims: usize,
    /// Cluster of each table row; `None` for rows dead at build time.
    pub assignment: Vec<Option<usize>>,
    pub centroids: Vec<f64>,
    /// Alive members of each cluster, ordered by distance to the centroid.
    pub members: Vec<Vec<usize>>,
    pub representatives: Vec<Vec<usize>>,
    /// Nearest representative of every non-representative member.
    pub rep_assignment: Vec<Option<usize>>,
}

impl ClusterIndex {
    pub fn centroid(&self, c: usize) -> &[f64] {
        &self.centroids[c * self.dims..(c + 1) * self.dims]
    }
}

fn percentile_index(len: usize, pct: f64) -> usize {
    ((len - 1) as f64 * pct / 100.0).round() as usize
}

fn pick_representatives(sorted: &[usize], s: usize) -> Vec<usize> {
    if sorted.is_empty() || s == 0 {
        return Vec::new();
    }
    let mut picks = vec![0];
    match s {
        1 => {}
        2 => picks.push(percentile_index(sorted.len(), 75.0)),
        _ => {
            let extra = s - 1;
            for j in 0..extra {
                let pct = 25.0 + 50.0 * j as f64 / (extra - 1) as f64;
                picks.push(percentile_index(sorted.len(), pct));
            }
        }
    }
    let mut reps: Vec<usize> = Vec::with_capacity(picks.len());
    for p in picks {
        if !reps.contains(&sorted[p]) {
            reps.push(sorted[p]);
        }
    }
    reps
}

/// Clusters the alive tuples in standardised `(Z, T, O)` space.
///
/// `k` defaults to [`cluster_count`]; `s` representatives are kept per
/// cluster — the member closest to the centroid, then members at evenly
/// spaced distance percentiles (the 75th when `s = 2`).
pub fn build_cluster_index(
    dataset: &Dataset,
    query: &CausalQuery,
    k: Option<usize>,
    s: usize,
    seed: u64,
) -> Result<ClusterIndex> {
    let space = FeatureSpace::build(dataset, query)?;
    build_from_features(dataset, &space, k, s, seed)
}

pub(crate) fn build_from_features(
    dataset: &Dataset,
    space: &FeatureSpace,
    k: Option<usize>,
    s: usize,
    seed: u64,
) -> Result<ClusterIndex> {
    let dims = space.dims();
    let alive: Vec<usize> = dataset.alive_ids().collect();
    let k = k.unwrap_or_else(|| cluster_count(alive.len())).min(alive.len());
    let mut points = Vec::with_capacity(alive.len() * dims);
    for &r in &alive {
        points.extend_from_slice(space.point(r));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let km = kmeans(&points, dims, k, KMEANS_MAX_ITER, &mut rng);
    let k = km.k();

    let mut assignment = vec![None; dataset.n()];
    let mut members: Vec<Vec<(f64, usize)>> = vec![Vec::new(); k];
    for (i, &r) in alive.iter().enumerate() {
        let c = km.assignment[i];
        assignment[r] = Some(c);
        members[c].push((sq_dist(space.point(r), km.centroid(c)), r));
    }
    let mut sorted_members = Vec::with_capacity(k);
    let mut representatives = Vec::with_capacity(k);
    let mut rep_assignment = vec![None; dataset.n()];
    for list in &mut members {
        list.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let ids: Vec<usize> = list.iter().map(|&(_, r)| r).collect();
        let reps = pick_representatives(&ids, s);
        for &r in &ids {
            if reps.contains(&r) {
                continue;
            }
            let nearest = reps
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    sq_dist(space.point(r), space.point(a))
                        .total_cmp(&sq_dist(space.point(r), space.point(b)))
                        .then(a.cmp(&b))
                });
            rep_assignment[r] = nearest;
        }
        representatives.push(reps);
        sorted_members.push(ids);
    }
    Ok(ClusterIndex {
        k,
        dims,
        assignment,
        centroids: km.centroids,
        members: sorted_members,
        representatives,
        rep_assignment,
    })
}
