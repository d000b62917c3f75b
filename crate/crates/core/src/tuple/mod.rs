//! Greedy tuple deletion guided by per-tuple influence.
//!
//! Scoring every alive tuple after every removal is too slow, so the search
//! clusters the data once and, every `refresh_period` removals, scores a few
//! sampled tuples per cluster. The cluster whose mean influence points most
//! strongly toward the target wins, and its best candidate is removed.

mod cluster;
mod engine;
mod features;
mod kmeans;
mod knn;

use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use cluster::{build_cluster_index, cluster_count, ClusterIndex};
pub use engine::{influence, InfluenceEngine};
pub use features::FeatureSpace;
pub use kmeans::{kmeans, KMeans};
pub use knn::amplify_with_knn;

use crate::data::{CausalQuery, Dataset};
use crate::error::{Error, Result};
use crate::estimator::{self, EstimatorConfig};
use crate::result::{RepairMode, RepairResult, StopReason, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TupleConfig {
    #[serde(flatten)]
    pub estimator: EstimatorConfig,
    /// Removals between two rescoring rounds.
    pub refresh_period: usize,
    /// Representatives per cluster.
    pub s: usize,
    /// Cluster count; `None` uses [`cluster_count`].
    pub k: Option<usize>,
    /// Tuples sampled per cluster in each iteration.
    pub mk_cap: usize,
    /// Fraction of rows kept when the data is large enough to be sampled.
    pub sample_fraction: f64,
    /// Row count above which the search runs on a uniform sample.
    pub sample_threshold: usize,
    /// Neighbours added per removed sample tuple.
    pub knn_k: usize,
    /// Defaults to 20% of the alive tuples.
    pub max_removals: Option<usize>,
    /// Seconds.
    pub time_limit: f64,
    pub record_trace: bool,
}

impl Default for TupleConfig {
    fn default() -> Self {
        Self {
            estimator: EstimatorConfig::default(),
            refresh_period: 10,
            s: 2,
            k: None,
            mk_cap: 5,
            sample_fraction: 0.1,
            sample_threshold: 500_000,
            knn_k: 100,
            max_removals: None,
            time_limit: 36_000.0,
            record_trace: true,
        }
    }
}

impl TupleConfig {
    fn budget(&self, alive: usize) -> usize {
        self.max_removals.unwrap_or(alive / 5)
    }

    fn deadline(&self, start: Instant) -> Option<Instant> {
        if self.time_limit.is_finite() && self.time_limit >= 0.0 {
            start.checked_add(Duration::from_secs_f64(self.time_limit))
        } else {
            None
        }
    }
}

struct Trace {
    on: bool,
    records: Vec<TraceRecord>,
}

impl Trace {
    fn new(on: bool) -> Self {
        Self {
            on,
            records: Vec::new(),
        }
    }

    fn push(&mut self, iteration: usize, ate: f64, action: impl Into<String>) {
        if self.on {
            self.records.push(TraceRecord {
                iteration,
                ate,
                action: action.into(),
            });
        }
    }

    fn finish(self) -> Option<Vec<TraceRecord>> {
        self.on.then_some(self.records)
    }
}

/// Distance to the target that removing a tuple of this score would save.
fn reduction(ate: f64, score: f64, target: f64) -> f64 {
    (ate - target).abs() - (ate - score - target).abs()
}

/// Outcome of a search loop before it is packaged into a [`RepairResult`].
struct Run {
    removed: Vec<usize>,
    stop: Option<StopReason>,
    trace: Trace,
}

/// A hit claimed by the incremental model is confirmed by a refit; when the
/// refit disagrees the model is replaced and the search carries on.
fn confirm_hit(engine: &mut InfluenceEngine, trace: &mut Trace, iteration: usize) -> Result<bool> {
    if !engine.query().contains(engine.ate()) {
        return Ok(false);
    }
    let exact = engine.verified_ate()?;
    if engine.query().contains(exact) {
        return Ok(true);
    }
    engine.refit()?;
    trace.push(iteration, engine.ate(), "refit");
    Ok(engine.query().contains(engine.ate()))
}

fn finish(
    mode_start: Instant,
    original: &Dataset,
    query: &CausalQuery,
    cfg: &EstimatorConfig,
    ate_before: f64,
    run: Run,
) -> Result<RepairResult> {
    let ate_after = estimator::refit_ate(original, query, cfg, &run.removed)?;
    let hit = query.contains(ate_after);
    let alive = original.alive_count().max(1);
    Ok(RepairResult {
        mode: RepairMode::Tuple,
        removed_count: run.removed.len(),
        removed_fraction: run.removed.len() as f64 / alive as f64,
        removed_ids: run.removed,
        pattern: None,
        ate_before,
        ate_after,
        hit_range: hit,
        trace: run.trace.finish(),
        wall_time: mode_start.elapsed().as_secs_f64(),
        stop_reason: if hit {
            None
        } else {
            Some(run.stop.unwrap_or(StopReason::NoProgress))
        },
    })
}

fn empty_result(ate: f64, start: Instant, record_trace: bool) -> RepairResult {
    let mut trace = Trace::new(record_trace);
    trace.push(0, ate, "start");
    RepairResult {
        mode: RepairMode::Tuple,
        removed_ids: Vec::new(),
        pattern: None,
        removed_count: 0,
        removed_fraction: 0.0,
        ate_before: ate,
        ate_after: ate,
        hit_range: true,
        trace: trace.finish(),
        wall_time: start.elapsed().as_secs_f64(),
        stop_reason: None,
    }
}

/// Cluster-sampled greedy deletion.
///
/// Stops on a confirmed hit, when two rescoring rounds in a row offer no tuple
/// that moves the effect toward the target, when `max_removals` tuples are
/// gone, or at the time limit. Above `sample_threshold` alive rows the search
/// runs on a uniform sample and the answer is grown with
/// [`amplify_with_knn`].
pub fn repair_tuples(dataset: &Dataset, query: &CausalQuery, config: &TupleConfig) -> Result<RepairResult> {
    let start = Instant::now();
    query.validate(dataset)?;
    let est = &config.estimator;
    let ate_before = estimator::refit_ate(dataset, query, est, &[])?;
    if query.contains(ate_before) {
        return Ok(empty_result(ate_before, start, config.record_trace));
    }
    if dataset.alive_count() > config.sample_threshold {
        return repair_sampled(dataset, query, config, start, ate_before);
    }
    let run = greedy(dataset, query, config, start)?;
    finish(start, dataset, query, est, ate_before, run)
}

fn repair_sampled(
    dataset: &Dataset,
    query: &CausalQuery,
    config: &TupleConfig,
    start: Instant,
    ate_before: f64,
) -> Result<RepairResult> {
    let alive: Vec<usize> = dataset.alive_ids().collect();
    let m = ((alive.len() as f64 * config.sample_fraction).round() as usize).clamp(1, alive.len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.estimator.seed ^ 0x5a3c_0f17);
    let mut picked: Vec<usize> = sample(&mut rng, alive.len(), m).into_iter().map(|i| alive[i]).collect();
    picked.sort_unstable();
    let sub = dataset.restrict(&picked);
    let sub_cfg = TupleConfig {
        sample_threshold: usize::MAX,
        ..*config
    };
    let mut run = greedy(&sub, query, &sub_cfg, start)?;
    let local: Vec<usize> = run.removed.iter().map(|&i| picked[i]).collect();
    run.removed = amplify_with_knn(dataset, query, &local, config.knn_k)?;
    let ate = estimator::refit_ate(dataset, query, &config.estimator, &run.removed)?;
    run.trace.push(local.len(), ate, format!("amplify {}", run.removed.len()));
    finish(start, dataset, query, &config.estimator, ate_before, run)
}

/// Influence scores valid since the last refresh, grouped by cluster.
struct ScoreCache {
    score: Vec<Option<f64>>,
    known: Vec<bool>,
    by_cluster: Vec<Vec<usize>>,
}

impl ScoreCache {
    fn new(n: usize, k: usize) -> Self {
        Self {
            score: vec![None; n],
            known: vec![false; n],
            by_cluster: vec![Vec::new(); k],
        }
    }

    fn clear(&mut self) {
        for list in &mut self.by_cluster {
            for &id in list.iter() {
                self.score[id] = None;
                self.known[id] = false;
            }
            list.clear();
        }
    }

    /// Scores the ids not yet known, in parallel, and files them under their
    /// clusters.
    fn fill(&mut self, engine: &InfluenceEngine, index: &ClusterIndex, ids: &[usize]) {
        let todo: Vec<usize> = ids.iter().copied().filter(|&id| !self.known[id]).collect();
        for (&id, s) in todo.iter().zip(engine.influences(&todo)) {
            self.score[id] = s.ok();
            self.known[id] = true;
            if let Some(c) = index.assignment[id] {
                self.by_cluster[c].push(id);
            }
        }
    }
}

fn greedy(dataset: &Dataset, query: &CausalQuery, config: &TupleConfig, start: Instant) -> Result<Run> {
    let deadline = config.deadline(start);
    let period = config.refresh_period.max(1);
    let mut engine = InfluenceEngine::new(dataset, query, &config.estimator)?;
    let index = build_cluster_index(dataset, query, config.k, config.s, config.estimator.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.estimator.seed.wrapping_add(1));
    let budget = config.budget(dataset.alive_count());
    let target = query.target;

    let mut trace = Trace::new(config.record_trace);
    trace.push(0, engine.ate(), "start");

    let mut cache = ScoreCache::new(dataset.n(), index.k);
    let mut removed = Vec::new();
    let mut since_refresh = period;
    let mut fruitless = 0;
    let mut iteration = 0;

    if confirm_hit(&mut engine, &mut trace, iteration)? {
        return Ok(Run { removed, stop: None, trace });
    }
    let stop = loop {
        if removed.len() >= budget {
            break Some(StopReason::BudgetExhausted);
        }
        if deadline.is_some_and(|d| Instant::now() >= d) {
            break Some(StopReason::TimeLimit);
        }
        let refreshed = since_refresh >= period;
        if refreshed {
            cache.clear();
            let reps: Vec<usize> = index
                .representatives
                .iter()
                .flatten()
                .copied()
                .filter(|&r| engine.dataset().is_alive(r))
                .collect();
            cache.fill(&engine, &index, &reps);
            since_refresh = 0;
            trace.push(iteration, engine.ate(), "rescore");
        }
        let means = sample_clusters(&engine, &index, config.mk_cap, &mut rng, &mut cache);

        let Some(id) = choose(&engine, &mut cache, &means, target) else {
            if refreshed {
                fruitless += 1;
                if fruitless >= 2 {
                    break Some(StopReason::NoProgress);
                }
            }
            since_refresh = period;
            continue;
        };
        fruitless = 0;
        engine.remove(&[id])?;
        removed.push(id);
        iteration += 1;
        since_refresh += 1;
        trace.push(iteration, engine.ate(), format!("remove {id}"));
        if confirm_hit(&mut engine, &mut trace, iteration)? {
            break None;
        }
    };
    Ok(Run { removed, stop, trace })
}

/// Draws up to `cap` alive tuples per cluster, scores them (reusing cached
/// scores) and returns each cluster's mean sampled influence.
fn sample_clusters(
    engine: &InfluenceEngine,
    index: &ClusterIndex,
    cap: usize,
    rng: &mut ChaCha8Rng,
    cache: &mut ScoreCache,
) -> Vec<f64> {
    let ds = engine.dataset();
    let mut batch = Vec::new();
    let mut spans = Vec::with_capacity(index.k);
    for c in 0..index.k {
        let alive: Vec<usize> = index.members[c].iter().copied().filter(|&r| ds.is_alive(r)).collect();
        let m = cap.min(alive.len());
        let from = batch.len();
        batch.extend(sample(rng, alive.len(), m).into_iter().map(|i| alive[i]));
        spans.push(from..batch.len());
    }
    cache.fill(engine, index, &batch);
    spans
        .into_iter()
        .map(|span| {
            let scores: Vec<f64> = batch[span].iter().filter_map(|&id| cache.score[id]).collect();
            if scores.is_empty() {
                f64::NAN
            } else {
                scores.iter().sum::<f64>() / scores.len() as f64
            }
        })
        .collect()
}

/// Picks the next tuple: clusters in order of `s_k · d`, and within the
/// first cluster that has one, the scored tuple that shrinks the distance to
/// the target most. The pick is re-probed against the current model so an
/// accepted removal always makes progress.
fn choose(engine: &InfluenceEngine, cache: &mut ScoreCache, means: &[f64], target: f64) -> Option<usize> {
    let ds = engine.dataset();
    let toward = (target - engine.ate()).signum();
    let mut order: Vec<usize> = (0..means.len()).filter(|&c| means[c].is_finite()).collect();
    order.sort_by(|&a, &b| (-toward * means[b]).total_cmp(&(-toward * means[a])).then(a.cmp(&b)));
    for c in order {
        loop {
            let mut best: Option<(f64, usize)> = None;
            for &id in &cache.by_cluster[c] {
                if !ds.is_alive(id) {
                    continue;
                }
                let Some(score) = cache.score[id] else { continue };
                let gain = reduction(engine.ate(), score, target);
                if gain > 0.0 && best.is_none_or(|(g, b)| gain > g || (gain == g && id < b)) {
                    best = Some((gain, id));
                }
            }
            let Some((_, id)) = best else { break };
            let now = engine.influence(id).ok();
            cache.score[id] = now;
            if now.is_some_and(|s| reduction(engine.ate(), s, target) > 0.0) {
                return Some(id);
            }
        }
    }
    None
}

/// Baseline that scores every tuple once and then removes them in order of
/// `score · d`, where `d` is the current direction to the target.
pub fn repair_tuples_single_update(
    dataset: &Dataset,
    query: &CausalQuery,
    config: &TupleConfig,
) -> Result<RepairResult> {
    let start = Instant::now();
    query.validate(dataset)?;
    let est = &config.estimator;
    let ate_before = estimator::refit_ate(dataset, query, est, &[])?;
    if query.contains(ate_before) {
        return Ok(empty_result(ate_before, start, config.record_trace));
    }
    let deadline = config.deadline(start);
    let budget = config.budget(dataset.alive_count());
    let mut engine = InfluenceEngine::new(dataset, query, est)?;
    let mut trace = Trace::new(config.record_trace);
    trace.push(0, engine.ate(), "start");

    let ids: Vec<usize> = dataset.alive_ids().collect();
    let scored: Vec<(f64, usize)> = ids
        .iter()
        .zip(engine.influences(&ids))
        .filter_map(|(&id, s)| s.ok().map(|s| (s, id)))
        .collect();
    let mut up: Vec<(f64, usize)> = scored.iter().copied().filter(|p| p.0 < 0.0).collect();
    let mut down: Vec<(f64, usize)> = scored.iter().copied().filter(|p| p.0 > 0.0).collect();
    up.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    down.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let (mut next_up, mut next_down) = (0, 0);

    let mut removed = Vec::new();
    let mut iteration = 0;
    let stop = loop {
        if removed.len() >= budget {
            break Some(StopReason::BudgetExhausted);
        }
        if deadline.is_some_and(|d| Instant::now() >= d) {
            break Some(StopReason::TimeLimit);
        }
        let (list, cursor) = if query.target > engine.ate() {
            (&up, &mut next_up)
        } else {
            (&down, &mut next_down)
        };
        let Some(&(_, id)) = list.get(*cursor) else {
            break Some(StopReason::NoProgress);
        };
        *cursor += 1;
        match engine.remove(&[id]) {
            Ok(()) => {}
            Err(Error::DegenerateGroups | Error::RankDeficient | Error::EmptyGroup) => continue,
            Err(e) => return Err(e),
        }
        removed.push(id);
        iteration += 1;
        trace.push(iteration, engine.ate(), format!("remove {id}"));
        if confirm_hit(&mut engine, &mut trace, iteration)? {
            break None;
        }
    };
    finish(start, dataset, query, est, ate_before, Run { removed, stop, trace })
}
