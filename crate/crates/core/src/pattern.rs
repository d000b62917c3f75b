//! Search for one conjunctive subpopulation whose removal lands the effect in
//! the target interval.
//!
//! Each walk starts from the pattern of a fully specified group (every
//! eligible attribute fixed) and repeatedly drops one predicate, so the
//! selected population only grows. Predicates whose removal has helped before
//! are dropped more often. Every probe removes the pattern's matches from the
//! baseline model fitted on all the data; nothing is committed until the end.

use std::collections::{BTreeMap, HashMap};
use std::time::{Duration, Instant};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{code_label, discrete_codes, satisfies, CausalQuery, Dataset, Pattern, Predicate};
use crate::error::{Error, Result};
use crate::estimator::{self, EstimatorConfig, Fitted};
use crate::result::{RepairMode, RepairResult, StopReason, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PatternConfig {
    #[serde(flatten)]
    pub estimator: EstimatorConfig,
    pub k_walks: usize,
    /// Largest removable group as a fraction of the alive tuples.
    pub tau: f64,
    /// Let patterns constrain the treatment attribute.
    pub allow_treatment: bool,
    pub sample_fraction: f64,
    pub sample_threshold: usize,
    /// Seconds.
    pub time_limit: f64,
    pub record_trace: bool,
}

impl Default for PatternConfig {
    fn default() -> Self {
        Self {
            estimator: EstimatorConfig::default(),
            k_walks: 1000,
            tau: 0.2,
            allow_treatment: false,
            sample_fraction: 0.1,
            sample_threshold: 500_000,
            time_limit: 36_000.0,
            record_trace: true,
        }
    }
}

/// Columns a pattern may constrain: discrete attributes other than the
/// outcome, and other than the treatment unless `allow_treatment`.
pub fn eligible_attributes(dataset: &Dataset, query: &CausalQuery, allow_treatment: bool) -> Vec<usize> {
    (0..dataset.schema().len())
        .filter(|&c| {
            let name = dataset.schema().name(c);
            dataset.schema().kind(c).is_discrete()
                && name != query.outcome
                && (allow_treatment || name != query.treatment)
        })
        .collect()
}

/// Every non-empty full assignment of the eligible attributes with its
/// support, in ascending code order.
pub fn most_specific_groups(dataset: &Dataset, query: &CausalQuery) -> Result<Vec<(Pattern, usize)>> {
    groups_over(dataset, &eligible_attributes(dataset, query, false))
}

pub(crate) fn groups_over(dataset: &Dataset, cols: &[usize]) -> Result<Vec<(Pattern, usize)>> {
    if cols.is_empty() {
        return Err(Error::NoEligibleAttributes);
    }
    let codes: Vec<Vec<u32>> = cols
        .iter()
        .map(|&c| discrete_codes(dataset, c).expect("eligible attributes are discrete"))
        .collect();
    let mut counts: BTreeMap<Vec<u32>, usize> = BTreeMap::new();
    for row in dataset.alive_ids() {
        let key: Vec<u32> = codes.iter().map(|col| col[row]).collect();
        *counts.entry(key).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|(key, support)| {
            let preds = cols
                .iter()
                .zip(&key)
                .map(|(&c, &code)| (dataset.schema().name(c).to_owned(), code_label(dataset, c, code)));
            Ok((Pattern::new(preds)?, support))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PredicateStat {
    pub success_count: u64,
    pub cumulative_shift: f64,
}

/// How often dropping each predicate has moved the effect toward the target.
#[derive(Debug, Clone, PartialEq)]
pub struct PredicateWeights {
    stats: HashMap<Predicate, PredicateStat>,
    smoothing: f64,
    scale: f64,
}

impl PredicateWeights {
    /// `scale` converts effect units into weight; non-positive values mean 1.
    pub fn new(scale: f64) -> Self {
        Self {
            stats: HashMap::new(),
            smoothing: 1.0,
            scale: if scale > 0.0 && scale.is_finite() { scale } else { 1.0 },
        }
    }

    pub fn stat(&self, predicate: &Predicate) -> PredicateStat {
        self.stats.get(predicate).copied().unwrap_or_default()
    }

    /// Sampling weight: `smoothing + max(0, cumulative_shift) / scale`.
    pub fn weight(&self, predicate: &Predicate) -> f64 {
        self.smoothing + self.stat(predicate).cumulative_shift.max(0.0) / self.scale
    }

    /// Books the movement toward the target seen when `predicate` was dropped.
    pub fn record(&mut self, predicate: &Predicate, shift: f64) {
        let entry = self.stats.entry(predicate.clone()).or_default();
        entry.cumulative_shift += shift;
        if shift > 0.0 {
            entry.success_count += 1;
        }
    }
}

/// Drops one predicate, picked with probability proportional to its weight.
pub fn remove_predicate<R: Rng + ?Sized>(
    pattern: &Pattern,
    weights: &PredicateWeights,
    rng: &mut R,
) -> Result<Pattern> {
    Ok(remove_predicate_tracked(pattern, weights, rng)?.0)
}

fn remove_predicate_tracked<R: Rng + ?Sized>(
    pattern: &Pattern,
    weights: &PredicateWeights,
    rng: &mut R,
) -> Result<(Pattern, Predicate)> {
    if pattern.is_empty() {
        return Err(Error::EmptyPattern);
    }
    let w: Vec<f64> = pattern.predicates().iter().map(|p| weights.weight(p)).collect();
    let dist = WeightedIndex::new(&w).expect("weights are at least the smoothing constant");
    let dropped = pattern.predicates()[dist.sample(rng)].clone();
    Ok((pattern.without(&dropped.attribute), dropped))
}

/// Effect after dropping a pattern's matches, and how many tuples matched.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub ate: f64,
    pub support: usize,
}

/// Candidate ranking on failure: within the size limit first, then closest
/// to the target, then the smaller group, then pattern order.
fn better(a: (&Pattern, Evaluation, bool), b: (&Pattern, Evaluation, bool), target: f64) -> bool {
    let key = |(_, e, within): (&Pattern, Evaluation, bool)| (!within, (e.ate - target).abs(), e.support);
    let (ka, kb) = (key(a), key(b));
    match ka.0.cmp(&kb.0) {
        std::cmp::Ordering::Equal => {}
        o => return o.is_lt(),
    }
    match ka.1.total_cmp(&kb.1) {
        std::cmp::Ordering::Equal => {}
        o => return o.is_lt(),
    }
    (ka.2, a.0) < (kb.2, b.0)
}

/// Memoised pattern evaluation against one baseline model fitted on all the
/// alive tuples.
pub struct PatternProbe<'a> {
    data: &'a Dataset,
    query: &'a CausalQuery,
    est: &'a EstimatorConfig,
    baseline: Fitted,
    cache: HashMap<Pattern, Option<Evaluation>>,
}

impl<'a> PatternProbe<'a> {
    pub fn new(data: &'a Dataset, query: &'a CausalQuery, est: &'a EstimatorConfig) -> Result<Self> {
        Ok(Self {
            data,
            query,
            est,
            baseline: estimator::fit(data, query, est)?,
            cache: HashMap::new(),
        })
    }

    pub fn cached(&self) -> usize {
        self.cache.len()
    }

    /// Effect after removing the pattern's matches from the baseline model;
    /// `None` when the estimator cannot be fitted without them.
    pub fn evaluate(&mut self, pattern: &Pattern) -> Result<Option<Evaluation>> {
        if let Some(&hit) = self.cache.get(pattern) {
            return Ok(hit);
        }
        let ids = satisfies(pattern, self.data)?;
        let value = match self.baseline.probe(self.data, self.query, self.est, &ids) {
            Ok(ate) if ate.is_finite() => Some(Evaluation {
                ate,
                support: ids.len(),
            }),
            Ok(_) => None,
            Err(e) if is_estimation_failure(&e) => None,
            Err(e) => return Err(e),
        };
        self.cache.insert(pattern.clone(), value);
        Ok(value)
    }
}

pub(crate) fn is_estimation_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::RankDeficient
            | Error::DegenerateGroups
            | Error::SingularCapacitance
            | Error::RankLost
            | Error::Separation
            | Error::EmptyGroup
            | Error::SingularFisher
    )
}

fn support_of(data: &Dataset, pattern: &Pattern, cache: &HashMap<Pattern, Option<Evaluation>>) -> Result<usize> {
    match cache.get(pattern) {
        Some(Some(e)) => Ok(e.support),
        _ => Ok(satisfies(pattern, data)?.len()),
    }
}

/// Random-walk pattern search.
///
/// Returns on the first pattern whose removal, confirmed by a from-scratch
/// fit, lands in the interval. After `k_walks` walks (or at the time limit)
/// the result carries the best pattern seen and `hit_range = false`.
pub fn repair_pattern(dataset: &Dataset, query: &CausalQuery, config: &PatternConfig) -> Result<RepairResult> {
    let start = Instant::now();
    query.validate(dataset)?;
    let est = &config.estimator;
    let ate_before = estimator::refit_ate(dataset, query, est, &[])?;
    let mut trace: Vec<TraceRecord> = Vec::new();
    let mut log = |iteration: usize, ate: f64, action: String| {
        if config.record_trace {
            trace.push(TraceRecord { iteration, ate, action });
        }
    };
    log(0, ate_before, "start".into());

    let package = |pattern: Option<Pattern>, hit: bool, stop: Option<StopReason>, trace: Vec<TraceRecord>| {
        let ids = match &pattern {
            Some(p) => satisfies(p, dataset)?,
            None => Vec::new(),
        };
        let ate_after = estimator::refit_ate(dataset, query, est, &ids)?;
        Ok(RepairResult {
            mode: RepairMode::Pattern,
            removed_count: ids.len(),
            removed_fraction: ids.len() as f64 / dataset.alive_count().max(1) as f64,
            removed_ids: ids,
            pattern,
            ate_before,
            ate_after,
            hit_range: hit && query.contains(ate_after),
            trace: config.record_trace.then_some(trace),
            wall_time: start.elapsed().as_secs_f64(),
            stop_reason: stop,
        })
    };

    if query.contains(ate_before) {
        return package(None, true, None, trace);
    }

    let sampled = dataset.alive_count() > config.sample_threshold;
    let work = if sampled {
        let alive: Vec<usize> = dataset.alive_ids().collect();
        let m = ((alive.len() as f64 * config.sample_fraction).round() as usize).clamp(1, alive.len());
        let mut rng = ChaCha8Rng::seed_from_u64(est.seed ^ 0x5a3c_0f17);
        let mut picked: Vec<usize> = sample(&mut rng, alive.len(), m).into_iter().map(|i| alive[i]).collect();
        picked.sort_unstable();
        dataset.restrict(&picked)
    } else {
        dataset.clone()
    };

    let cols = eligible_attributes(&work, query, config.allow_treatment);
    let groups = groups_over(&work, &cols)?;
    let limit = config.tau * work.alive_count() as f64;
    let target = query.target;
    let scale = if query.epsilon > 0.0 {
        query.epsilon
    } else {
        (ate_before - target).abs()
    };
    let mut weights = PredicateWeights::new(scale);
    let mut walker = PatternProbe::new(&work, query, est)?;
    let mut rng = ChaCha8Rng::seed_from_u64(est.seed);
    let deadline = (config.time_limit.is_finite() && config.time_limit >= 0.0)
        .then(|| start.checked_add(Duration::from_secs_f64(config.time_limit)))
        .flatten();
    let mut best: Option<(Pattern, Evaluation, bool)> = None;
    let offer = |best: &mut Option<(Pattern, Evaluation, bool)>, p: &Pattern, e: Evaluation, within: bool| {
        let replace = match best {
            None => true,
            Some((bp, be, bw)) => better((p, e, within), (bp, *be, *bw), target),
        };
        if replace {
            *best = Some((p.clone(), e, within));
        }
    };

    let mut stop = StopReason::NoSolutionFound;
    'walks: for walk in 0..config.k_walks {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            stop = StopReason::TimeLimit;
            break;
        }
        let mut current = groups[rng.random_range(0..groups.len())].0.clone();
        let mut previous: Option<(Predicate, f64)> = None;
        let mut first = true;
        loop {
            let support = support_of(&work, &current, &walker.cache)?;
            let within = support as f64 <= limit;
            if !within && !first {
                break;
            }
            let eval = walker.evaluate(&current)?;
            first = false;
            if let Some(e) = eval {
                if let Some((dropped, before)) = previous.take() {
                    weights.record(&dropped, (before - target).abs() - (e.ate - target).abs());
                }
                offer(&mut best, &current, e, within);
                if within && query.contains(e.ate) {
                    let hit = if sampled {
                        let ids = satisfies(&current, dataset)?;
                        estimator::refit_ate(dataset, query, est, &ids).ok()
                    } else {
                        estimator::refit_ate(&work, query, est, &satisfies(&current, &work)?).ok()
                    };
                    if hit.is_some_and(|a| query.contains(a)) {
                        log(walk + 1, e.ate, format!("hit {current}"));
                        drop(log);
                        return package(Some(current), true, None, trace);
                    }
                }
            }
            if !within || current.is_empty() {
                break;
            }
            let (next, dropped) = remove_predicate_tracked(&current, &weights, &mut rng)?;
            previous = eval.map(|e| (dropped, e.ate));
            current = next;
            if deadline.is_some_and(|d| Instant::now() >= d) {
                stop = StopReason::TimeLimit;
                break 'walks;
            }
        }
        if let Some((p, e, _)) = &best {
            log(walk + 1, e.ate, format!("walk best {p}"));
        }
    }
    drop(log);
    package(best.map(|(p, _, _)| p), false, Some(stop), trace)
}
