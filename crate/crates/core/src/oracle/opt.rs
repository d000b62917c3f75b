use std::time::Instant;

use rayon::prelude::*;

use crate::data::{code_label, domain_size, satisfies, CausalQuery, Dataset, Pattern};
use crate::error::{Error, Result};
use crate::estimator::{self, EstimatorConfig};
use crate::pattern::{eligible_attributes, is_estimation_failure};
use crate::result::{RepairMode, RepairResult, StopReason};

/// Largest alive-tuple count [`opt_tuple`] accepts.
pub const OPT_TUPLE_LIMIT: usize = 30;
/// Largest pattern space [`opt_pattern`] accepts.
pub const OPT_PATTERN_LIMIT: u128 = 1_000_000;

const CHUNK: usize = 4096;

fn hit_after(data: &Dataset, query: &CausalQuery, est: &EstimatorConfig, removed: &[usize]) -> Result<Option<f64>> {
    match estimator::refit_ate(data, query, est, removed) {
        Ok(ate) if query.contains(ate) => Ok(Some(ate)),
        Ok(_) => Ok(None),
        Err(e) if is_estimation_failure(&e) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Advances `c` to the next `c.len()`-combination of `0..n` in lexicographic
/// order; `false` once exhausted.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let Some(i) = (0..k).rev().find(|&i| c[i] < n - k + i) else {
        return false;
    };
    c[i] += 1;
    for j in i + 1..k {
        c[j] = c[j - 1] + 1;
    }
    true
}

fn outcome(
    mode: RepairMode,
    removed: Vec<usize>,
    pattern: Option<Pattern>,
    data: &Dataset,
    ate_before: f64,
    ate_after: f64,
    hit: bool,
    start: Instant,
) -> RepairResult {
    RepairResult {
        mode,
        removed_count: removed.len(),
        removed_fraction: removed.len() as f64 / data.alive_count().max(1) as f64,
        removed_ids: removed,
        pattern,
        ate_before,
        ate_after,
        hit_range: hit,
        trace: None,
        wall_time: start.elapsed().as_secs_f64(),
        stop_reason: (!hit).then_some(StopReason::Infeasible),
    }
}

/// Smallest tuple deletion reaching the interval, found by trying every
/// subset in order of size (lexicographically first witness). Sizes above
/// `budget` are not tried; a miss is reported with `stop_reason = Infeasible`.
pub fn opt_tuple(data: &Dataset, query: &CausalQuery, est: &EstimatorConfig, budget: usize) -> Result<RepairResult> {
    opt_tuple_with_limit(data, query, est, budget, OPT_TUPLE_LIMIT)
}

pub fn opt_tuple_with_limit(
    data: &Dataset,
    query: &CausalQuery,
    est: &EstimatorConfig,
    budget: usize,
    limit: usize,
) -> Result<RepairResult> {
    let start = Instant::now();
    query.validate(data)?;
    let n = data.alive_count();
    if n > limit {
        return Err(Error::InstanceTooLarge { n, limit });
    }
    let ate_before = estimator::refit_ate(data, query, est, &[])?;
    if query.contains(ate_before) {
        return Ok(outcome(RepairMode::Tuple, Vec::new(), None, data, ate_before, ate_before, true, start));
    }
    let alive: Vec<usize> = data.alive_ids().collect();
    for size in 1..=budget.min(n) {
        let mut comb: Vec<usize> = (0..size).collect();
        let mut more = true;
        while more {
            let mut chunk = Vec::with_capacity(CHUNK);
            while more && chunk.len() < CHUNK {
                chunk.push(comb.iter().map(|&i| alive[i]).collect::<Vec<usize>>());
                more = next_combination(&mut comb, n);
            }
            let found = chunk
                .par_iter()
                .map(|ids| hit_after(data, query, est, ids).map(|h| h.map(|a| (ids.clone(), a))))
                .find_first(|r| !matches!(r, Ok(None)));
            match found {
                Some(Ok(Some((ids, ate)))) => {
                    return Ok(outcome(RepairMode::Tuple, ids, None, data, ate_before, ate, true, start));
                }
                Some(Err(e)) => return Err(e),
                _ => {}
            }
        }
    }
    Ok(outcome(RepairMode::Tuple, Vec::new(), None, data, ate_before, ate_before, false, start))
}

/// Smallest-support pattern whose removal reaches the interval, found by
/// evaluating every pattern over the eligible attributes with a refit. Ties
/// go to the lexicographically smaller pattern.
pub fn opt_pattern(data: &Dataset, query: &CausalQuery, est: &EstimatorConfig, allow_treatment: bool) -> Result<RepairResult> {
    opt_pattern_with_limit(data, query, est, allow_treatment, OPT_PATTERN_LIMIT)
}

pub fn opt_pattern_with_limit(
    data: &Dataset,
    query: &CausalQuery,
    est: &EstimatorConfig,
    allow_treatment: bool,
    limit: u128,
) -> Result<RepairResult> {
    let start = Instant::now();
    query.validate(data)?;
    let cols = eligible_attributes(data, query, allow_treatment);
    if cols.is_empty() {
        return Err(Error::NoEligibleAttributes);
    }
    let radix: Vec<usize> = cols.iter().map(|&c| domain_size(data, c) + 1).collect();
    let size = radix.iter().fold(1u128, |acc, &r| acc.saturating_mul(r as u128));
    if size > limit {
        return Err(Error::PatternSpaceTooLarge { size, limit });
    }
    let ate_before = estimator::refit_ate(data, query, est, &[])?;
    if query.contains(ate_before) {
        return Ok(outcome(RepairMode::Pattern, Vec::new(), None, data, ate_before, ate_before, true, start));
    }

    let decode = |mut index: u128| -> Result<Pattern> {
        let mut preds = Vec::new();
        for (&c, &r) in cols.iter().zip(&radix) {
            let digit = (index % r as u128) as usize;
            index /= r as u128;
            if digit > 0 {
                preds.push((data.schema().name(c).to_owned(), code_label(data, c, digit as u32 - 1)));
            }
        }
        Pattern::new(preds)
    };
    let hits: Vec<(usize, Pattern, Vec<usize>, f64)> = (0..size as u64)
        .into_par_iter()
        .map(|i| -> Result<Option<(usize, Pattern, Vec<usize>, f64)>> {
            let pattern = decode(i as u128)?;
            let ids = satisfies(&pattern, data)?;
            if ids.is_empty() {
                return Ok(None);
            }
            Ok(hit_after(data, query, est, &ids)?.map(|ate| (ids.len(), pattern, ids, ate)))
        })
        .filter_map(|r| r.transpose())
        .collect::<Result<_>>()?;
    let best = hits
        .into_iter()
        .min_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    Ok(match best {
        Some((_, pattern, ids, ate)) => {
            outcome(RepairMode::Pattern, ids, Some(pattern), data, ate_before, ate, true, start)
        }
        None => outcome(RepairMode::Pattern, Vec::new(), None, data, ate_before, ate_before, false, start),
    })
}
