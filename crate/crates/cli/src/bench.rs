//! Seeded scenario grids over the synthetic generator.
//!
//! Each scenario expands into the cartesian product of its sweep lists
//! (an empty list keeps the base value), every cell is run once per seed and
//! method, and one CSV row is written per (cell, seed, method). Failures are
//! recorded in the `error` column and do not stop the suite.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use ate_repair::estimator::EstimatorConfig;
use ate_repair::oracle::{
    generate, inject_noise, opt_pattern_with_limit, opt_tuple_with_limit, NoiseKind, SynthSpec, OPT_PATTERN_LIMIT,
    OPT_TUPLE_LIMIT,
};
use ate_repair::{
    repair_pattern, repair_tuples, repair_tuples_single_update, Error, PatternConfig, RepairResult, Result,
    TupleConfig,
};
use serde::Deserialize;

use crate::config::Mode;

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub seeds: Vec<u64>,
    pub methods: Vec<Mode>,
    pub tuple: TupleConfig,
    pub pattern: PatternConfig,
    /// Largest deletion tried by `opt-tuple`; all tuples when unset.
    pub opt_budget: Option<usize>,
    pub opt_tuple_limit: usize,
    #[serde(rename = "scenario")]
    pub scenarios: Vec<Scenario>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            seeds: vec![0],
            methods: vec![Mode::Tuple],
            tuple: TupleConfig::default(),
            pattern: PatternConfig::default(),
            opt_budget: None,
            opt_tuple_limit: OPT_TUPLE_LIMIT,
            scenarios: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub synth: SynthSpec,
    /// Absolute target; the clean-data effect when unset.
    pub target: Option<f64>,
    pub epsilon: f64,
    /// Added to `epsilon`, as a multiple of `|target|`.
    pub epsilon_relative: f64,
    pub noise: Option<NoiseKind>,
    pub levels: Vec<f64>,
    pub sizes: Vec<usize>,
    pub confounder_counts: Vec<usize>,
    /// Targets placed at `ate · (1 - d)` for each `d`, overriding `target`.
    pub target_distances: Vec<f64>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            synth: SynthSpec::default(),
            target: None,
            epsilon: 0.0,
            epsilon_relative: 1e-6,
            noise: None,
            levels: Vec::new(),
            sizes: Vec::new(),
            confounder_counts: Vec::new(),
            target_distances: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cell {
    n: usize,
    confounders: usize,
    level: Option<f64>,
    distance: Option<f64>,
}

impl Scenario {
    fn cells(&self) -> Vec<Cell> {
        let or_base = |v: &[usize], base: usize| if v.is_empty() { vec![base] } else { v.to_vec() };
        let maybe = |v: &[f64]| -> Vec<Option<f64>> {
            if v.is_empty() {
                vec![None]
            } else {
                v.iter().copied().map(Some).collect()
            }
        };
        let mut out = Vec::new();
        for n in or_base(&self.sizes, self.synth.n) {
            for confounders in or_base(&self.confounder_counts, self.synth.confounders) {
                for level in maybe(&self.levels) {
                    for distance in maybe(&self.target_distances) {
                        out.push(Cell {
                            n,
                            confounders,
                            level,
                            distance,
                        });
                    }
                }
            }
        }
        out
    }
}

pub const HEADER: [&str; 15] = [
    "scenario",
    "n",
    "confounders",
    "noise",
    "level",
    "target",
    "seed",
    "method",
    "removals",
    "ate_before",
    "ate_after",
    "hit",
    "stop",
    "wall_time",
    "error",
];

pub fn load(path: &Path) -> Result<BenchConfig> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn run_method(
    cfg: &BenchConfig,
    method: Mode,
    data: &ate_repair::Dataset,
    query: &ate_repair::CausalQuery,
    seed: u64,
) -> Result<RepairResult> {
    let tuple = TupleConfig {
        estimator: EstimatorConfig {
            seed,
            ..cfg.tuple.estimator
        },
        record_trace: false,
        ..cfg.tuple
    };
    let pattern = PatternConfig {
        estimator: EstimatorConfig {
            seed,
            ..cfg.pattern.estimator
        },
        record_trace: false,
        ..cfg.pattern
    };
    match method {
        Mode::Tuple => repair_tuples(data, query, &tuple),
        Mode::TupleSingleUpdate => repair_tuples_single_update(data, query, &tuple),
        Mode::Pattern => repair_pattern(data, query, &pattern),
        Mode::OptTuple => {
            let budget = cfg.opt_budget.unwrap_or(data.alive_count());
            opt_tuple_with_limit(data, query, &tuple.estimator.refit_only(), budget, cfg.opt_tuple_limit)
        }
        Mode::OptPattern => opt_pattern_with_limit(
            data,
            query,
            &pattern.estimator.refit_only(),
            pattern.allow_treatment,
            OPT_PATTERN_LIMIT,
        ),
    }
}

/// Runs the whole grid, writing rows as they complete. Returns the number of
/// rows written.
pub fn run<W: Write>(cfg: &BenchConfig, out: W) -> Result<usize> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    let mut rows = 0;
    for scenario in &cfg.scenarios {
        for cell in scenario.cells() {
            for &seed in &cfg.seeds {
                let spec = SynthSpec {
                    n: cell.n,
                    confounders: cell.confounders,
                    ..scenario.synth.clone()
                };
                let prepared = prepare(scenario, &spec, cell, seed);
                for &method in &cfg.methods {
                    let noise = scenario.noise.map(|k| format!("{k:?}").to_lowercase()).unwrap_or_default();
                    let level = cell.level.map(|l| l.to_string()).unwrap_or_default();
                    let mut record = vec![
                        scenario.name.clone(),
                        cell.n.to_string(),
                        cell.confounders.to_string(),
                        noise,
                        level,
                    ];
                    match &prepared {
                        Err(e) => {
                            record.extend(["".into(), seed.to_string(), method.name().into()]);
                            record.extend(std::iter::repeat_n(String::new(), 6));
                            record.push(e.code().into());
                        }
                        Ok((data, query)) => {
                            record.extend([query.target.to_string(), seed.to_string(), method.name().into()]);
                            let start = Instant::now();
                            match run_method(cfg, method, data, query, seed) {
                                Ok(r) => record.extend([
                                    r.removed_count.to_string(),
                                    r.ate_before.to_string(),
                                    r.ate_after.to_string(),
                                    r.hit_range.to_string(),
                                    r.stop_reason.map(|s| s.code()).unwrap_or_default().into(),
                                    r.wall_time.to_string(),
                                    String::new(),
                                ]),
                                Err(e) => {
                                    record.extend(std::iter::repeat_n(String::new(), 5));
                                    record.push(start.elapsed().as_secs_f64().to_string());
                                    record.push(e.code().into());
                                }
                            }
                        }
                    }
                    w.write_record(&record)?;
                    w.flush()?;
                    rows += 1;
                }
            }
        }
    }
    Ok(rows)
}

fn prepare(
    scenario: &Scenario,
    spec: &SynthSpec,
    cell: Cell,
    seed: u64,
) -> Result<(ate_repair::Dataset, ate_repair::CausalQuery)> {
    let (mut data, truth) = generate(spec, seed)?;
    let mut query = truth.query.clone();
    if let (Some(kind), Some(level)) = (scenario.noise, cell.level) {
        data = inject_noise(&data, &query, kind, level, seed)?.0;
    }
    let target = match cell.distance {
        Some(d) => {
            let ate = ate_repair::estimator::refit_ate(&data, &query, &EstimatorConfig::default(), &[])?;
            ate * (1.0 - d)
        }
        None => scenario.target.unwrap_or(truth.clean_ate),
    };
    query = query.with_target(target, scenario.epsilon + scenario.epsilon_relative * target.abs());
    Ok((data, query))
}
