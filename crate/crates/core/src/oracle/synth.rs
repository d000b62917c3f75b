use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{AttrKind, Attribute, CausalQuery, Column, Dataset, Pattern, Schema};
use crate::error::{Error, Result};
use crate::estimator::{self, EstimatorConfig};

/// Noisy rows mixed into a synthetic table.
///
/// Planted rows are treated and have their outcome raised by
/// `shift · u` with `u ~ U(0, 2)`. When `pattern` is non-empty, planted
/// rows carry those `(categorical index, level index)` values and no clean
/// row matches all of them, so the pattern selects exactly the planted rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantSpec {
    pub fraction: f64,
    pub shift: f64,
    pub pattern: Vec<(usize, usize)>,
}

impl Default for PlantSpec {
    fn default() -> Self {
        Self {
            fraction: 0.0,
            shift: 3.0,
            pattern: Vec::new(),
        }
    }
}

/// A linear-Gaussian causal model.
///
/// `Z_j ~ N(0, 1)`; `T ~ Bernoulli(σ(treatment_intercept + treatment_coef · ΣZ))`;
/// `O = effect · T + outcome_coef · ΣZ + noise_scale · N(0, 1)`. Categorical
/// columns `C1, C2, …` (domain sizes in `categoricals`, levels `v0, v1, …`)
/// are drawn uniformly and play no causal role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n: usize,
    pub confounders: usize,
    pub treatment_intercept: f64,
    pub treatment_coef: f64,
    pub effect: f64,
    pub outcome_coef: f64,
    pub noise_scale: f64,
    pub categoricals: Vec<usize>,
    pub planted: PlantSpec,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n: 10_000,
            confounders: 3,
            treatment_intercept: 0.0,
            treatment_coef: 1.0,
            effect: 1.0,
            outcome_coef: 1.0,
            noise_scale: 1.0,
            categoricals: Vec::new(),
            planted: PlantSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// OLS effect on the clean rows alone.
    pub clean_ate: f64,
    /// OLS effect on the whole generated table.
    pub ate: f64,
    pub planted_ids: Vec<usize>,
    pub planted_pattern: Option<Pattern>,
    /// Effect of `T` on `O` given all `Z`, targeting `clean_ate` exactly.
    pub query: CausalQuery,
}

impl SynthSpec {
    pub fn planted_count(&self) -> usize {
        ((self.n as f64) * self.planted.fraction).round() as usize
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.planted.fraction) {
            return Err(Error::Config("planted.fraction must lie in [0, 1)".into()));
        }
        for &(c, level) in &self.planted.pattern {
            match self.categoricals.get(c) {
                Some(&size) if level < size => {}
                _ => {
                    return Err(Error::Config(format!(
                        "planted pattern refers to level {level} of categorical {c}, which does not exist"
                    )))
                }
            }
        }
        if self.planted.pattern.iter().any(|&(c, _)| self.categoricals[c] < 2) {
            return Err(Error::Config("a planted categorical needs at least two levels".into()));
        }
        Ok(())
    }

    pub fn query(&self, target: f64, epsilon: f64) -> CausalQuery {
        CausalQuery::new(
            "T",
            "O",
            (1..=self.confounders).map(|j| format!("Z{j}")),
            target,
            epsilon,
        )
    }
}

struct Row {
    z: Vec<f64>,
    c: Vec<usize>,
    t: f64,
    o: f64,
    planted: bool,
}

fn draw_row(spec: &SynthSpec, rng: &mut ChaCha8Rng, planted: bool) -> Row {
    let z: Vec<f64> = (0..spec.confounders).map(|_| StandardNormal.sample(rng)).collect();
    let zsum: f64 = z.iter().sum();
    let logit = spec.treatment_intercept + spec.treatment_coef * zsum;
    let p = 1.0 / (1.0 + (-logit).exp());
    let t = if planted || rng.random::<f64>() < p { 1.0 } else { 0.0 };
    let eps: f64 = StandardNormal.sample(rng);
    let mut o = spec.effect * t + spec.outcome_coef * zsum + spec.noise_scale * eps;
    let mut c: Vec<usize> = spec.categoricals.iter().map(|&k| rng.random_range(0..k)).collect();
    let marks = &spec.planted.pattern;
    if planted {
        o += spec.planted.shift * rng.random_range(0.0..2.0);
        for &(col, level) in marks {
            c[col] = level;
        }
    } else if !marks.is_empty() {
        while marks.iter().all(|&(col, level)| c[col] == level) {
            let (col, _) = marks[rng.random_range(0..marks.len())];
            c[col] = rng.random_range(0..spec.categoricals[col]);
        }
    }
    Row { z, c, t, o, planted }
}

/// Draws a table from `spec`. Planted rows are shuffled in with the clean
/// ones; the same seed always yields the same table.
pub fn generate(spec: &SynthSpec, seed: u64) -> Result<(Dataset, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let planted = spec.planted_count();
    let mut rows: Vec<Row> = (0..spec.n)
        .map(|i| draw_row(spec, &mut rng, i >= spec.n - planted))
        .collect();
    rows.shuffle(&mut rng);

    let mut attributes = vec![
        Attribute {
            name: "T".into(),
            kind: AttrKind::NumericBinary,
        },
        Attribute {
            name: "O".into(),
            kind: AttrKind::NumericContinuous,
        },
    ];
    let mut columns = vec![
        Column::Numeric(rows.iter().map(|r| r.t).collect()),
        Column::Numeric(rows.iter().map(|r| r.o).collect()),
    ];
    for j in 0..spec.confounders {
        attributes.push(Attribute {
            name: format!("Z{}", j + 1),
            kind: AttrKind::NumericContinuous,
        });
        columns.push(Column::Numeric(rows.iter().map(|r| r.z[j]).collect()));
    }
    for (j, &size) in spec.categoricals.iter().enumerate() {
        attributes.push(Attribute {
            name: format!("C{}", j + 1),
            kind: AttrKind::Categorical,
        });
        columns.push(Column::Categorical {
            codes: rows.iter().map(|r| r.c[j] as u32).collect(),
            levels: (0..size).map(|l| format!("v{l}")).collect(),
        });
    }
    let data = Dataset::from_columns(Schema::new(attributes)?, columns)?;

    let planted_ids: Vec<usize> = rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.planted.then_some(i))
        .collect();
    let est = EstimatorConfig::default().refit_only();
    let probe = spec.query(0.0, 0.0);
    let clean_ate = estimator::refit_ate(&data, &probe, &est, &planted_ids)?;
    let ate = estimator::refit_ate(&data, &probe, &est, &[])?;
    let planted_pattern = if spec.planted.pattern.is_empty() {
        None
    } else {
        Some(Pattern::new(
            spec.planted
                .pattern
                .iter()
                .map(|&(c, level)| (format!("C{}", c + 1), format!("v{level}"))),
        )?)
    };
    Ok((
        data,
        GroundTruth {
            clean_ate,
            ate,
            planted_ids,
            planted_pattern,
            query: spec.query(clean_ate, 0.0),
        },
    ))
}
