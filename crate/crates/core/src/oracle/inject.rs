use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{CausalQuery, Column, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Appends copies of randomly drawn rows.
    Duplicates,
    /// Zeroes the confounder cells of randomly drawn rows.
    MissingZero,
    /// Moves the outcome of randomly drawn rows to `mean ± 10·std`.
    Outliers,
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "duplicates" => Ok(NoiseKind::Duplicates),
            "missing_zero" | "missing-zero" => Ok(NoiseKind::MissingZero),
            "outliers" => Ok(NoiseKind::Outliers),
            other => Err(Error::Config(format!("unknown noise kind `{other}`"))),
        }
    }
}

/// Which rows an injection touched, in the output table's numbering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionLog {
    pub kind: NoiseKind,
    pub level: f64,
    pub seed: u64,
    pub affected: Vec<usize>,
    /// For duplicates, the row each appended copy came from.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sources: Vec<usize>,
}

/// Corrupts `⌈level · n⌉` rows of `dataset` (alive rows only; the output is
/// compacted to them, all alive). `level` must lie in `[0, 1)`.
///
/// For a fixed seed the corrupted rows of a lower level are a prefix of those
/// of a higher one, so a level sweep adds noise on top of noise.
pub fn inject_noise(
    dataset: &Dataset,
    query: &CausalQuery,
    kind: NoiseKind,
    level: f64,
    seed: u64,
) -> Result<(Dataset, InjectionLog)> {
    if !(0.0..1.0).contains(&level) {
        return Err(Error::Config(format!("noise level {level} is outside [0, 1)")));
    }
    query.validate(dataset)?;
    let alive: Vec<usize> = dataset.alive_ids().collect();
    let base = dataset.restrict(&alive);
    let n = base.n();
    let count = (level * n as f64).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log = InjectionLog {
        kind,
        level,
        seed,
        affected: Vec::new(),
        sources: Vec::new(),
    };
    if count == 0 || n == 0 {
        return Ok((base, log));
    }
    let out = match kind {
        NoiseKind::Duplicates => {
            let sources: Vec<usize> = (0..count).map(|_| rng.random_range(0..n)).collect();
            let mut order: Vec<usize> = (0..n).collect();
            order.extend_from_slice(&sources);
            log.affected = (n..n + count).collect();
            log.sources = sources;
            base.restrict(&order)
        }
        NoiseKind::MissingZero | NoiseKind::Outliers => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let signs: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
            let mut picks: Vec<(usize, bool)> = order.into_iter().zip(signs).take(count).collect();
            picks.sort_unstable();
            let rows: Vec<usize> = picks.iter().map(|&(r, _)| r).collect();
            let mut columns = base.columns().to_vec();
            if kind == NoiseKind::MissingZero {
                for z in &query.confounders {
                    let col = base.schema().require(z)?;
                    zero_cells(&mut columns[col], &rows);
                }
            } else {
                let col = base.schema().require(&query.outcome)?;
                let Column::Numeric(values) = &mut columns[col] else {
                    return Err(Error::InvalidQuery("outcome must be numeric".into()));
                };
                let mean = values.iter().sum::<f64>() / n as f64;
                let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
                for &(r, up) in &picks {
                    let sign = if up { 1.0 } else { -1.0 };
                    values[r] = mean + sign * 10.0 * std;
                }
            }
            log.affected = rows;
            Dataset::from_columns(base.schema().clone(), columns)?
        }
    };
    Ok((out, log))
}

fn zero_cells(column: &mut Column, rows: &[usize]) {
    match column {
        Column::Numeric(values) => {
            for &r in rows {
                values[r] = 0.0;
            }
        }
        Column::Categorical { codes, levels } => {
            let code = match levels.iter().position(|l| l == "0") {
                Some(p) => p as u32,
                None => {
                    levels.push("0".into());
                    (levels.len() - 1) as u32
                }
            };
            for &r in rows {
                codes[r] = code;
            }
        }
    }
}
