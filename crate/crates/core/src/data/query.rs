use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::schema::AttrKind;
use crate::error::{Error, Result};

/// Absolute slack added to the target interval so that an exact target such
/// as `0 ± 0` is reachable in floating point.
pub const INTERVAL_SLACK: f64 = 1e-9;

/// A causal question over a dataset: the effect of a binary `treatment` on a
/// numeric `outcome`, adjusted for `confounders`, together with the desired
/// effect interval `[target - epsilon, target + epsilon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalQuery {
    pub treatment: String,
    pub outcome: String,
    #[serde(default)]
    pub confounders: Vec<String>,
    pub target: f64,
    pub epsilon: f64,
}

impl CausalQuery {
    pub fn new(
        treatment: impl Into<String>,
        outcome: impl Into<String>,
        confounders: impl IntoIterator<Item = impl Into<String>>,
        target: f64,
        epsilon: f64,
    ) -> Self {
        Self {
            treatment: treatment.into(),
            outcome: outcome.into(),
            confounders: confounders.into_iter().map(Into::into).collect(),
            target,
            epsilon,
        }
    }

    /// Same question, different target interval.
    pub fn with_target(&self, target: f64, epsilon: f64) -> Self {
        Self {
            target,
            epsilon,
            ..self.clone()
        }
    }

    pub fn lower(&self) -> f64 {
        self.target - self.epsilon
    }

    pub fn upper(&self) -> f64 {
        self.target + self.epsilon
    }

    pub fn contains(&self, ate: f64) -> bool {
        ate.is_finite()
            && (ate - self.target).abs() <= self.epsilon + INTERVAL_SLACK * self.target.abs().max(1.0)
    }

    /// Distance from `ate` to the interval centre.
    pub fn gap(&self, ate: f64) -> f64 {
        (ate - self.target).abs()
    }

    pub fn validate(&self, dataset: &Dataset) -> Result<()> {
        let schema = dataset.schema();
        let t = schema.require(&self.treatment)?;
        let o = schema.require(&self.outcome)?;
        if t == o {
            return Err(Error::InvalidQuery("treatment and outcome coincide".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for z in &self.confounders {
            let zi = schema.require(z)?;
            if zi == t || zi == o {
                return Err(Error::InvalidQuery(format!(
                    "`{z}` cannot be both a confounder and the treatment or outcome"
                )));
            }
            if !seen.insert(zi) {
                return Err(Error::InvalidQuery(format!("confounder `{z}` listed twice")));
            }
        }
        if !(self.epsilon >= 0.0) || !self.target.is_finite() || !self.epsilon.is_finite() {
            return Err(Error::InvalidQuery(
                "target must be finite and epsilon non-negative".into(),
            ));
        }
        if !schema.kind(o).is_numeric() {
            return Err(Error::InvalidQuery(format!(
                "outcome `{}` must be numeric",
                self.outcome
            )));
        }
        let treatment = dataset.column(t).as_numeric().ok_or_else(|| {
            Error::InvalidQuery(format!("treatment `{}` must be binary 0/1", self.treatment))
        })?;
        if schema.kind(t) != AttrKind::NumericBinary {
            if let Some(i) = dataset
                .alive_ids()
                .find(|&i| treatment[i] != 0.0 && treatment[i] != 1.0)
            {
                return Err(Error::InvalidQuery(format!(
                    "treatment `{}` has non-binary value {} at row {i}",
                    self.treatment, treatment[i]
                )));
            }
        }
        Ok(())
    }
}
