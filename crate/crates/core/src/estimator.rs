//! One interface over both estimators, used by the search modes.
//!
//! A [`Fitted`] model answers two questions: "what is the effect if these
//! alive tuples were gone?" ([`Fitted::probe`], no side effects) and "commit
//! this removal" ([`Fitted::commit`], which also flips the dataset mask).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{CausalQuery, Dataset, DeletionReceipt};
use crate::error::{Error, Result};
use crate::ipw::{self, IpwConfig, IpwState};
use crate::ols::{self, OlsState};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    #[default]
    Ols,
    Ipw,
}

/// How removals are folded into a fitted model. For the IPW estimator both
/// incremental modes use the Fisher update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateMode {
    #[default]
    Exact,
    Neumann,
    Refit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    pub estimator: EstimatorKind,
    pub update: UpdateMode,
    pub ipw: IpwConfig,
    /// Blocks larger than this fraction of the fitted rows are refit rather
    /// than downdated.
    pub block_refit_fraction: f64,
    /// Seed of the unlearning noise when `ipw.sigma > 0`.
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            estimator: EstimatorKind::Ols,
            update: UpdateMode::Exact,
            ipw: IpwConfig::default(),
            block_refit_fraction: 0.05,
            seed: 0,
        }
    }
}

impl EstimatorConfig {
    pub fn refit_only(self) -> Self {
        Self {
            update: UpdateMode::Refit,
            ..self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "estimator", rename_all = "lowercase")]
pub enum Fitted {
    Ols(OlsState),
    Ipw(IpwState),
}

/// From-scratch fit on the alive tuples.
pub fn fit(dataset: &Dataset, query: &CausalQuery, cfg: &EstimatorConfig) -> Result<Fitted> {
    let rows: Vec<usize> = dataset.alive_ids().collect();
    fit_rows(dataset, query, cfg, &rows)
}

pub fn fit_rows(
    dataset: &Dataset,
    query: &CausalQuery,
    cfg: &EstimatorConfig,
    rows: &[usize],
) -> Result<Fitted> {
    Ok(match cfg.estimator {
        EstimatorKind::Ols => Fitted::Ols(ols::fit_ols_rows(dataset, query, rows)?),
        EstimatorKind::Ipw => Fitted::Ipw(ipw::fit_logistic_rows(dataset, query, &cfg.ipw, rows)?),
    })
}

/// Effect of a from-scratch fit on the alive tuples minus `excluded`.
pub fn refit_ate(
    dataset: &Dataset,
    query: &CausalQuery,
    cfg: &EstimatorConfig,
    excluded: &[usize],
) -> Result<f64> {
    let rows = dataset.alive_excluding(excluded);
    match fit_rows(dataset, query, cfg, &rows)? {
        Fitted::Ols(s) => Ok(s.ate()),
        Fitted::Ipw(s) => s.ate_on_rows(dataset, &rows),
    }
}

impl Fitted {
    /// Effect on the alive tuples the model was fitted for.
    pub fn ate(&self, dataset: &Dataset) -> Result<f64> {
        match self {
            Fitted::Ols(s) => Ok(s.ate()),
            Fitted::Ipw(s) => {
                let rows: Vec<usize> = dataset.alive_ids().collect();
                s.ate_on_rows(dataset, &rows)
            }
        }
    }

    fn ols_after(
        state: &OlsState,
        dataset: &Dataset,
        query: &CausalQuery,
        cfg: &EstimatorConfig,
        removed: &[usize],
    ) -> Result<OlsState> {
        let refit = || ols::fit_ols_rows(dataset, query, &dataset.alive_excluding(removed));
        if cfg.update == UpdateMode::Refit
            || removed.len() as f64 > cfg.block_refit_fraction * state.rows() as f64 && removed.len() > 1
        {
            return refit();
        }
        let (x, o) = state.encode_removal(dataset, removed);
        let exact = |s: &OlsState| match s.downdate_exact(&x, &o) {
            Err(Error::SingularCapacitance | Error::RankLost) => refit(),
            other => other,
        };
        match cfg.update {
            UpdateMode::Neumann => match state.downdate_neumann(&x, &o) {
                Ok(next) if next.needs_refit() => refit(),
                Ok(next) => Ok(next),
                Err(Error::NormTooLarge(_)) => exact(state),
                Err(e) => Err(e),
            },
            _ => exact(state),
        }
    }

    /// Effect after pretending `removed` (alive ids) are deleted.
    pub fn probe(
        &self,
        dataset: &Dataset,
        query: &CausalQuery,
        cfg: &EstimatorConfig,
        removed: &[usize],
    ) -> Result<f64> {
        if removed.is_empty() {
            return self.ate(dataset);
        }
        match self {
            Fitted::Ols(s) => Ok(Self::ols_after(s, dataset, query, cfg, removed)?.ate()),
            Fitted::Ipw(s) => {
                if cfg.update == UpdateMode::Refit {
                    return refit_ate(dataset, query, cfg, removed);
                }
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ removed[0] as u64);
                let theta = match s.unlearn_theta(dataset, removed, cfg.ipw.batch_size, cfg.ipw.sigma, &mut rng) {
                    Err(Error::SingularFisher) => return refit_ate(dataset, query, cfg, removed),
                    other => other?,
                };
                s.ate_with_theta(dataset, &dataset.alive_excluding(removed), &theta)
            }
        }
    }

    /// The model for the alive tuples minus `removed`, without touching the
    /// dataset.
    pub fn without(
        &self,
        dataset: &Dataset,
        query: &CausalQuery,
        cfg: &EstimatorConfig,
        removed: &[usize],
    ) -> Result<Fitted> {
        if removed.is_empty() {
            return Ok(self.clone());
        }
        match self {
            Fitted::Ols(s) => Ok(Fitted::Ols(Self::ols_after(s, dataset, query, cfg, removed)?)),
            Fitted::Ipw(s) => {
                let rows = dataset.alive_excluding(removed);
                if cfg.update == UpdateMode::Refit {
                    return Ok(Fitted::Ipw(ipw::fit_logistic_rows(dataset, query, &cfg.ipw, &rows)?));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ removed[0] as u64);
                match ipw::fisher_unlearn(s, dataset, removed, cfg.ipw.batch_size, cfg.ipw.sigma, &mut rng) {
                    Err(Error::SingularFisher) => {
                        Ok(Fitted::Ipw(ipw::fit_logistic_rows(dataset, query, &cfg.ipw, &rows)?))
                    }
                    other => Ok(Fitted::Ipw(other?)),
                }
            }
        }
    }

    /// Folds the removal into the model and deletes the tuples from the
    /// dataset. On error neither is changed.
    pub fn commit(
        &mut self,
        dataset: &mut Dataset,
        query: &CausalQuery,
        cfg: &EstimatorConfig,
        removed: &[usize],
    ) -> Result<DeletionReceipt> {
        let next = self.without(dataset, query, cfg, removed)?;
        let receipt = dataset.delete(removed)?;
        *self = next;
        if let Fitted::Ipw(s) = self {
            s.refresh_curvature(dataset);
        }
        Ok(receipt)
    }
}
