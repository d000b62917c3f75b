use rayon::prelude::*;

use crate::data::{CausalQuery, Dataset};
use crate::error::{Error, Result};
use crate::estimator::{self, EstimatorConfig, Fitted};

/// A working copy of the data together with a model fitted to its alive rows.
///
/// Probes ([`InfluenceEngine::influence`]) take `&self` and work on private
/// overlays, so they can run in parallel; only [`InfluenceEngine::remove`]
/// changes anything.
#[derive(Debug, Clone)]
pub struct InfluenceEngine {
    dataset: Dataset,
    query: CausalQuery,
    config: EstimatorConfig,
    model: Fitted,
    ate: f64,
}

impl InfluenceEngine {
    pub fn new(dataset: &Dataset, query: &CausalQuery, config: &EstimatorConfig) -> Result<Self> {
        query.validate(dataset)?;
        let model = estimator::fit(dataset, query, config)?;
        let ate = model.ate(dataset)?;
        Ok(Self {
            dataset: dataset.clone(),
            query: query.clone(),
            config: *config,
            model,
            ate,
        })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn query(&self) -> &CausalQuery {
        &self.query
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    pub fn model(&self) -> &Fitted {
        &self.model
    }

    /// Current effect as tracked by the incremental model.
    pub fn ate(&self) -> f64 {
        self.ate
    }

    /// Effect after removing `ids`, without removing them.
    pub fn probe(&self, ids: &[usize]) -> Result<f64> {
        self.model.probe(&self.dataset, &self.query, &self.config, ids)
    }

    /// `ate(D) - ate(D \ {id})` for an alive tuple.
    pub fn influence(&self, id: usize) -> Result<f64> {
        if id >= self.dataset.n() {
            return Err(Error::OutOfRange(id));
        }
        if !self.dataset.is_alive(id) {
            return Err(Error::AlreadyDeleted(id));
        }
        match self.probe(&[id]) {
            Ok(after) => Ok(self.ate - after),
            Err(e) => Err(Error::InfluenceUnavailable {
                id,
                source: Box::new(e),
            }),
        }
    }

    /// Influences of many tuples, in input order.
    pub fn influences(&self, ids: &[usize]) -> Vec<Result<f64>> {
        ids.par_iter().map(|&id| self.influence(id)).collect()
    }

    pub fn remove(&mut self, ids: &[usize]) -> Result<()> {
        let _receipt = self.model.commit(&mut self.dataset, &self.query, &self.config, ids)?;
        self.ate = self.model.ate(&self.dataset)?;
        Ok(())
    }

    /// Replaces the incremental model with a from-scratch fit.
    pub fn refit(&mut self) -> Result<()> {
        self.model = estimator::fit(&self.dataset, &self.query, &self.config)?;
        self.ate = self.model.ate(&self.dataset)?;
        Ok(())
    }

    /// Effect of a from-scratch fit on the current alive rows.
    pub fn verified_ate(&self) -> Result<f64> {
        estimator::refit_ate(&self.dataset, &self.query, &self.config, &[])
    }
}

/// `ate(D) - ate(D \ {id})` under the engine's current state.
pub fn influence(engine: &InfluenceEngine, id: usize) -> Result<f64> {
    engine.influence(id)
}
