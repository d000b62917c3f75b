use std::path::{Path, PathBuf};

use ate_repair::estimator::{EstimatorConfig, EstimatorKind, UpdateMode};
use ate_repair::ipw::IpwConfig;
use ate_repair::oracle::{OPT_PATTERN_LIMIT, OPT_TUPLE_LIMIT};
use ate_repair::{CausalQuery, Error, PatternConfig, Result, TupleConfig};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Tuple,
    TupleSingleUpdate,
    Pattern,
    OptTuple,
    OptPattern,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Tuple => "tuple",
            Mode::TupleSingleUpdate => "tuple-single-update",
            Mode::Pattern => "pattern",
            Mode::OptTuple => "opt-tuple",
            Mode::OptPattern => "opt-pattern",
        }
    }

    pub fn is_opt(self) -> bool {
        matches!(self, Mode::OptTuple | Mode::OptPattern)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuerySection {
    pub treatment: Option<String>,
    pub outcome: Option<String>,
    pub confounders: Option<Vec<String>>,
    pub target: Option<f64>,
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptSection {
    /// Largest deletion `opt-tuple` tries; all alive tuples when unset.
    pub budget: Option<usize>,
    /// Overrides the tuple-count guard of `opt-tuple`.
    pub tuple_limit: Option<usize>,
    /// Overrides the pattern-space guard of `opt-pattern`.
    pub pattern_limit: Option<u128>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub result: Option<PathBuf>,
    pub removed: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub state: Option<PathBuf>,
}

/// Everything a `repair` run needs. Read from TOML, then patched with
/// command-line flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub mode: Mode,
    pub estimator: Option<EstimatorKind>,
    pub update: Option<UpdateMode>,
    pub seed: Option<u64>,
    pub ipw: Option<IpwConfig>,
    pub query: QuerySection,
    pub tuple: TupleConfig,
    pub pattern: PatternConfig,
    pub opt: OptSection,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn data_path(&self) -> Result<&Path> {
        self.data
            .as_deref()
            .ok_or_else(|| Error::Config("no data file given (--data or `data = ...`)".into()))
    }

    pub fn query(&self) -> Result<CausalQuery> {
        let q = &self.query;
        let need = |v: &Option<String>, what: &str| {
            v.clone()
                .ok_or_else(|| Error::Config(format!("the query needs a {what} (--{what})")))
        };
        Ok(CausalQuery::new(
            need(&q.treatment, "treatment")?,
            need(&q.outcome, "outcome")?,
            q.confounders.clone().unwrap_or_default(),
            q.target
                .ok_or_else(|| Error::Config("the query needs a target (--target)".into()))?,
            q.epsilon.unwrap_or(0.0),
        ))
    }

    /// Estimator settings with the top-level overrides applied on top of
    /// `base`. Exhaustive modes always refit.
    pub fn estimator_over(&self, base: EstimatorConfig) -> Result<EstimatorConfig> {
        let mut est = base;
        if let Some(kind) = self.estimator {
            est.estimator = kind;
        }
        if let Some(update) = self.update {
            est.update = update;
        }
        if let Some(seed) = self.seed {
            est.seed = seed;
        }
        if let Some(ipw) = self.ipw {
            est.ipw = ipw;
        }
        if self.mode.is_opt() {
            if self.update.is_some_and(|u| u != UpdateMode::Refit) {
                return Err(Error::Config(format!(
                    "mode {} always refits; drop --update or set it to refit",
                    self.mode.name()
                )));
            }
            est = est.refit_only();
        }
        Ok(est)
    }

    pub fn tuple_config(&self) -> Result<TupleConfig> {
        Ok(TupleConfig {
            estimator: self.estimator_over(self.tuple.estimator)?,
            ..self.tuple
        })
    }

    pub fn pattern_config(&self) -> Result<PatternConfig> {
        Ok(PatternConfig {
            estimator: self.estimator_over(self.pattern.estimator)?,
            ..self.pattern
        })
    }

    pub fn tuple_limit(&self) -> usize {
        self.opt.tuple_limit.unwrap_or(OPT_TUPLE_LIMIT)
    }

    pub fn pattern_limit(&self) -> u128 {
        self.opt.pattern_limit.unwrap_or(OPT_PATTERN_LIMIT)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_sections_parse() {
        let cfg: RunConfig = toml::from_str(
            r#"
            data = "d.csv"
            mode = "opt-tuple"
            seed = 3

            [query]
            treatment = "T"
            outcome = "O"
            confounders = ["Z1"]
            target = 0.5

            [tuple]
            refresh_period = 4

            [output]
            trace = "trace.csv"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.mode, Mode::OptTuple);
        assert_eq!(cfg.tuple.refresh_period, 4);
        let tc = cfg.tuple_config().unwrap();
        assert_eq!(tc.estimator.seed, 3);
        assert_eq!(tc.estimator.update, UpdateMode::Refit);
        assert_eq!(cfg.query().unwrap().epsilon, 0.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("modee = \"tuple\"").is_err());
    }

    #[test]
    fn opt_modes_reject_incremental_updates() {
        let cfg = RunConfig {
            mode: Mode::OptPattern,
            update: Some(UpdateMode::Neumann),
            ..RunConfig::default()
        };
        assert!(cfg.pattern_config().is_err());
    }

    fn book_toml_blocks() -> Vec<String> {
        let text = include_str!("../../../book/src/cli.md");
        text.split("```toml\n")
            .skip(1)
            .map(|b| b.split("```").next().unwrap().to_owned())
            .collect()
    }

    #[test]
    fn book_examples_parse() {
        let blocks = book_toml_blocks();
        assert_eq!(blocks.len(), 2);
        let run: RunConfig = toml::from_str(&blocks[0]).unwrap();
        assert_eq!(run.estimator, Some(EstimatorKind::Ipw));
        assert_eq!(run.tuple.max_removals, Some(500));
        let bench: crate::bench::BenchConfig = toml::from_str(&blocks[1]).unwrap();
        assert_eq!(bench.scenarios.len(), 1);
    }
}
