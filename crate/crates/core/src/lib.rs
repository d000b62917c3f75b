//! Find small deletions that move an average treatment effect into a target
//! interval.
//!
//! Given a table, a causal query (treatment, outcome, confounders) and a
//! target interval for the effect, [`tuple::repair_tuples`] deletes
//! individual tuples greedily by influence, while [`pattern::repair_pattern`]
//! searches for a single conjunctive pattern whose matching subpopulation can
//! be dropped. Both reuse fitted models through rank-`r` downdates instead of
//! refitting at every probe.
//!
//! ```
//! use ate_repair::oracle::fixtures::subset_sum;
//! use ate_repair::ols::fit_ols;
//!
//! let (data, query) = subset_sum();
//! let state = fit_ols(&data, &query).unwrap();
//! assert!((state.ate() - 1.25).abs() < 1e-12);
//! ```

pub mod data;
pub mod design;
pub mod error;
pub mod estimator;
pub mod ipw;
pub(crate) mod linalg;
pub mod ols;
pub mod oracle;
pub mod pattern;
pub mod result;
pub mod tuple;

pub use data::{CausalQuery, Dataset, Pattern, Schema};
pub use error::{Error, Result};
pub use estimator::{EstimatorConfig, EstimatorKind, Fitted, UpdateMode};
pub use pattern::{repair_pattern, PatternConfig, PatternProbe};
pub use result::{RepairMode, RepairResult, StopReason, TraceRecord};
pub use tuple::{repair_tuples, repair_tuples_single_update, TupleConfig};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/estimators.md")]
    mod estimators {}
    #[doc = include_str!("../../../book/src/tuple_repair.md")]
    mod tuple_repair {}
    #[doc = include_str!("../../../book/src/pattern_repair.md")]
    mod pattern_repair {}
    #[doc = include_str!("../../../book/src/oracles.md")]
    mod oracles {}
}
