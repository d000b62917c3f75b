use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DeletionReceipt, Pattern};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RepairMode {
    Tuple,
    Pattern,
}

/// One line of a search trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub ate: f64,
    pub action: String,
}

/// Why a search ended without reaching the target interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    NoProgress,
    BudgetExhausted,
    TimeLimit,
    NoSolutionFound,
    Infeasible,
}

impl StopReason {
    pub fn code(self) -> &'static str {
        match self {
            StopReason::NoProgress => "no_progress",
            StopReason::BudgetExhausted => "budget_exhausted",
            StopReason::TimeLimit => "time_limit",
            StopReason::NoSolutionFound => "no_solution_found",
            StopReason::Infeasible => "infeasible",
        }
    }
}

/// Outcome of a repair search.
///
/// `removed_ids` always lists the tuples the repair deletes; in pattern mode
/// they are the pattern's matches at the time of removal. `ate_after` comes
/// from a from-scratch fit, never from an incremental update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairResult {
    pub mode: RepairMode,
    pub removed_ids: Vec<usize>,
    pub pattern: Option<Pattern>,
    pub removed_count: usize,
    pub removed_fraction: f64,
    pub ate_before: f64,
    pub ate_after: f64,
    pub hit_range: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceRecord>>,
    pub wall_time: f64,
    #[serde(skip)]
    pub stop_reason: Option<StopReason>,
}

impl RepairResult {
    /// Deletes the repair's tuples from `dataset`.
    pub fn apply(&self, dataset: &mut Dataset) -> Result<DeletionReceipt> {
        dataset.delete(&self.removed_ids)
    }

    pub fn trace(&self) -> &[TraceRecord] {
        self.trace.as_deref().unwrap_or(&[])
    }

    /// Relative movement `|after - before| / |before|` and whether it went up.
    pub fn shift(&self) -> (f64, bool) {
        let delta = self.ate_after - self.ate_before;
        let rel = if self.ate_before == 0.0 {
            if delta == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            delta.abs() / self.ate_before.abs()
        };
        (rel, delta > 0.0)
    }

    pub fn without_trace(mut self) -> Self {
        self.trace = None;
        self
    }
}
