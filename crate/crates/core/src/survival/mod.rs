//! Cox partial likelihood, CoxPH fitting, LASSO-Cox selection and Harrell's C.
//!
//! Risk sets include ties: subject `j` is at risk for event `i` when
//! `T_j >= T_i`. Tied event times use the Breslow approximation.

mod concordance;
mod cox;
mod lasso;
mod loss;

pub use concordance::{concordance_counts, concordance_index, concordance_index_with, ConcordanceCounts};
pub use cox::{fit_coxph, predict_risk, CoxModel, FitDiagnostics, NEWTON_MAX_ITER, NEWTON_TOL};
pub use lasso::{
    lambda_grid, lambda_max, lasso_cox_path, select_features, LassoPath, PathPoint, Selection, DEFAULT_TARGET_K,
    LASSO_TOL,
};
pub use loss::{cox_npll, cox_npll_gradient, risk_set};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Time-to-event in days and whether the event (recurrence) was observed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub time: f64,
    pub event: bool,
}

impl Outcome {
    pub fn new(time: f64, event: bool) -> Result<Self> {
        if !(time.is_finite() && time > 0.0) {
            return Err(Error::invalid(format!("survival time must be positive, got {time}")));
        }
        Ok(Outcome { time, event })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub subject_id: String,
    pub time_days: f64,
    pub event: bool,
}

impl SurvivalRecord {
    pub fn outcome(&self) -> Outcome {
        Outcome {
            time: self.time_days,
            event: self.event,
        }
    }
}

pub fn outcomes(records: &[SurvivalRecord]) -> Vec<Outcome> {
    records.iter().map(SurvivalRecord::outcome).collect()
}

pub(crate) fn event_count(outcomes: &[Outcome]) -> usize {
    outcomes.iter().filter(|o| o.event).count()
}

pub(crate) fn check_aligned(h_len: usize, outcomes: &[Outcome]) -> Result<()> {
    if h_len != outcomes.len() {
        return Err(Error::LengthMismatch {
            expected: outcomes.len(),
            found: h_len,
        });
    }
    if event_count(outcomes) == 0 {
        return Err(Error::NoEvents);
    }
    Ok(())
}
