use serde::{Deserialize, Serialize};

use super::Outcome;
use crate::error::{Error, Result};
use crate::par::Execution;

/// Pair counts behind Harrell's C. A pair `(i, j)` is comparable when
/// `T_i < T_j` and subject `i` had the event.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConcordanceCounts {
    pub comparable: u64,
    pub concordant: u64,
    pub tied: u64,
}

impl ConcordanceCounts {
    pub fn index(&self) -> Result<f64> {
        if self.comparable == 0 {
            return Err(Error::NoComparablePairs);
        }
        Ok((self.concordant as f64 + 0.5 * self.tied as f64) / self.comparable as f64)
    }

    fn add(self, o: ConcordanceCounts) -> ConcordanceCounts {
        ConcordanceCounts {
            comparable: self.comparable + o.comparable,
            concordant: self.concordant + o.concordant,
            tied: self.tied + o.tied,
        }
    }
}

pub fn concordance_counts(risk: &[f64], outcomes: &[Outcome], exec: Execution) -> Result<ConcordanceCounts> {
    if risk.len() != outcomes.len() {
        return Err(Error::LengthMismatch {
            expected: outcomes.len(),
            found: risk.len(),
        });
    }
    if let Some(i) = risk.iter().position(|r| !r.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let rows = exec.map_range(risk.len(), |i| {
        let mut c = ConcordanceCounts::default();
        if !outcomes[i].event {
            return c;
        }
        for j in 0..risk.len() {
            if outcomes[i].time < outcomes[j].time {
                c.comparable += 1;
                if risk[i] > risk[j] {
                    c.concordant += 1;
                } else if risk[i] == risk[j] {
                    c.tied += 1;
                }
            }
        }
        c
    });
    Ok(rows.into_iter().fold(ConcordanceCounts::default(), ConcordanceCounts::add))
}

/// Harrell's concordance index of risk scores against observed outcomes.
pub fn concordance_index(risk: &[f64], outcomes: &[Outcome]) -> Result<f64> {
    concordance_index_with(risk, outcomes, Execution::default())
}

pub fn concordance_index_with(risk: &[f64], outcomes: &[Outcome], exec: Execution) -> Result<f64> {
    concordance_counts(risk, outcomes, exec)?.index()
}
