use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::survival::Outcome;

/// K disjoint folds covering the cohort, each holding at least one event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    /// Subject ids per fold, in cohort order.
    pub folds: Vec<Vec<String>>,
}

impl SplitPlan {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// Ids outside `fold`, in cohort order.
    pub fn train_ids(&self, fold: usize, cohort: &[String]) -> Vec<String> {
        let held: std::collections::HashSet<&String> = self.folds[fold].iter().collect();
        cohort.iter().filter(|id| !held.contains(id)).cloned().collect()
    }
}

/// Event-stratified K-fold split: event and censored subjects are shuffled
/// separately, then dealt round-robin (events first, censored continuing the
/// rotation) so fold sizes differ by at most one overall and within each stratum.
pub fn kfold_split(ids: &[String], outcomes: &[Outcome], k: usize, seed: u64) -> Result<SplitPlan> {
    if ids.len() != outcomes.len() {
        return Err(Error::LengthMismatch {
            expected: ids.len(),
            found: outcomes.len(),
        });
    }
    if k < 2 || k > ids.len() {
        return Err(Error::invalid(format!("cannot make {k} folds from {} subjects", ids.len())));
    }
    let mut events: Vec<usize> = (0..ids.len()).filter(|&i| outcomes[i].event).collect();
    let mut censored: Vec<usize> = (0..ids.len()).filter(|&i| !outcomes[i].event).collect();
    if events.len() < k {
        return Err(Error::TooFewEvents {
            events: events.len(),
            folds: k,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    events.shuffle(&mut rng);
    censored.shuffle(&mut rng);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (pos, &i) in events.iter().chain(&censored).enumerate() {
        members[pos % k].push(i);
    }
    let folds = members
        .into_iter()
        .map(|mut m| {
            m.sort_unstable();
            m.into_iter().map(|i| ids[i].clone()).collect()
        })
        .collect();
    Ok(SplitPlan { seed, folds })
}
