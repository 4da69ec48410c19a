use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::survival::Outcome;

/// Endless stream of batches holding `batch_size / 2` uncensored and
/// `batch_size / 2` censored subjects, each drawn uniformly with replacement
/// from its stratum. Event indices come first within a batch.
#[derive(Debug, Clone)]
pub struct BalancedBatches {
    events: Vec<usize>,
    censored: Vec<usize>,
    half: usize,
    rng: ChaCha8Rng,
}

pub fn balanced_batches(outcomes: &[Outcome], batch_size: usize, seed: u64) -> Result<BalancedBatches> {
    if batch_size < 2 || !batch_size.is_multiple_of(2) {
        return Err(Error::invalid(format!("batch size must be even and at least 2, got {batch_size}")));
    }
    let events: Vec<usize> = (0..outcomes.len()).filter(|&i| outcomes[i].event).collect();
    let censored: Vec<usize> = (0..outcomes.len()).filter(|&i| !outcomes[i].event).collect();
    if events.is_empty() {
        return Err(Error::EmptyStratum("uncensored"));
    }
    if censored.is_empty() {
        return Err(Error::EmptyStratum("censored"));
    }
    Ok(BalancedBatches {
        events,
        censored,
        half: batch_size / 2,
        rng: ChaCha8Rng::seed_from_u64(seed),
    })
}

impl Iterator for BalancedBatches {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let mut batch = Vec::with_capacity(2 * self.half);
        for _ in 0..self.half {
            batch.push(self.events[self.rng.random_range(0..self.events.len())]);
        }
        for _ in 0..self.half {
            batch.push(self.censored[self.rng.random_range(0..self.censored.len())]);
        }
        Some(batch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cohort(n: usize, censored_pct: usize) -> Vec<Outcome> {
        (0..n)
            .map(|i| Outcome::new(1.0 + i as f64, (i * 100 / n) >= censored_pct).unwrap())
            .collect()
    }

    #[test]
    fn batches_are_half_events() {
        let o = cohort(100, 79);
        for batch in balanced_batches(&o, 8, 3).unwrap().take(200) {
            assert_eq!(batch.len(), 8);
            assert_eq!(batch.iter().filter(|&&i| o[i].event).count(), 4);
        }
    }

    #[test]
    fn seeded_stream_repeats() {
        let o = cohort(50, 50);
        let a: Vec<_> = balanced_batches(&o, 6, 11).unwrap().take(20).collect();
        let b: Vec<_> = balanced_batches(&o, 6, 11).unwrap().take(20).collect();
        let c: Vec<_> = balanced_batches(&o, 6, 12).unwrap().take(20).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn errors() {
        let o = cohort(10, 50);
        assert!(balanced_batches(&o, 7, 0).is_err());
        assert!(balanced_batches(&o, 0, 0).is_err());
        let all_events = cohort(10, 0);
        assert!(matches!(balanced_batches(&all_events, 4, 0), Err(Error::EmptyStratum("censored"))));
        let none = cohort(10, 100);
        assert!(matches!(balanced_batches(&none, 4, 0), Err(Error::EmptyStratum("uncensored"))));
    }
}
