use std::path::Path;

use serde::{Deserialize, Serialize};

use super::net::SurvivalNet;
use super::sampler::balanced_batches;
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::survival::Outcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Half uncensored, half censored subjects per batch.
    #[default]
    Balanced,
    /// Every step uses the whole cohort.
    FullCohort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub iterations: usize,
    /// `(first iteration, learning rate)` pairs; the first starts at 0.
    pub schedule: Vec<(usize, f64)>,
    pub seed: u64,
    pub hidden: Vec<usize>,
    /// Start with a zeroed output layer so every initial score is 0.
    pub zero_output: bool,
    pub sampling: Sampling,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 8,
            iterations: 10_000,
            schedule: vec![(0, 1e-4), (2_500, 5e-5), (5_000, 1e-5)],
            seed: 0,
            hidden: vec![16],
            zero_output: false,
            sampling: Sampling::Balanced,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 || !self.batch_size.is_multiple_of(2) {
            return Err(Error::invalid(format!("batch size must be even and at least 2, got {}", self.batch_size)));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be positive"));
        }
        match self.schedule.first() {
            Some((0, _)) => {}
            _ => return Err(Error::invalid("learning-rate schedule must start at iteration 0")),
        }
        if self.schedule.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::invalid("learning-rate schedule boundaries must increase"));
        }
        if self.schedule.iter().any(|&(at, lr)| at >= self.iterations || !(lr.is_finite() && lr > 0.0)) {
            return Err(Error::invalid("schedule boundaries must precede the last iteration and rates be positive"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::invalid("hidden layer sizes must be positive"));
        }
        Ok(())
    }

    pub fn learning_rate(&self, iteration: usize) -> f64 {
        self.schedule
            .iter()
            .rev()
            .find(|(at, _)| *at <= iteration)
            .map_or(self.schedule[0].1, |s| s.1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedNet {
    pub net: SurvivalNet,
    /// Batch loss at each iteration, measured before that iteration's update.
    pub history: Vec<f64>,
}

/// Gradient descent on the Cox loss over seeded batches.
pub fn train_survival_net(features: &FeatureMatrix, outcomes: &[Outcome], config: &TrainConfig) -> Result<TrainedNet> {
    config.validate()?;
    if features.nrows() != outcomes.len() {
        return Err(Error::LengthMismatch {
            expected: outcomes.len(),
            found: features.nrows(),
        });
    }
    let mut net = SurvivalNet::new(features.ncols(), &config.hidden, config.seed)?;
    if config.zero_output {
        net = net.with_zero_output();
    }
    net.feature_names = features.names().to_vec();
    let rows: Vec<Vec<f64>> = (0..features.nrows()).map(|i| features.row(i)).collect();
    let all: Vec<usize> = (0..rows.len()).collect();
    let mut batches = match config.sampling {
        Sampling::Balanced => Some(balanced_batches(outcomes, config.batch_size, config.seed.wrapping_add(1))?),
        Sampling::FullCohort => None,
    };
    let mut history = Vec::with_capacity(config.iterations);
    for iter in 0..config.iterations {
        let batch = match batches.as_mut() {
            Some(b) => b.next().expect("batch stream is endless"),
            None => all.clone(),
        };
        let x: Vec<&[f64]> = batch.iter().map(|&i| rows[i].as_slice()).collect();
        let o: Vec<Outcome> = batch.iter().map(|&i| outcomes[i]).collect();
        let (loss, grads) = net.loss_and_gradients(&x, &o)?;
        if !loss.is_finite() {
            return Err(Error::Diverged(iter));
        }
        net.step(&grads, config.learning_rate(iter));
        if net.weights.iter().flatten().any(|w| !w.is_finite()) {
            return Err(Error::Diverged(iter));
        }
        history.push(loss);
    }
    Ok(TrainedNet { net, history })
}

/// On-disk form of a trained network with the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetFile {
    #[serde(flatten)]
    pub net: SurvivalNet,
    pub config: TrainConfig,
}

impl NetFile {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<NetFile> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: NetFile = serde_json::from_str(&text)?;
        file.net.validate()?;
        Ok(file)
    }
}

pub fn write_loss_history(path: impl AsRef<Path>, history: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "loss"])?;
    for (i, l) in history.iter().enumerate() {
        w.write_record([i.to_string(), l.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_loss_history(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let loss = rec
            .get(1)
            .and_then(|s| s.parse::<f64>().ok())
            .ok_or_else(|| Error::invalid("malformed loss history row"))?;
        out.push(loss);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::concordance_index;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn linear_cohort(n: usize, seed: u64) -> (FeatureMatrix, Vec<Outcome>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let beta = [1.0, -0.8, 0.6];
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.random_range(-1.7..1.7)).collect()).collect();
        let o = rows
            .iter()
            .map(|r| {
                let eta: f64 = r.iter().zip(beta).map(|(x, b)| x * b).sum();
                let t = -rng.random_range(1e-12..1.0f64).ln() / eta.exp();
                let c = rng.random_range(0.0..2.5);
                Outcome::new(t.min(c).max(1e-9), t <= c).unwrap()
            })
            .collect();
        let ids = (0..n).map(|i| format!("s{i}")).collect();
        let names = vec!["a".into(), "b".into(), "c".into()];
        (FeatureMatrix::from_rows(ids, names, &rows).unwrap(), o)
    }

    #[test]
    fn schedule_lookup() {
        let c = TrainConfig::default();
        assert_eq!(c.learning_rate(0), 1e-4);
        assert_eq!(c.learning_rate(2_499), 1e-4);
        assert_eq!(c.learning_rate(2_500), 5e-5);
        assert_eq!(c.learning_rate(9_999), 1e-5);
        c.validate().unwrap();
        let bad = TrainConfig {
            iterations: 2_000,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let odd = TrainConfig {
            batch_size: 5,
            ..TrainConfig::default()
        };
        assert!(odd.validate().is_err());
    }

    #[test]
    fn learns_linear_risk() {
        let (x, o) = linear_cohort(300, 21);
        let (train_rows, val_rows): (Vec<usize>, Vec<usize>) = (0..300).partition(|i| i % 3 != 0);
        let cfg = TrainConfig {
            iterations: 500,
            schedule: vec![(0, 0.05)],
            batch_size: 32,
            seed: 3,
            ..TrainConfig::default()
        };
        let o_train: Vec<Outcome> = train_rows.iter().map(|&i| o[i]).collect();
        let trained = train_survival_net(&x.select_rows(&train_rows), &o_train, &cfg).unwrap();
        let val = x.select_rows(&val_rows);
        let o_val: Vec<Outcome> = val_rows.iter().map(|&i| o[i]).collect();
        let h = super::super::predict_net(&trained.net, &val).unwrap();
        let c = concordance_index(&h, &o_val).unwrap();
        assert!(c >= 0.75, "validation C = {c}");
    }

    #[test]
    fn deterministic_and_persistable() {
        let (x, o) = linear_cohort(60, 2);
        let cfg = TrainConfig {
            iterations: 50,
            schedule: vec![(0, 0.01)],
            ..TrainConfig::default()
        };
        let a = train_survival_net(&x, &o, &cfg).unwrap();
        let b = train_survival_net(&x, &o, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.history.len(), 50);
        let dir = tempfile::tempdir().unwrap();
        let file = NetFile {
            net: a.net.clone(),
            config: cfg,
        };
        file.write_json(dir.path().join("net.json")).unwrap();
        assert_eq!(NetFile::read_json(dir.path().join("net.json")).unwrap(), file);
        write_loss_history(dir.path().join("loss.csv"), &a.history).unwrap();
        assert_eq!(read_loss_history(dir.path().join("loss.csv")).unwrap(), a.history);
    }

    #[test]
    fn full_cohort_linear_net_descends() {
        let (x, o) = linear_cohort(120, 8);
        let z = crate::matrix::Standardizer::fit(&x).unwrap().apply(&x).unwrap();
        let cfg = TrainConfig {
            iterations: 200,
            schedule: vec![(0, TrainConfig::default().schedule[0].1)],
            hidden: vec![],
            sampling: Sampling::FullCohort,
            ..TrainConfig::default()
        };
        let t = train_survival_net(&z, &o, &cfg).unwrap();
        assert!(t.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn divergence_reports_iteration() {
        let (x, o) = linear_cohort(40, 5);
        let scaled = FeatureMatrix::new(
            x.subject_ids().to_vec(),
            x.names().to_vec(),
            x.values() * 1e150,
        )
        .unwrap();
        let cfg = TrainConfig {
            iterations: 100,
            schedule: vec![(0, 1e10)],
            ..TrainConfig::default()
        };
        assert!(matches!(train_survival_net(&scaled, &o, &cfg), Err(Error::Diverged(_))));
    }
}
