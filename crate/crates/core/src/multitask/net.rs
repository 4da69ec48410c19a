use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::par::Execution;
use crate::survival::{cox_npll, cox_npll_gradient, Outcome};

/// Fully connected network with tanh hidden layers and one linear output unit
/// producing a risk score `h`. Weight matrices are stored row-major, one row
/// per output unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalNet {
    pub sizes: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub seed: u64,
    /// Input feature names, when known; used to align prediction inputs.
    #[serde(default)]
    pub feature_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetGradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl NetGradients {
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            v.extend_from_slice(w);
            v.extend_from_slice(b);
        }
        v
    }
}

impl SurvivalNet {
    /// Xavier-uniform weights and zero biases drawn from `seed`.
    pub fn new(input: usize, hidden: &[usize], seed: u64) -> Result<SurvivalNet> {
        if input == 0 || hidden.contains(&0) {
            return Err(Error::invalid("layer sizes must be positive"));
        }
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in sizes.windows(2) {
            let bound = (6.0 / (w[0] + w[1]) as f64).sqrt();
            weights.push((0..w[0] * w[1]).map(|_| rng.random_range(-bound..bound)).collect());
            biases.push(vec![0.0; w[1]]);
        }
        Ok(SurvivalNet {
            sizes,
            weights,
            biases,
            seed,
            feature_names: Vec::new(),
        })
    }

    pub fn from_parts(sizes: Vec<usize>, weights: Vec<Vec<f64>>, biases: Vec<Vec<f64>>) -> Result<SurvivalNet> {
        let net = SurvivalNet {
            sizes,
            weights,
            biases,
            seed: 0,
            feature_names: Vec::new(),
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        let layers = self.sizes.len().saturating_sub(1);
        if layers == 0 || self.sizes.last() != Some(&1) || self.sizes.contains(&0) {
            return Err(Error::invalid(format!("bad layer sizes {:?}", self.sizes)));
        }
        if self.weights.len() != layers || self.biases.len() != layers {
            return Err(Error::invalid("layer count does not match sizes"));
        }
        for (l, w) in self.sizes.windows(2).enumerate() {
            if self.weights[l].len() != w[0] * w[1] || self.biases[l].len() != w[1] {
                return Err(Error::invalid(format!("layer {l} has the wrong shape")));
            }
        }
        if !self.feature_names.is_empty() && self.feature_names.len() != self.sizes[0] {
            return Err(Error::invalid("feature names do not match the input width"));
        }
        if let Some(i) = self.parameters().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(())
    }

    pub fn with_zero_output(mut self) -> SurvivalNet {
        let last = self.weights.len() - 1;
        self.weights[last].fill(0.0);
        self.biases[last].fill(0.0);
        self
    }

    pub fn input_width(&self) -> usize {
        self.sizes[0]
    }

    /// Per-layer activations; the last entry holds the single output.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let layers = self.weights.len();
        let mut acts = vec![x.to_vec()];
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let prev = &acts[l];
            let out: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &self.weights[l][o * n_in..(o + 1) * n_in];
                    let z = self.biases[l][o] + row.iter().zip(prev).map(|(w, a)| w * a).sum::<f64>();
                    if l + 1 < layers {
                        z.tanh()
                    } else {
                        z
                    }
                })
                .collect();
            acts.push(out);
        }
        acts
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        self.activations(x).last().expect("at least one layer")[0]
    }

    fn zero_gradients(&self) -> NetGradients {
        NetGradients {
            weights: self.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// Batch Cox loss and its gradient with respect to every parameter.
    pub fn loss_and_gradients(&self, rows: &[&[f64]], outcomes: &[Outcome]) -> Result<(f64, NetGradients)> {
        let acts: Vec<Vec<Vec<f64>>> = rows.iter().map(|r| self.activations(r)).collect();
        let h: Vec<f64> = acts.iter().map(|a| a.last().expect("output")[0]).collect();
        let loss = cox_npll(&h, outcomes)?;
        let dh = cox_npll_gradient(&h, outcomes)?;
        let mut grads = self.zero_gradients();
        let layers = self.weights.len();
        for (a, &d) in acts.iter().zip(&dh) {
            let mut delta = vec![d];
            for l in (0..layers).rev() {
                let n_in = self.sizes[l];
                for (o, &dl) in delta.iter().enumerate() {
                    grads.biases[l][o] += dl;
                    let g = &mut grads.weights[l][o * n_in..(o + 1) * n_in];
                    for (gi, ai) in g.iter_mut().zip(&a[l]) {
                        *gi += dl * ai;
                    }
                }
                if l > 0 {
                    delta = (0..n_in)
                        .map(|i| {
                            let back: f64 = delta
                                .iter()
                                .enumerate()
                                .map(|(o, dl)| self.weights[l][o * n_in + i] * dl)
                                .sum();
                            back * (1.0 - a[l][i] * a[l][i])
                        })
                        .collect();
                }
            }
        }
        Ok((loss, grads))
    }

    pub fn step(&mut self, grads: &NetGradients, learning_rate: f64) {
        for (w, g) in self.weights.iter_mut().zip(&grads.weights) {
            w.iter_mut().zip(g).for_each(|(w, g)| *w -= learning_rate * g);
        }
        for (b, g) in self.biases.iter_mut().zip(&grads.biases) {
            b.iter_mut().zip(g).for_each(|(b, g)| *b -= learning_rate * g);
        }
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn parameters(&self) -> Vec<f64> {
        NetGradients {
            weights: self.weights.clone(),
            biases: self.biases.clone(),
        }
        .flatten()
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        let total: usize = self.weights.iter().chain(&self.biases).map(Vec::len).sum();
        if params.len() != total {
            return Err(Error::LengthMismatch {
                expected: total,
                found: params.len(),
            });
        }
        let mut it = params.iter().copied();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            w.iter_mut().for_each(|v| *v = it.next().expect("length checked"));
            b.iter_mut().for_each(|v| *v = it.next().expect("length checked"));
        }
        Ok(())
    }
}

/// Risk score for every subject in `features`.
pub fn predict_net(net: &SurvivalNet, features: &FeatureMatrix) -> Result<Vec<f64>> {
    predict_net_with(net, features, Execution::default())
}

pub fn predict_net_with(net: &SurvivalNet, features: &FeatureMatrix, exec: Execution) -> Result<Vec<f64>> {
    let cols: Vec<usize> = if net.feature_names.is_empty() {
        if features.ncols() != net.input_width() {
            return Err(Error::LengthMismatch {
                expected: net.input_width(),
                found: features.ncols(),
            });
        }
        (0..features.ncols()).collect()
    } else {
        net.feature_names
            .iter()
            .map(|n| features.column_index(n).ok_or_else(|| Error::MissingFeature(n.clone())))
            .collect::<Result<_>>()?
    };
    let values = features.values();
    Ok(exec.map_range(features.nrows(), |i| {
        let x: Vec<f64> = cols.iter().map(|&c| values[(i, c)]).collect();
        net.forward(&x)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_built_tanh_unit() {
        let net = SurvivalNet::from_parts(vec![1, 1, 1], vec![vec![1.0], vec![2.0]], vec![vec![0.0], vec![0.0]]).unwrap();
        assert!((net.forward(&[1.0]) - 2.0 * 1f64.tanh()).abs() < 1e-15);
        assert!((net.forward(&[1.0]) - 1.5232).abs() < 1e-4);
    }

    #[test]
    fn zero_output_layer_gives_zero_scores() {
        let net = SurvivalNet::new(3, &[4], 1).unwrap().with_zero_output();
        let x = FeatureMatrix::from_rows(
            vec!["a".into(), "b".into()],
            vec!["x".into(), "y".into(), "z".into()],
            &[vec![1.0, 2.0, 3.0], vec![-1.0, 0.5, 9.0]],
        )
        .unwrap();
        assert_eq!(predict_net(&net, &x).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn width_mismatch() {
        let net = SurvivalNet::new(2, &[], 1).unwrap();
        let x = FeatureMatrix::from_rows(vec!["a".into()], vec!["x".into()], &[vec![1.0]]).unwrap();
        assert!(matches!(predict_net(&net, &x), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn seeded_init_is_reproducible() {
        assert_eq!(SurvivalNet::new(5, &[16], 7).unwrap(), SurvivalNet::new(5, &[16], 7).unwrap());
        assert_ne!(SurvivalNet::new(5, &[16], 7).unwrap(), SurvivalNet::new(5, &[16], 8).unwrap());
    }

    #[test]
    fn parameter_round_trip() {
        let mut net = SurvivalNet::new(3, &[4, 2], 5).unwrap();
        let p = net.parameters();
        assert_eq!(p.len(), 3 * 4 + 4 + 4 * 2 + 2 + 2 + 1);
        let doubled: Vec<f64> = p.iter().map(|v| 2.0 * v).collect();
        net.set_parameters(&doubled).unwrap();
        assert_eq!(net.parameters(), doubled);
        assert!(net.set_parameters(&p[1..]).is_err());
    }
}
