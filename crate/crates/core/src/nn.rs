//! Single-hidden-layer feed-forward network trained by backpropagation.
//!
//! Both layers use the logistic sigmoid. Training is per-sample SGD on the
//! squared error `E = 1/2 * sum_o (y_o - t_o)^2` in a fixed sample order;
//! progress is reported as the mean squared error over every sample and
//! output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ranking::{Match, RankedMatches};
use crate::tokenizer::TokenSequence;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("training set is empty")]
    EmptyDataset,
    #[error("loss became non-finite at epoch {0}")]
    NonFiniteLoss(usize),
    #[error("invalid training parameters: {0}")]
    InvalidParams(String),
}

pub type Result<T> = std::result::Result<T, NnError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub target_mse: f64,
    pub hidden_width: usize,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self { learning_rate: 0.3, max_epochs: 2000, target_mse: 0.01, hidden_width: 32, seed: 42 }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NnError::InvalidParams(format!("learning rate {}", self.learning_rate)));
        }
        if self.max_epochs == 0 {
            return Err(NnError::InvalidParams("max_epochs must be at least 1".into()));
        }
        if self.hidden_width == 0 {
            return Err(NnError::InvalidParams("hidden width must be at least 1".into()));
        }
        Ok(())
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Weights of a `input -> hidden -> output` sigmoid network.
/// `w1` is `hidden x input` and `w2` is `output x hidden`, both row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub input_width: usize,
    pub hidden_width: usize,
    pub output_width: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Gradients laid out like [`Mlp`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainReport {
    pub epochs: usize,
    pub mse: f64,
    pub converged: bool,
}

impl Mlp {
    pub fn zeros(input_width: usize, hidden_width: usize, output_width: usize) -> Self {
        Self {
            input_width,
            hidden_width,
            output_width,
            w1: vec![0.0; hidden_width * input_width],
            b1: vec![0.0; hidden_width],
            w2: vec![0.0; output_width * hidden_width],
            b2: vec![0.0; output_width],
        }
    }

    /// Uniform weights in `[-0.5, 0.5]`, drawn in `w1, b1, w2, b2` order.
    pub fn seeded(input_width: usize, hidden_width: usize, output_width: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Self::zeros(input_width, hidden_width, output_width);
        for p in net.w1.iter_mut().chain(&mut net.b1).chain(&mut net.w2).chain(&mut net.b2) {
            *p = rng.gen_range(-0.5..=0.5);
        }
        net
    }

    pub fn is_finite(&self) -> bool {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2).all(|w| w.is_finite())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_width {
            return Err(NnError::DimensionMismatch(format!(
                "input of length {} for a network of width {}",
                x.len(),
                self.input_width
            )));
        }
        Ok(())
    }

    fn hidden(&self, x: &[f64]) -> Vec<f64> {
        (0..self.hidden_width)
            .map(|j| {
                let row = &self.w1[j * self.input_width..(j + 1) * self.input_width];
                sigmoid(row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b1[j])
            })
            .collect()
    }

    fn output(&self, h: &[f64]) -> Vec<f64> {
        (0..self.output_width)
            .map(|o| {
                let row = &self.w2[o * self.hidden_width..(o + 1) * self.hidden_width];
                sigmoid(row.iter().zip(h).map(|(w, v)| w * v).sum::<f64>() + self.b2[o])
            })
            .collect()
    }

    /// `y = sigma(W2 sigma(W1 x + b1) + b2)`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.output(&self.hidden(x)))
    }

    /// Gradient of `1/2 * sum_o (y_o - t_o)^2` for one sample.
    pub fn sample_gradients(&self, x: &[f64], target: &[f64]) -> Result<Gradients> {
        self.check_input(x)?;
        if target.len() != self.output_width {
            return Err(NnError::DimensionMismatch(format!(
                "target of length {} for {} outputs",
                target.len(),
                self.output_width
            )));
        }
        let h = self.hidden(x);
        let y = self.output(&h);
        let delta_o: Vec<f64> =
            y.iter().zip(target).map(|(&yo, &to)| (yo - to) * yo * (1.0 - yo)).collect();
        let delta_h: Vec<f64> = (0..self.hidden_width)
            .map(|j| {
                let back: f64 =
                    (0..self.output_width).map(|o| self.w2[o * self.hidden_width + j] * delta_o[o]).sum();
                back * h[j] * (1.0 - h[j])
            })
            .collect();

        let mut g = Gradients {
            w1: vec![0.0; self.w1.len()],
            b1: delta_h.clone(),
            w2: vec![0.0; self.w2.len()],
            b2: delta_o.clone(),
        };
        for o in 0..self.output_width {
            for j in 0..self.hidden_width {
                g.w2[o * self.hidden_width + j] = delta_o[o] * h[j];
            }
        }
        for j in 0..self.hidden_width {
            for i in 0..self.input_width {
                g.w1[j * self.input_width + i] = delta_h[j] * x[i];
            }
        }
        Ok(g)
    }

    /// Mean of `(y - t)^2` over all samples and outputs.
    pub fn mse(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
        if inputs.is_empty() {
            return Err(NnError::EmptyDataset);
        }
        let mut sum = 0.0;
        for (x, t) in inputs.iter().zip(targets) {
            let y = self.forward(x)?;
            sum += y.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        Ok(sum / (inputs.len() * self.output_width) as f64)
    }

    /// Analytic gradient of [`Mlp::mse`].
    pub fn mse_gradients(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<Gradients> {
        if inputs.is_empty() {
            return Err(NnError::EmptyDataset);
        }
        let scale = 2.0 / (inputs.len() * self.output_width) as f64;
        let mut acc = Gradients {
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; self.b1.len()],
            w2: vec![0.0; self.w2.len()],
            b2: vec![0.0; self.b2.len()],
        };
        for (x, t) in inputs.iter().zip(targets) {
            let g = self.sample_gradients(x, t)?;
            for (a, b) in acc.w1.iter_mut().zip(&g.w1) {
                *a += scale * b;
            }
            for (a, b) in acc.b1.iter_mut().zip(&g.b1) {
                *a += scale * b;
            }
            for (a, b) in acc.w2.iter_mut().zip(&g.w2) {
                *a += scale * b;
            }
            for (a, b) in acc.b2.iter_mut().zip(&g.b2) {
                *a += scale * b;
            }
        }
        Ok(acc)
    }

    /// One pass of per-sample gradient descent in the given order.
    pub fn train_epoch(&mut self, inputs: &[Vec<f64>], targets: &[Vec<f64>], rate: f64) -> Result<()> {
        for (x, t) in inputs.iter().zip(targets) {
            let g = self.sample_gradients(x, t)?;
            for (w, d) in self.w1.iter_mut().zip(&g.w1) {
                *w -= rate * d;
            }
            for (w, d) in self.b1.iter_mut().zip(&g.b1) {
                *w -= rate * d;
            }
            for (w, d) in self.w2.iter_mut().zip(&g.w2) {
                *w -= rate * d;
            }
            for (w, d) in self.b2.iter_mut().zip(&g.b2) {
                *w -= rate * d;
            }
        }
        Ok(())
    }

    /// Runs epochs until the MSE drops below `params.target_mse` or
    /// `params.max_epochs` is spent.
    pub fn train(&mut self, inputs: &[Vec<f64>], targets: &[Vec<f64>], params: &TrainParams) -> Result<TrainReport> {
        params.validate()?;
        if inputs.is_empty() {
            return Err(NnError::EmptyDataset);
        }
        if inputs.len() != targets.len() {
            return Err(NnError::DimensionMismatch(format!(
                "{} inputs for {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        let mut mse = self.mse(inputs, targets)?;
        let mut epochs = 0;
        while epochs < params.max_epochs && mse >= params.target_mse {
            self.train_epoch(inputs, targets, params.learning_rate)?;
            epochs += 1;
            mse = self.mse(inputs, targets)?;
            if !mse.is_finite() || !self.is_finite() {
                return Err(NnError::NonFiniteLoss(epochs));
            }
        }
        Ok(TrainReport { epochs, mse, converged: mse < params.target_mse })
    }
}

/// A trained network plus the label meaning of each output.
#[derive(Debug, Clone, PartialEq)]
pub struct NnModel {
    pub net: Mlp,
    pub token_count: usize,
    pub label_order: Vec<String>,
}

impl NnModel {
    pub fn input_width(&self) -> usize {
        self.net.input_width
    }

    pub fn forward_tokens(&self, tokens: &TokenSequence) -> Result<Vec<f64>> {
        if tokens.len() != self.token_count {
            return Err(NnError::DimensionMismatch(format!(
                "{} tokens for a model over {}",
                tokens.len(),
                self.token_count
            )));
        }
        self.net.forward(&tokens.to_features())
    }

    pub fn classify(&self, tokens: &TokenSequence) -> Result<RankedMatches> {
        Ok(rank_outputs(&self.label_order, &self.forward_tokens(tokens)?))
    }
}

/// `pct_L = 100 * y_L / sum(y)`; distance is `1 - y_L`; ties keep label order.
pub fn rank_outputs(labels: &[String], outputs: &[f64]) -> RankedMatches {
    let total: f64 = outputs.iter().sum();
    let mut entries: Vec<Match> = labels
        .iter()
        .zip(outputs)
        .map(|(l, &y)| Match { label: l.clone(), percentage: 100.0 * y / total, distance: 1.0 - y })
        .collect();
    entries.sort_by(|a, b| b.percentage.total_cmp(&a.percentage));
    RankedMatches::new(entries)
}

pub fn classify_nn(model: &NnModel, tokens: &TokenSequence) -> Result<RankedMatches> {
    model.classify(tokens)
}

pub fn one_hot(index: usize, width: usize) -> Vec<f64> {
    let mut v = vec![0.0; width];
    v[index] = 1.0;
    v
}

/// Trains a classifier over token sequences. Labels are ordered
/// lexicographically; samples are visited in the order given.
pub fn train_nn(samples: &[(TokenSequence, String)], params: &TrainParams) -> Result<(NnModel, TrainReport)> {
    params.validate()?;
    let Some((first, _)) = samples.first() else {
        return Err(NnError::EmptyDataset);
    };
    let token_count = first.len();
    if token_count == 0 {
        return Err(NnError::DimensionMismatch("empty token sequence".into()));
    }
    if let Some((bad, _)) = samples.iter().find(|(t, _)| t.len() != token_count) {
        return Err(NnError::DimensionMismatch(format!(
            "token sequences of length {} and {}",
            token_count,
            bad.len()
        )));
    }
    let mut label_order: Vec<String> = samples.iter().map(|(_, l)| l.clone()).collect();
    label_order.sort();
    label_order.dedup();

    let inputs: Vec<Vec<f64>> = samples.iter().map(|(t, _)| t.to_features()).collect();
    let targets: Vec<Vec<f64>> = samples
        .iter()
        .map(|(_, l)| one_hot(label_order.binary_search(l).expect("label indexed"), label_order.len()))
        .collect();

    let mut net = Mlp::seeded(2 * token_count, params.hidden_width, label_order.len(), params.seed);
    let report = net.train(&inputs, &targets, params)?;
    Ok((NnModel { net, token_count, label_order }, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::Token;

    #[test]
    fn zero_network_outputs_half() {
        let net = Mlp::zeros(4, 3, 2);
        assert_eq!(net.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![0.5, 0.5]);
        assert!(net.forward(&[1.0]).is_err());
    }

    #[test]
    fn seeded_is_deterministic() {
        let a = Mlp::seeded(6, 5, 3, 7);
        let b = Mlp::seeded(6, 5, 3, 7);
        assert_eq!(a, b);
        let x = [0.1, -0.3, 0.9, 0.0, 1.0, -1.0];
        let ya = a.forward(&x).unwrap();
        assert_eq!(ya, b.forward(&x).unwrap());
        assert!(ya.iter().all(|&y| y > 0.0 && y < 1.0));
        assert!(a.w1.iter().all(|w| (-0.5..=0.5).contains(w)));
    }

    #[test]
    fn rejects_bad_params() {
        let p = TrainParams { max_epochs: 0, ..TrainParams::default() };
        assert!(matches!(p.validate(), Err(NnError::InvalidParams(_))));
        let p = TrainParams { learning_rate: 0.0, ..TrainParams::default() };
        assert!(p.validate().is_err());
        assert_eq!(train_nn(&[], &TrainParams::default()).unwrap_err(), NnError::EmptyDataset);
    }

    #[test]
    fn ranks_stated_outputs() {
        let labels = vec!["A".to_string(), "C".to_string()];
        let r = rank_outputs(&labels, &[0.9, 0.1]);
        assert_eq!(r.top().label, "A");
        assert!((r.top().percentage - 90.0).abs() < 1e-12);
        assert!((r.top().distance - 0.1).abs() < 1e-12);

        let ten: Vec<String> = "ABCDEFGHIJ".chars().map(String::from).collect();
        let r = rank_outputs(&ten, &[0.3; 10]);
        assert!(r.entries().iter().all(|m| (m.percentage - 10.0).abs() < 1e-12));
        assert_eq!(r.labels().collect::<String>(), "ABCDEFGHIJ");
    }

    #[test]
    fn separable_token_classes() {
        let right = TokenSequence::new(vec![Token { cos: 1.0, sin: 0.0 }; 4]);
        let up = TokenSequence::new(vec![Token { cos: 0.0, sin: -1.0 }; 4]);
        let samples = vec![(right.clone(), "R".to_string()), (up.clone(), "U".to_string())];
        let (model, report) = train_nn(&samples, &TrainParams::default()).unwrap();
        assert!(report.converged, "{report:?}");
        assert_eq!(model.classify(&right).unwrap().top().label, "R");
        assert_eq!(model.classify(&up).unwrap().top().label, "U");
        let short = TokenSequence::new(vec![Token { cos: 1.0, sin: 0.0 }; 3]);
        assert!(model.classify(&short).is_err());
    }
}
