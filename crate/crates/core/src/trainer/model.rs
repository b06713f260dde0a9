use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, LabError, Result};
use crate::params::{LabRng, ParamVector};
use crate::trainer::dataset::SyntheticDataset;
use crate::unified_momentum::GradientOracle;

/// Shape of a softmax classifier with an optional rectified hidden layer.
///
/// Flat layout: `[W1 (hidden×input), b1, W2 (classes×hidden), b2]`, or
/// `[W (classes×input), b]` without a hidden layer. Matrices are row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpModel {
    pub input: usize,
    pub hidden: Option<usize>,
    pub classes: usize,
}

/// Unflattened parameters. `w1`/`b1` are empty without a hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Layers {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl MlpModel {
    pub fn logistic(input: usize, classes: usize) -> Self {
        Self {
            input,
            hidden: None,
            classes,
        }
    }

    pub fn two_layer(input: usize, hidden: usize, classes: usize) -> Self {
        Self {
            input,
            hidden: Some(hidden),
            classes,
        }
    }

    /// Width feeding the output layer.
    fn head_input(&self) -> usize {
        self.hidden.unwrap_or(self.input)
    }

    pub fn param_count(&self) -> usize {
        let head = self.classes * self.head_input() + self.classes;
        match self.hidden {
            Some(h) => h * self.input + h + head,
            None => head,
        }
    }

    /// Scaled Gaussian initialization, `N(0, 2/fan_in)` weights and zero
    /// biases.
    pub fn init(&self, rng: &mut LabRng) -> ParamVector {
        let mut gauss = |n: usize, fan_in: usize| -> Vec<f64> {
            let scale = (2.0 / fan_in as f64).sqrt();
            (0..n)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect()
        };
        let (w1, b1) = match self.hidden {
            Some(h) => (gauss(h * self.input, self.input), vec![0.0; h]),
            None => (Vec::new(), Vec::new()),
        };
        let w2 = gauss(self.classes * self.head_input(), self.head_input());
        self.flatten(&Layers {
            w1,
            b1,
            w2,
            b2: vec![0.0; self.classes],
        })
    }

    pub fn unflatten(&self, params: &[f64]) -> Result<Layers> {
        check_dim(self.param_count(), params.len())?;
        let mut rest = params;
        let mut take = |n: usize| {
            let (head, tail) = rest.split_at(n);
            rest = tail;
            head.to_vec()
        };
        let (w1, b1) = match self.hidden {
            Some(h) => (take(h * self.input), take(h)),
            None => (Vec::new(), Vec::new()),
        };
        let w2 = take(self.classes * self.head_input());
        let b2 = take(self.classes);
        Ok(Layers { w1, b1, w2, b2 })
    }

    pub fn flatten(&self, layers: &Layers) -> ParamVector {
        let mut flat = Vec::with_capacity(self.param_count());
        flat.extend_from_slice(&layers.w1);
        flat.extend_from_slice(&layers.b1);
        flat.extend_from_slice(&layers.w2);
        flat.extend_from_slice(&layers.b2);
        flat.into()
    }

    fn check_data(&self, data: &SyntheticDataset) -> Result<()> {
        check_dim(self.input, data.dim())?;
        check_dim(self.classes, data.classes())
    }

    /// Hidden activations (or the raw input) and the output logits.
    fn forward_row(&self, layers: &Layers, x: &[f64], hidden: &mut Vec<f64>, logits: &mut [f64]) {
        hidden.clear();
        match self.hidden {
            Some(h) => {
                for j in 0..h {
                    let row = &layers.w1[j * self.input..(j + 1) * self.input];
                    let pre: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + layers.b1[j];
                    hidden.push(pre.max(0.0));
                }
            }
            None => hidden.extend_from_slice(x),
        }
        let width = self.head_input();
        for (c, out) in logits.iter_mut().enumerate() {
            let row = &layers.w2[c * width..(c + 1) * width];
            *out = row.iter().zip(hidden.iter()).map(|(w, v)| w * v).sum::<f64>() + layers.b2[c];
        }
    }

    /// Mean softmax cross-entropy over `batch` (row indices) and its
    /// gradient with respect to the flat parameters.
    pub fn forward_loss(
        &self,
        params: &[f64],
        data: &SyntheticDataset,
        batch: &[usize],
    ) -> Result<(f64, ParamVector)> {
        self.check_data(data)?;
        if batch.is_empty() {
            return Err(LabError::Argument("batch must not be empty".into()));
        }
        let layers = self.unflatten(params)?;
        let mut grad = Layers {
            w1: vec![0.0; layers.w1.len()],
            b1: vec![0.0; layers.b1.len()],
            w2: vec![0.0; layers.w2.len()],
            b2: vec![0.0; layers.b2.len()],
        };
        let width = self.head_input();
        let inv_b = 1.0 / batch.len() as f64;
        let mut hidden = Vec::with_capacity(width);
        let mut logits = vec![0.0; self.classes];
        let mut dhidden = vec![0.0; width];
        let mut loss = 0.0;
        for &i in batch {
            if i >= data.len() {
                return Err(LabError::Argument(format!("row {i} out of range")));
            }
            let (x, label) = (data.row(i), data.label(i));
            self.forward_row(&layers, x, &mut hidden, &mut logits);
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let norm: f64 = logits.iter().map(|z| (z - max).exp()).sum();
            let log_z = max + norm.ln();
            loss += log_z - logits[label];

            dhidden.fill(0.0);
            for c in 0..self.classes {
                let p = (logits[c] - log_z).exp();
                let dz = (p - if c == label { 1.0 } else { 0.0 }) * inv_b;
                grad.b2[c] += dz;
                let row = c * width;
                for j in 0..width {
                    grad.w2[row + j] += dz * hidden[j];
                    dhidden[j] += dz * layers.w2[row + j];
                }
            }
            if self.hidden.is_some() {
                for j in 0..width {
                    // rectifier derivative, 0 at the kink
                    if hidden[j] <= 0.0 {
                        continue;
                    }
                    let d = dhidden[j];
                    grad.b1[j] += d;
                    let row = j * self.input;
                    for (k, v) in x.iter().enumerate() {
                        grad.w1[row + k] += d * v;
                    }
                }
            }
        }
        Ok((loss * inv_b, self.flatten(&grad)))
    }

    /// Mean cross-entropy over the whole dataset.
    pub fn dataset_loss(&self, params: &[f64], data: &SyntheticDataset) -> Result<f64> {
        self.check_data(data)?;
        let layers = self.unflatten(params)?;
        let mut hidden = Vec::new();
        let mut logits = vec![0.0; self.classes];
        let mut loss = 0.0;
        for i in 0..data.len() {
            self.forward_row(&layers, data.row(i), &mut hidden, &mut logits);
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let log_z = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
            loss += log_z - logits[data.label(i)];
        }
        Ok(loss / data.len() as f64)
    }

    pub fn accuracy(&self, params: &[f64], data: &SyntheticDataset) -> Result<f64> {
        self.check_data(data)?;
        let layers = self.unflatten(params)?;
        let mut hidden = Vec::new();
        let mut logits = vec![0.0; self.classes];
        let mut correct = 0usize;
        for i in 0..data.len() {
            self.forward_row(&layers, data.row(i), &mut hidden, &mut logits);
            let predicted = logits
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(c, _)| c)
                .unwrap();
            correct += usize::from(predicted == data.label(i));
        }
        Ok(correct as f64 / data.len() as f64)
    }
}

/// Gradient oracle drawing a uniform minibatch (with replacement) per call.
#[derive(Debug, Clone)]
pub struct MinibatchObjective<'a> {
    pub model: MlpModel,
    pub data: &'a SyntheticDataset,
    pub batch_size: usize,
}

impl GradientOracle for MinibatchObjective<'_> {
    fn dim(&self) -> usize {
        self.model.param_count()
    }

    fn gradient(&mut self, x: &[f64], rng: &mut LabRng, grad: &mut [f64]) -> Result<()> {
        check_dim(self.dim(), grad.len())?;
        let batch: Vec<usize> = (0..self.batch_size.max(1))
            .map(|_| rng.random_range(0..self.data.len()))
            .collect();
        let (_, g) = self.model.forward_loss(x, self.data, &batch)?;
        grad.copy_from_slice(&g);
        Ok(())
    }

    fn loss(&self, x: &[f64]) -> f64 {
        self.model.dataset_loss(x, self.data).unwrap_or(f64::NAN)
    }
}
