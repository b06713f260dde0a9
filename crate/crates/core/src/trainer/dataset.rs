use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::params::seeded_rng;

/// Generator for isotropic Gaussian blobs. Class `c` is centred at
/// `separation · e_c`, so the class means sit on a scaled simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub classes: usize,
    pub dim: usize,
    pub samples: usize,
    pub separation: f64,
    /// Standard deviation of every feature around its class mean.
    pub noise_scale: f64,
}

impl BlobSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(LabError::Config("need at least two classes".into()));
        }
        if self.dim < self.classes {
            return Err(LabError::Config("dim must be >= classes for simplex means".into()));
        }
        if self.samples < self.classes {
            return Err(LabError::Config("need at least one sample per class".into()));
        }
        if !(self.separation.is_finite() && self.noise_scale >= 0.0 && self.noise_scale.is_finite())
        {
            return Err(LabError::Config("separation and noise scale must be finite".into()));
        }
        Ok(())
    }

    /// Labels cycle through the classes, so every class gets
    /// `samples / classes` points (±1).
    pub fn generate(&self, seed: u64) -> Result<SyntheticDataset> {
        self.validate()?;
        let mut rng = seeded_rng(seed);
        let mut features = Vec::with_capacity(self.samples * self.dim);
        let mut labels = Vec::with_capacity(self.samples);
        for n in 0..self.samples {
            let class = n % self.classes;
            for j in 0..self.dim {
                let mean = if j == class { self.separation } else { 0.0 };
                let z: f64 = rng.sample(StandardNormal);
                features.push(mean + self.noise_scale * z);
            }
            labels.push(class);
        }
        Ok(SyntheticDataset {
            features,
            labels,
            dim: self.dim,
            classes: self.classes,
        })
    }
}

/// Row-major feature matrix with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    dim: usize,
    classes: usize,
}

impl SyntheticDataset {
    pub fn new(features: Vec<f64>, labels: Vec<usize>, dim: usize, classes: usize) -> Result<Self> {
        if dim == 0 || features.len() != labels.len() * dim {
            return Err(LabError::Dimension {
                expected: labels.len() * dim,
                actual: features.len(),
            });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(LabError::NonFinite("dataset features".into()));
        }
        if labels.iter().any(|&l| l >= classes) {
            return Err(LabError::Config("label out of range".into()));
        }
        if (0..classes).any(|c| !labels.contains(&c)) {
            return Err(LabError::Config("every class needs a sample".into()));
        }
        Ok(Self {
            features,
            labels,
            dim,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> BlobSpec {
        BlobSpec {
            classes: 3,
            dim: 5,
            samples: 31,
            separation: 2.0,
            noise_scale: 0.5,
        }
    }

    #[test]
    fn every_class_present_and_deterministic() {
        let a = spec().generate(3).unwrap();
        let b = spec().generate(3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 31);
        for c in 0..3 {
            assert!((0..a.len()).any(|i| a.label(i) == c));
        }
        assert_ne!(a, spec().generate(4).unwrap());
    }

    #[test]
    fn invalid_specs() {
        let mut s = spec();
        s.classes = 1;
        assert!(s.generate(0).is_err());
        let mut s = spec();
        s.samples = 2;
        assert!(s.generate(0).is_err());
        assert!(SyntheticDataset::new(vec![1.0; 3], vec![0, 1], 2, 2).is_err());
        assert!(SyntheticDataset::new(vec![1.0; 4], vec![0, 0], 2, 2).is_err());
        assert!(SyntheticDataset::new(vec![f64::NAN, 1.0], vec![0], 2, 1).is_err());
    }
}
