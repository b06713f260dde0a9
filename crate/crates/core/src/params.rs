//! Dense parameter vectors and the seeded random stream shared by every
//! stochastic component.

use std::ops::{Deref, DerefMut};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};

/// Random stream used throughout the crate. ChaCha is counter based, so a
/// `(seed, draw index)` pair fully determines every sample.
pub type LabRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> LabRng {
    LabRng::seed_from_u64(seed)
}

/// Dense real vector of model parameters.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        Self(vec![value; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// `self - other`, element-wise.
    pub fn difference(&self, other: &ParamVector) -> Result<ParamVector> {
        check_dim(self.dim(), other.dim())?;
        Ok(ParamVector(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    /// `self += scale * other`.
    pub fn axpy(&mut self, scale: f64, other: &[f64]) -> Result<()> {
        check_dim(self.dim(), other.len())?;
        for (a, b) in self.0.iter_mut().zip(other) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

impl From<&[f64]> for ParamVector {
    fn from(values: &[f64]) -> Self {
        Self(values.to_vec())
    }
}

impl FromIterator<f64> for ParamVector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn difference_checks_dimension() {
        let a = ParamVector::new(vec![1.0, 2.0]);
        let b = ParamVector::new(vec![1.0]);
        assert!(a.difference(&b).is_err());
        let c = ParamVector::new(vec![0.5, 3.0]);
        assert_eq!(a.difference(&c).unwrap().as_slice(), &[0.5, -1.0]);
    }

    #[test]
    fn same_seed_same_stream() {
        use rand::Rng;
        let mut r1 = seeded_rng(7);
        let mut r2 = seeded_rng(7);
        let a: Vec<u64> = (0..8).map(|_| r1.random()).collect();
        let b: Vec<u64> = (0..8).map(|_| r2.random()).collect();
        assert_eq!(a, b);
    }
}
