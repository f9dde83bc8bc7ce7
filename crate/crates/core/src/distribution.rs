//! Labelled categorical distributions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on `sum(probs) == 1`.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("labels ({labels}) and probabilities ({probs}) differ in length")]
    LengthMismatch { labels: usize, probs: usize },
    #[error("probability {value} at index {index} is negative or non-finite")]
    InvalidProbability { index: usize, value: f64 },
    #[error("probabilities sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("distribution has no outcomes")]
    Empty,
}

/// A finite distribution over named outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCategorical")]
pub struct CategoricalDistribution {
    labels: Vec<String>,
    probs: Vec<f64>,
}

#[derive(Deserialize)]
struct RawCategorical {
    labels: Vec<String>,
    probs: Vec<f64>,
}

impl TryFrom<RawCategorical> for CategoricalDistribution {
    type Error = DistributionError;

    fn try_from(raw: RawCategorical) -> Result<Self, Self::Error> {
        Self::new(raw.labels, raw.probs)
    }
}

impl CategoricalDistribution {
    pub fn new(labels: Vec<String>, probs: Vec<f64>) -> Result<Self, DistributionError> {
        if labels.len() != probs.len() {
            return Err(DistributionError::LengthMismatch {
                labels: labels.len(),
                probs: probs.len(),
            });
        }
        if probs.is_empty() {
            return Err(DistributionError::Empty);
        }
        for (index, &value) in probs.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(DistributionError::InvalidProbability { index, value });
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(DistributionError::NotNormalized(total));
        }
        Ok(Self { labels, probs })
    }

    /// Normalizes non-negative weights; fails if they sum to zero.
    pub fn from_weights(labels: Vec<String>, weights: &[f64]) -> Result<Self, DistributionError> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(DistributionError::NotNormalized(total));
        }
        Self::new(labels, weights.iter().map(|w| w / total).collect())
    }

    /// Two-outcome distribution `("yes", "no")` with `P(yes) = p`.
    pub fn bernoulli(p: f64) -> Result<Self, DistributionError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(DistributionError::InvalidProbability { index: 0, value: p });
        }
        Ok(Self {
            labels: vec!["yes".to_owned(), "no".to_owned()],
            probs: vec![p, 1.0 - p],
        })
    }

    /// Point mass on `index`.
    pub fn one_hot(labels: Vec<String>, index: usize) -> Result<Self, DistributionError> {
        let mut probs = vec![0.0; labels.len()];
        if index >= probs.len() {
            return Err(DistributionError::Empty);
        }
        probs[index] = 1.0;
        Self::new(labels, probs)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Index of the most probable outcome; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}
