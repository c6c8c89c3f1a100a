use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::FEATURE_DIM;

/// Variance floor; components whose standard deviation falls below it are
/// treated as constant.
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Per-component mean and population standard deviation of a set of image
/// feature vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub epsilon: f64,
}

impl NormalizationStats {
    /// Computes statistics over at least two vectors of length 512.
    pub fn compute<'a>(vectors: impl IntoIterator<Item = &'a [f32]>) -> Result<Self, DatasetError> {
        let vectors: Vec<&[f32]> = vectors.into_iter().collect();
        if vectors.len() < 2 {
            return Err(DatasetError::Stats(format!("need at least 2 vectors, got {}", vectors.len())));
        }
        if let Some(v) = vectors.iter().find(|v| v.len() != FEATURE_DIM) {
            return Err(DatasetError::Stats(format!("vector of length {} (expected {FEATURE_DIM})", v.len())));
        }
        let n = vectors.len() as f64;
        let mut mu = vec![0.0; FEATURE_DIM];
        for v in &vectors {
            for (m, x) in mu.iter_mut().zip(v.iter()) {
                *m += f64::from(*x);
            }
        }
        mu.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; FEATURE_DIM];
        for v in &vectors {
            for ((s, m), x) in var.iter_mut().zip(&mu).zip(v.iter()) {
                let d = f64::from(*x) - m;
                *s += d * d;
            }
        }
        let sigma = var.into_iter().map(|s| (s / n).sqrt()).collect();
        Ok(Self { mu, sigma, epsilon: DEFAULT_EPSILON })
    }

    pub fn is_constant(&self, component: usize) -> bool {
        self.sigma[component] < self.epsilon
    }

    pub fn constant_components(&self) -> Vec<usize> {
        (0..self.sigma.len()).filter(|&i| self.is_constant(i)).collect()
    }

    /// `(f - mu) / sigma` per component; constant components map to 0.
    pub fn normalize(&self, v: &[f32]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.mu.len());
        v.iter()
            .enumerate()
            .map(|(i, x)| {
                if self.is_constant(i) {
                    0.0
                } else {
                    (f64::from(*x) - self.mu[i]) / self.sigma[i].max(self.epsilon)
                }
            })
            .collect()
    }
}
