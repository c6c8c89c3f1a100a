use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::NnError;

pub const NUM_CLASSES: usize = 2;

/// Weights and biases. Matrices are row-major: `w1` is
/// `hidden_size × input_size`, `w2` is `2 × hidden_size`.
///
/// The same shape doubles as the gradient container.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub input_size: usize,
    pub hidden_size: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        Self {
            input_size,
            hidden_size,
            w1: vec![0.0; hidden_size * input_size],
            b1: vec![0.0; hidden_size],
            w2: vec![0.0; NUM_CLASSES * hidden_size],
            b2: vec![0.0; NUM_CLASSES],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(input_size: usize, hidden_size: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(input_size, hidden_size);
        let limit1 = (6.0 / (input_size + hidden_size) as f64).sqrt();
        let d1 = Uniform::new_inclusive(-limit1, limit1);
        p.w1.iter_mut().for_each(|w| *w = d1.sample(&mut rng));
        let limit2 = (6.0 / (hidden_size + NUM_CLASSES) as f64).sqrt();
        let d2 = Uniform::new_inclusive(-limit2, limit2);
        p.w2.iter_mut().for_each(|w| *w = d2.sample(&mut rng));
        p
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let (i, h) = (self.input_size, self.hidden_size);
        if h == 0 || i == 0 {
            return Err(NnError::Shape("input and hidden sizes must be positive".into()));
        }
        if self.w1.len() != h * i || self.b1.len() != h || self.w2.len() != NUM_CLASSES * h || self.b2.len() != NUM_CLASSES {
            return Err(NnError::Shape(format!("tensor sizes inconsistent with {i} inputs and {h} hidden units")));
        }
        if self.tensors().iter().any(|t| t.iter().any(|v| !v.is_finite())) {
            return Err(NnError::Shape("parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn tensors(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}
