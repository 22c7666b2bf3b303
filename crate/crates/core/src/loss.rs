//! Loss functions defined on all of `R^d`.

use serde::{Deserialize, Serialize};

use crate::linalg::{dist, dot, norm, sub};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossFunction {
    /// `g^T x + c`
    Linear { gradient: Vec<f64>, offset: f64 },
    /// `(lambda/2) ||x - theta||^2 + c`
    Quadratic { strong_convexity: f64, center: Vec<f64>, offset: f64 },
}

impl LossFunction {
    pub fn zero(dim: usize) -> Self {
        Self::Linear { gradient: vec![0.0; dim], offset: 0.0 }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Linear { gradient, .. } => gradient.len(),
            Self::Quadratic { center, .. } => center.len(),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Self::Linear { gradient, offset } => dot(gradient, x) + offset,
            Self::Quadratic { strong_convexity, center, offset } => {
                let d = dist(x, center);
                0.5 * strong_convexity * d * d + offset
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Self::Linear { gradient, .. } => gradient.clone(),
            Self::Quadratic { strong_convexity, center, .. } => {
                sub(x, center).into_iter().map(|v| v * strong_convexity).collect()
            }
        }
    }

    /// Strong-convexity modulus; zero for linear losses.
    pub fn strong_convexity(&self) -> f64 {
        match self {
            Self::Linear { .. } => 0.0,
            Self::Quadratic { strong_convexity, .. } => *strong_convexity,
        }
    }

    /// Lipschitz constant on the origin-centred ball of the given radius.
    pub fn lipschitz_on_ball(&self, radius: f64) -> f64 {
        match self {
            Self::Linear { gradient, .. } => norm(gradient),
            Self::Quadratic { strong_convexity, center, .. } => {
                strong_convexity * (radius + norm(center))
            }
        }
    }

    /// Coefficients `(a, b, c)` with `value(x) = a ||x||^2 + b^T x + c`.
    pub fn coefficients(&self) -> (f64, Vec<f64>, f64) {
        match self {
            Self::Linear { gradient, offset } => (0.0, gradient.clone(), *offset),
            Self::Quadratic { strong_convexity, center, offset } => (
                0.5 * strong_convexity,
                center.iter().map(|c| -strong_convexity * c).collect(),
                0.5 * strong_convexity * dot(center, center) + offset,
            ),
        }
    }
}
