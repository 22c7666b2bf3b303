//! Best fixed point in hindsight over an interval of losses.
//!
//! A sum of linear and isotropic quadratic losses is again
//! `A ||x||^2 + B^T x + C`, so the interval optimum is either a linear
//! minimization (`A = 0`) or the Euclidean projection of `-B / 2A`. Every
//! answer carries a Frank-Wolfe gap computed with an exact linear minimizer,
//! which upper-bounds its suboptimality.

use serde::{Deserialize, Serialize};

use super::projection::{linear_minimizer, project};
use crate::error::{Error, Result};
use crate::linalg::{dot, sub};
use crate::loss::LossFunction;
use crate::oracle::{ConvexBody, Shape};

const FW_ITERATIONS: usize = 10_000;

/// `quad ||x||^2 + linear^T x + constant`
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub quad: f64,
    pub linear: Vec<f64>,
    pub constant: f64,
}

impl Aggregate {
    pub fn zero(dim: usize) -> Self {
        Self { quad: 0.0, linear: vec![0.0; dim], constant: 0.0 }
    }

    pub fn of(dim: usize, losses: &[LossFunction]) -> Self {
        let mut agg = Self::zero(dim);
        for f in losses {
            agg.add(f);
        }
        agg
    }

    pub fn add(&mut self, f: &LossFunction) {
        let (a, b, c) = f.coefficients();
        self.quad += a;
        self.linear.iter_mut().zip(&b).for_each(|(l, v)| *l += v);
        self.constant += c;
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.quad * dot(x, x) + dot(&self.linear, x) + self.constant
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.linear).map(|(xi, b)| 2.0 * self.quad * xi + b).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparatorMethod {
    LinearMinimization,
    Projection,
    ConditionalGradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparator {
    pub point: Vec<f64>,
    pub value: f64,
    /// Certified bound on `value - optimum`.
    pub gap: f64,
    pub method: ComparatorMethod,
}

fn fw_gap(shape: Shape<'_>, agg: &Aggregate, x: &[f64]) -> Result<f64> {
    let g = agg.gradient(x);
    let v = linear_minimizer(shape, &g)?;
    Ok(dot(&g, &sub(x, &v)).max(0.0))
}

/// Minimizes an aggregate over the body.
pub fn minimize_aggregate(shape: Shape<'_>, agg: &Aggregate) -> Result<Comparator> {
    let (point, method) = if agg.quad <= 0.0 {
        (linear_minimizer(shape, &agg.linear)?, ComparatorMethod::LinearMinimization)
    } else {
        let target: Vec<f64> = agg.linear.iter().map(|b| -b / (2.0 * agg.quad)).collect();
        match project(shape, &target) {
            Ok(p) => (p, ComparatorMethod::Projection),
            Err(Error::Unsupported(_)) => (conditional_gradient(shape, agg)?, ComparatorMethod::ConditionalGradient),
            Err(e) => return Err(e),
        }
    };
    let gap = fw_gap(shape, agg, &point)?;
    Ok(Comparator { value: agg.value(&point), point, gap, method })
}

fn conditional_gradient(shape: Shape<'_>, agg: &Aggregate) -> Result<Vec<f64>> {
    let mut x = linear_minimizer(shape, &agg.linear)?;
    for _ in 0..FW_ITERATIONS {
        let g = agg.gradient(&x);
        let v = linear_minimizer(shape, &g)?;
        let dir = sub(&v, &x);
        let gap = -dot(&g, &dir);
        if gap <= 1e-15 * (1.0 + agg.value(&x).abs()) {
            break;
        }
        // exact line search on the quadratic
        let curv = 2.0 * agg.quad * dot(&dir, &dir);
        let step = if curv > 0.0 { (gap / curv).min(1.0) } else { 1.0 };
        x.iter_mut().zip(&dir).for_each(|(xi, d)| *xi += step * d);
    }
    Ok(x)
}

/// Best fixed point for `losses`; the value is the direct sum of the losses
/// at the returned point.
pub fn offline_comparator(body: &dyn ConvexBody, losses: &[LossFunction]) -> Result<Comparator> {
    let agg = Aggregate::of(body.dim(), losses);
    let mut c = minimize_aggregate(body.shape(), &agg)?;
    c.value = losses.iter().map(|f| f.value(&c.point)).sum();
    Ok(c)
}
