//! Minkowski gauge and Minkowski projection by bisection on membership queries.
//!
//! The floored gauge is `gamma(x) = inf{c >= 1 : x/c in K}` and the projection
//! is `x / gamma(x)`. Both are computed by bisecting the segment `[0, x]`: the
//! inner endpoint is always a certified member, the outer endpoint a certified
//! non-member (or `x` itself). The reported gauge comes from the outer
//! endpoint, so `gamma - tolerance <= gamma_reported <= gamma`.

use crate::error::{Error, Result};
use crate::linalg::{all_finite, norm, scale};
use crate::loss::LossFunction;
use crate::oracle::{ConvexBody, Oracle};

/// Which quantity the bisection tolerance applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Accuracy {
    /// Stop once the gauge value is bracketed to within the tolerance.
    Gauge,
    /// Stop once the projection point is bracketed to within the tolerance.
    Projection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaugeEvaluation {
    pub gamma: f64,
    /// `x / gamma`
    pub projection: Vec<f64>,
    /// Inner bracket endpoint; always passed a membership query.
    pub inner: Vec<f64>,
    pub calls_used: u64,
    pub tolerance: f64,
    pub accuracy: Accuracy,
    /// False only if floating-point resolution stopped the bisection early.
    pub converged: bool,
}

impl GaugeEvaluation {
    pub fn is_interior(&self) -> bool {
        self.gamma == 1.0 && self.calls_used == 1
    }
}

/// Call budget for gauge accuracy `delta` at a point of norm `x_norm`:
/// `ceil(log2(2 R^2 / (r^2 delta))) + 1` with `R = max(D, x_norm)`.
pub fn gauge_call_budget(body: &dyn ConvexBody, x_norm: f64, delta: f64) -> u64 {
    let reach = body.diameter().max(x_norm);
    let r = body.inner_radius();
    (2.0 * reach * reach / (r * r * delta)).log2().ceil().max(0.0) as u64 + 1
}

/// Call budget for projection accuracy `delta`:
/// `ceil(log2(R / delta)) + 1` with `R = max(2D, x_norm)`.
pub fn projection_call_budget(body: &dyn ConvexBody, x_norm: f64, delta: f64) -> u64 {
    let reach = (2.0 * body.diameter()).max(x_norm);
    (reach / delta).log2().ceil().max(0.0) as u64 + 1
}

fn check_tolerance(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidTolerance(delta));
    }
    Ok(())
}

/// Approximates `gamma(x)` to within `delta`.
pub fn gauge_bisect(oracle: &Oracle, x: &[f64], delta: f64) -> Result<GaugeEvaluation> {
    bisect(oracle, x, delta, Accuracy::Gauge)
}

/// Approximates the Minkowski projection `x / gamma(x)` to within `delta`.
pub fn minkowski_project(oracle: &Oracle, x: &[f64], delta: f64) -> Result<GaugeEvaluation> {
    bisect(oracle, x, delta, Accuracy::Projection)
}

pub fn bisect(oracle: &Oracle, x: &[f64], delta: f64, accuracy: Accuracy) -> Result<GaugeEvaluation> {
    check_tolerance(delta)?;
    if !all_finite(x) {
        return Err(Error::NonFinite("gauge argument"));
    }
    oracle.check_point(x)?;
    let start = oracle.calls();
    if oracle.query(x) {
        return Ok(GaugeEvaluation {
            gamma: 1.0,
            projection: x.to_vec(),
            inner: x.to_vec(),
            calls_used: 1,
            tolerance: delta,
            accuracy,
            converged: true,
        });
    }
    let len = norm(x);
    // bracket along the ray, as fractions of x
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut converged = true;
    loop {
        let done = match accuracy {
            Accuracy::Gauge => lo > 0.0 && 1.0 / lo - 1.0 / hi <= delta,
            Accuracy::Projection => (hi - lo) * len <= delta,
        };
        if done {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            converged = false;
            break;
        }
        if oracle.query(&scale(x, mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let gamma = 1.0 / hi;
    Ok(GaugeEvaluation {
        gamma,
        projection: x.iter().map(|v| v / gamma).collect(),
        inner: scale(x, lo),
        calls_used: oracle.calls() - start,
        tolerance: delta,
        accuracy,
        converged,
    })
}

/// `f_hat(x) = f(x) + 3 G D (gamma(x) - 1)`.
#[derive(Debug, Clone)]
pub struct RegularizedLoss<'a> {
    pub loss: &'a LossFunction,
    pub lipschitz: f64,
    pub diameter: f64,
    pub oracle: &'a Oracle,
    pub tolerance: f64,
}

impl<'a> RegularizedLoss<'a> {
    pub fn new(loss: &'a LossFunction, lipschitz: f64, oracle: &'a Oracle, tolerance: f64) -> Self {
        Self { loss, lipschitz, diameter: oracle.body().diameter(), oracle, tolerance }
    }

    pub fn penalty_weight(&self) -> f64 {
        3.0 * self.lipschitz * self.diameter
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        let g = gauge_bisect(self.oracle, x, self.tolerance)?;
        Ok(self.loss.value(x) + self.penalty_weight() * (g.gamma - 1.0))
    }
}
