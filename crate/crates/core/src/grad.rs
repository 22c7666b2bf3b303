//! Gradient estimators for the Minkowski gauge.
//!
//! All estimators spend one membership query at the input point first and
//! return the zero vector when it lies in the body, where the floored gauge is
//! constant.
//!
//! * finite differences on smooth boundaries, with a uniform error bound;
//! * a randomized single-coordinate estimator with unbiased-mean guarantees;
//! * face identification on polytopes, which reads the gradient off the
//!   active constraint at the projected point;
//! * finite differences on the log-sum-exp smoothing of a polytope.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauge::{gauge_bisect, gauge_call_budget, minkowski_project, projection_call_budget};
use crate::linalg::{dot, norm};
use crate::oracle::{ConvexBody, Oracle, Shape, SmoothedPolytope};

/// Smallest gauge tolerance requested from bisection. Below this the bracket
/// runs into `f64` resolution for gauges of moderate size.
pub const GAUGE_TOL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Randomized,
    FiniteDifference,
    PolytopeFace,
    SmoothedPolytope,
    Analytic,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EstimatorFlags {
    /// A finite-difference probe may have crossed into the body.
    pub degenerate: bool,
    /// Face identification hit a tie.
    pub tie: bool,
    /// Face identification gave up and fell back to the smoothed estimator.
    pub fallback: bool,
}

impl EstimatorFlags {
    pub fn any(&self) -> bool {
        self.degenerate || self.tie || self.fallback
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub vector: Vec<f64>,
    pub calls_used: u64,
    pub kind: EstimatorKind,
    /// Uniform bound on the distance to the true gradient, when known.
    pub error_bound: Option<f64>,
    pub flags: EstimatorFlags,
}

impl GradientEstimate {
    fn zero(dim: usize, calls_used: u64, kind: EstimatorKind) -> Self {
        Self {
            vector: vec![0.0; dim],
            calls_used,
            kind,
            error_bound: Some(0.0),
            flags: EstimatorFlags::default(),
        }
    }
}

/// Parameters of the coordinate-wise finite-difference estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdConfig {
    pub fd_step: f64,
    pub gauge_tol: f64,
    pub beta: f64,
}

impl FdConfig {
    pub fn new(fd_step: f64, gauge_tol: f64, beta: f64) -> Result<Self> {
        if !(fd_step > 0.0 && fd_step.is_finite()) {
            return Err(Error::InvalidParameter(format!("fd_step {fd_step}")));
        }
        if !(gauge_tol > 0.0 && gauge_tol < 1.0) {
            return Err(Error::InvalidTolerance(gauge_tol));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta {beta}")));
        }
        Ok(Self { fd_step, gauge_tol, beta })
    }

    /// `fd_step = 1/(sqrt(d) T^2.5)`, `gauge_tol = 1/(d T^5)`.
    pub fn for_horizon(dim: usize, horizon: u64, beta: f64) -> Self {
        let (d, t) = (dim as f64, horizon.max(1) as f64);
        Self::clamped(1.0 / (d.sqrt() * t.powf(2.5)), 1.0 / (d * t.powi(5)), beta)
    }

    /// `fd_step = 1/(sqrt(d) T^5.5)`, `gauge_tol = 1/(d T^11)`, for bodies
    /// smoothed at scale `a = T^3`.
    pub fn for_smoothed(dim: usize, horizon: u64, beta: f64) -> Self {
        let (d, t) = (dim as f64, horizon.max(1) as f64);
        Self::clamped(1.0 / (d.sqrt() * t.powf(5.5)), 1.0 / (d * t.powi(11)), beta)
    }

    // When the tolerance floor kicks in, the step is moved to the value that
    // balances truncation against gauge error, 2 sqrt(tol) / beta.
    fn clamped(fd_step: f64, gauge_tol: f64, beta: f64) -> Self {
        if gauge_tol >= GAUGE_TOL_FLOOR {
            return Self { fd_step, gauge_tol, beta };
        }
        let gauge_tol = GAUGE_TOL_FLOOR;
        let fd_step = fd_step.max(2.0 * gauge_tol.sqrt() / beta);
        Self { fd_step, gauge_tol, beta }
    }

    /// `sqrt(d) (fd_step beta^2 / 2 + 2 gauge_tol / fd_step)`
    pub fn error_bound(&self, dim: usize) -> f64 {
        (dim as f64).sqrt()
            * (self.fd_step * self.beta * self.beta / 2.0 + 2.0 * self.gauge_tol / self.fd_step)
    }
}

/// Membership-call budget for one finite-difference estimate.
pub fn fd_call_budget(body: &dyn ConvexBody, x_norm: f64, cfg: &FdConfig) -> u64 {
    (body.dim() as u64 + 1) * gauge_call_budget(body, x_norm + cfg.fd_step, cfg.gauge_tol)
}

/// `grad_i ~ (gamma(x + h e_i) - gamma(x)) / h`, reusing `gamma(x)` for every
/// coordinate.
pub fn estimate_grad_fd(oracle: &Oracle, x: &[f64], cfg: &FdConfig) -> Result<GradientEstimate> {
    fd_with_kind(oracle, x, cfg, EstimatorKind::FiniteDifference)
}

fn fd_with_kind(
    oracle: &Oracle,
    x: &[f64],
    cfg: &FdConfig,
    kind: EstimatorKind,
) -> Result<GradientEstimate> {
    let start = oracle.calls();
    let base = gauge_bisect(oracle, x, cfg.gauge_tol)?;
    let d = x.len();
    if base.is_interior() {
        return Ok(GradientEstimate::zero(d, oracle.calls() - start, kind));
    }
    let r = oracle.body().inner_radius();
    let mut flags = EstimatorFlags {
        degenerate: base.gamma < 1.0 + cfg.fd_step / r,
        ..Default::default()
    };
    let mut vector = Vec::with_capacity(d);
    let mut probe = x.to_vec();
    for i in 0..d {
        probe[i] += cfg.fd_step;
        let g = gauge_bisect(oracle, &probe, cfg.gauge_tol)?;
        probe[i] = x[i];
        if g.is_interior() {
            flags.degenerate = true;
        }
        vector.push((g.gamma - base.gamma) / cfg.fd_step);
    }
    Ok(GradientEstimate {
        vector,
        calls_used: oracle.calls() - start,
        kind,
        error_bound: Some(cfg.error_bound(d)),
        flags,
    })
}

/// Internal difference step of the randomized estimator, `sqrt(gauge_tol) r`.
pub fn randomized_step(gauge_tol: f64, inner_radius: f64) -> f64 {
    gauge_tol.sqrt() * inner_radius
}

pub fn randomized_call_budget(body: &dyn ConvexBody, x_norm: f64, gauge_tol: f64) -> u64 {
    let mu = randomized_step(gauge_tol, body.inner_radius());
    2 * gauge_call_budget(body, x_norm + mu, gauge_tol)
}

/// Single-coordinate estimator: picks `i` uniformly and returns
/// `d (gamma(x + mu e_i) - gamma(x)) / mu * e_i`. Its mean over `i` is the
/// full finite-difference gradient.
pub fn estimate_grad_randomized<R: Rng + ?Sized>(
    oracle: &Oracle,
    x: &[f64],
    gauge_tol: f64,
    rng: &mut R,
) -> Result<GradientEstimate> {
    let start = oracle.calls();
    let base = gauge_bisect(oracle, x, gauge_tol)?;
    let d = x.len();
    if base.is_interior() {
        return Ok(GradientEstimate::zero(d, oracle.calls() - start, EstimatorKind::Randomized));
    }
    let r = oracle.body().inner_radius();
    let mu = randomized_step(gauge_tol, r);
    let i = rng.random_range(0..d);
    let mut probe = x.to_vec();
    probe[i] += mu;
    let g = gauge_bisect(oracle, &probe, gauge_tol)?;
    let mut vector = vec![0.0; d];
    vector[i] = d as f64 * (g.gamma - base.gamma) / mu;
    Ok(GradientEstimate {
        vector,
        calls_used: oracle.calls() - start,
        kind: EstimatorKind::Randomized,
        error_bound: None,
        flags: EstimatorFlags { degenerate: g.is_interior(), ..Default::default() },
    })
}

/// Projection tolerance used by face identification, `1/T^4` (floored).
pub fn face_tolerance(horizon: u64) -> f64 {
    (1.0 / (horizon.max(2) as f64).powi(4)).max(GAUGE_TOL_FLOOR)
}

/// Perturbation radius used by face identification, `D/T^3`.
pub fn face_perturbation(diameter: f64, horizon: u64) -> f64 {
    diameter / (horizon.max(2) as f64).powi(3)
}

/// Membership-call budget for face identification, including one retry.
pub fn face_call_budget(body: &dyn ConvexBody, x_norm: f64, horizon: u64) -> u64 {
    let reach = x_norm + face_perturbation(body.diameter(), horizon);
    1 + 2 * projection_call_budget(body, reach, face_tolerance(horizon))
}

/// Reads the gradient off the active face at the Minkowski projection:
/// `alpha / (p^T alpha)`. The input is perturbed by a random vector of length
/// `D/T^3` when `perturb` is set so the projection avoids lower-dimensional
/// faces almost surely. On a tie the estimate is retried once with a fresh
/// perturbation; after that it falls back to finite differences on the
/// smoothed polytope at scale `T^3`.
pub fn estimate_grad_polytope_face<R: Rng + ?Sized>(
    oracle: &Oracle,
    x: &[f64],
    horizon: u64,
    perturb: bool,
    rng: &mut R,
) -> Result<GradientEstimate> {
    let poly = match oracle.body().shape() {
        Shape::Polytope(p) => p.clone(),
        _ => return Err(Error::Unsupported("face estimator needs a polytope body".into())),
    };
    let start = oracle.calls();
    let d = x.len();
    if oracle.contains(x)? {
        return Ok(GradientEstimate::zero(d, 1, EstimatorKind::PolytopeFace));
    }
    let tol = face_tolerance(horizon);
    let rho = face_perturbation(poly.diameter(), horizon);
    let r = poly.inner_radius();
    let attempts = if perturb { 2 } else { 1 };
    let mut flags = EstimatorFlags::default();
    for _ in 0..attempts {
        let point: Vec<f64> = if perturb {
            let u: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let n = norm(&u);
            x.iter().zip(&u).map(|(a, b)| a + rho * b / n).collect()
        } else {
            x.to_vec()
        };
        let proj = minkowski_project(oracle, &point, tol)?;
        if proj.is_interior() {
            return Ok(GradientEstimate::zero(d, oracle.calls() - start, EstimatorKind::PolytopeFace));
        }
        let face = oracle.active_face(&proj.projection)?;
        if face.tied {
            flags.tie = true;
            continue;
        }
        let normal = &poly.rows()[face.index].normal;
        let s = dot(&proj.projection, normal);
        return Ok(GradientEstimate {
            vector: normal.iter().map(|a| a / s).collect(),
            calls_used: oracle.calls() - start,
            kind: EstimatorKind::PolytopeFace,
            error_bound: Some(tol / (r * (r - tol))),
            flags,
        });
    }
    log::debug!("face estimator tied at {x:?}; falling back to smoothed finite differences");
    let a = (horizon.max(2) as f64).powi(3);
    let smoothed = SmoothedPolytope::new(poly, a)?;
    let beta = smoothed.smoothness().unwrap_or(1.0);
    let smoothed_oracle = oracle.rebind(Arc::new(smoothed));
    let cfg = FdConfig::for_smoothed(d, horizon, beta);
    let mut est = fd_with_kind(&smoothed_oracle, x, &cfg, EstimatorKind::PolytopeFace)?;
    flags.fallback = true;
    flags.degenerate = est.flags.degenerate;
    est.flags = flags;
    est.calls_used = oracle.calls() - start;
    Ok(est)
}

/// Finite differences on a smoothed polytope with the parameters of
/// [`FdConfig::for_smoothed`].
pub fn estimate_grad_smoothed_polytope(
    oracle: &Oracle,
    x: &[f64],
    horizon: u64,
) -> Result<GradientEstimate> {
    let body = oracle.body();
    if !matches!(body.shape(), Shape::Smoothed(_)) {
        return Err(Error::Unsupported("smoothed estimator needs a smoothed polytope".into()));
    }
    let cfg = FdConfig::for_smoothed(x.len(), horizon, body.smoothness().unwrap_or(1.0));
    fd_with_kind(oracle, x, &cfg, EstimatorKind::SmoothedPolytope)
}

/// Closed-form gauge gradient, for bodies that have one. Spends no queries.
pub fn analytic_gauge_grad(body: &dyn ConvexBody, x: &[f64]) -> Result<GradientEstimate> {
    if x.len() != body.dim() {
        return Err(Error::DimensionMismatch { expected: body.dim(), got: x.len() });
    }
    let vector = body
        .analytic_gauge_gradient(x)
        .ok_or_else(|| Error::Unsupported("body has no closed-form gauge gradient".into()))?;
    Ok(GradientEstimate {
        vector,
        calls_used: 0,
        kind: EstimatorKind::Analytic,
        error_bound: Some(0.0),
        flags: EstimatorFlags::default(),
    })
}

/// Estimator selection bound to a horizon, as used by the learner.
#[derive(Debug, Clone)]
pub struct GradientEstimator {
    kind: EstimatorKind,
    horizon: u64,
    smoothed: Option<Oracle>,
}

impl GradientEstimator {
    /// `oracle` is the learner's oracle; the smoothed estimator on a plain
    /// polytope builds `K_a` with `a = T^3` charged to the same counter.
    pub fn new(kind: EstimatorKind, horizon: u64, oracle: &Oracle) -> Result<Self> {
        let smoothed = match (kind, oracle.body().shape()) {
            (EstimatorKind::SmoothedPolytope, Shape::Polytope(p)) => {
                let a = (horizon.max(2) as f64).powi(3);
                Some(oracle.rebind(Arc::new(SmoothedPolytope::new(p.clone(), a)?)))
            }
            (EstimatorKind::SmoothedPolytope, Shape::Smoothed(_)) => None,
            (EstimatorKind::SmoothedPolytope, _) | (EstimatorKind::PolytopeFace, Shape::Ball(_))
            | (EstimatorKind::PolytopeFace, Shape::Ellipsoid(_))
            | (EstimatorKind::PolytopeFace, Shape::Smoothed(_)) => {
                return Err(Error::Unsupported(format!("{kind:?} estimator on this body")))
            }
            _ => None,
        };
        if kind == EstimatorKind::Analytic && oracle.body().analytic_gauge_gradient(&vec![0.0; oracle.dim()]).is_none() {
            return Err(Error::Unsupported("analytic estimator on this body".into()));
        }
        Ok(Self { kind, horizon, smoothed })
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    /// Gauge tolerance of the randomized estimator, `1/T^2`.
    pub fn randomized_tolerance(&self) -> f64 {
        (1.0 / (self.horizon.max(2) as f64).powi(2)).max(GAUGE_TOL_FLOOR)
    }

    pub fn fd_config(&self, body: &dyn ConvexBody) -> FdConfig {
        FdConfig::for_horizon(body.dim(), self.horizon, body.smoothness().unwrap_or(1.0))
    }

    /// Budget for one estimate at a point of the given norm.
    pub fn call_budget(&self, body: &dyn ConvexBody, x_norm: f64) -> u64 {
        match self.kind {
            EstimatorKind::Randomized => randomized_call_budget(body, x_norm, self.randomized_tolerance()),
            EstimatorKind::FiniteDifference => fd_call_budget(body, x_norm, &self.fd_config(body)),
            EstimatorKind::PolytopeFace => {
                let smoothed_fd = SmoothedPolytope::new(
                    match body.shape() {
                        Shape::Polytope(p) => p.clone(),
                        _ => return face_call_budget(body, x_norm, self.horizon),
                    },
                    (self.horizon.max(2) as f64).powi(3),
                )
                .map(|s| {
                    let cfg = FdConfig::for_smoothed(body.dim(), self.horizon, s.smoothness().unwrap_or(1.0));
                    fd_call_budget(&s, x_norm, &cfg)
                })
                .unwrap_or(0);
                face_call_budget(body, x_norm, self.horizon) + smoothed_fd
            }
            EstimatorKind::SmoothedPolytope => {
                let b: &dyn ConvexBody = match &self.smoothed {
                    Some(o) => o.body(),
                    None => body,
                };
                let cfg = FdConfig::for_smoothed(body.dim(), self.horizon, b.smoothness().unwrap_or(1.0));
                fd_call_budget(b, x_norm, &cfg)
            }
            EstimatorKind::Analytic => 0,
        }
    }

    pub fn estimate<R: Rng + ?Sized>(
        &self,
        oracle: &Oracle,
        x: &[f64],
        rng: &mut R,
    ) -> Result<GradientEstimate> {
        match self.kind {
            EstimatorKind::Randomized => {
                estimate_grad_randomized(oracle, x, self.randomized_tolerance(), rng)
            }
            EstimatorKind::FiniteDifference => {
                estimate_grad_fd(oracle, x, &self.fd_config(oracle.body()))
            }
            EstimatorKind::PolytopeFace => {
                estimate_grad_polytope_face(oracle, x, self.horizon, true, rng)
            }
            EstimatorKind::SmoothedPolytope => match &self.smoothed {
                Some(s) => estimate_grad_smoothed_polytope(s, x, self.horizon),
                None => estimate_grad_smoothed_polytope(oracle, x, self.horizon),
            },
            EstimatorKind::Analytic => analytic_gauge_grad(oracle.body(), x),
        }
    }
}
