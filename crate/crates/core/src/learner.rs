//! Lazy online gradient descent on the gauge-regularized loss.
//!
//! Each round the learner plays `x_t`, observes `f_t`, and updates its
//! unconstrained iterate
//!
//! ```text
//! y_{t+1} = y_t - eta_t (grad f_t(y_t) + 3 G D grad gamma(y_t))
//! ```
//!
//! then pulls `y_{t+1}` back into the body along the ray through the origin.
//! The played point is the inner endpoint of that bisection, so it is always a
//! certified member of the body.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauge::{minkowski_project, projection_call_budget};
use crate::grad::{EstimatorFlags, EstimatorKind, GradientEstimator, GAUGE_TOL_FLOOR};
use crate::linalg::{all_finite, norm};
use crate::loss::LossFunction;
use crate::oracle::Oracle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// `r / (sqrt(T) G)`
    Convex,
    /// `1 / (lambda t)`
    StronglyConvex,
    /// `D / (sqrt(T) G)`
    AdaptiveSmooth,
}

/// Geometry and loss constants shared by the schedules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    pub lipschitz: f64,
    pub diameter: f64,
    pub inner_radius: f64,
    pub strong_convexity: f64,
}

pub fn step_size(schedule: Schedule, t: u64, horizon: u64, c: &Constants) -> Result<f64> {
    if t == 0 || t > horizon {
        return Err(Error::InvalidParameter(format!("round {t} outside [1, {horizon}]")));
    }
    let sqrt_t = (horizon as f64).sqrt();
    match schedule {
        Schedule::Convex => Ok(c.inner_radius / (sqrt_t * c.lipschitz)),
        Schedule::AdaptiveSmooth => Ok(c.diameter / (sqrt_t * c.lipschitz)),
        Schedule::StronglyConvex => {
            if c.strong_convexity <= 0.0 {
                return Err(Error::InvalidParameter(
                    "strongly convex schedule needs a positive modulus".into(),
                ));
            }
            Ok(1.0 / (c.strong_convexity * t as f64))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub horizon: u64,
    pub lipschitz: f64,
    pub strong_convexity: f64,
    pub schedule: Schedule,
    pub estimator: EstimatorKind,
    /// Constant step overriding the schedule.
    pub fixed_step: Option<f64>,
    /// Horizon that sets gauge accuracy `1/T^2` and estimator parameters;
    /// defaults to `horizon`.
    pub precision_horizon: Option<u64>,
    pub seed: u64,
    pub stream: u64,
}

impl LearnerConfig {
    pub fn new(horizon: u64, lipschitz: f64, schedule: Schedule, estimator: EstimatorKind) -> Self {
        Self {
            horizon,
            lipschitz,
            strong_convexity: 0.0,
            schedule,
            estimator,
            fixed_step: None,
            precision_horizon: None,
            seed: 0,
            stream: 0,
        }
    }

    pub fn with_strong_convexity(mut self, lambda: f64) -> Self {
        self.strong_convexity = lambda;
        self
    }

    pub fn with_seed(mut self, seed: u64, stream: u64) -> Self {
        self.seed = seed;
        self.stream = stream;
        self
    }

    fn precision(&self) -> u64 {
        self.precision_horizon.unwrap_or(self.horizon)
    }
}

/// Gauge accuracy `1/T^2`, floored for floating-point resolution.
pub fn round_tolerance(horizon: u64) -> f64 {
    (1.0 / (horizon.max(2) as f64).powi(2)).max(GAUGE_TOL_FLOOR)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: u64,
    pub played: Vec<f64>,
    pub loss: f64,
    pub calls: u64,
    pub row_evals: u64,
    /// Membership-call budget for this round.
    pub budget: u64,
    pub flags: EstimatorFlags,
    pub lazy_norm: f64,
    /// Live learner instances this round.
    pub experts: usize,
}

/// Anything that plays a point, then learns from the revealed loss.
pub trait OnlinePlayer: Send {
    fn dim(&self) -> usize;
    fn current_play(&self) -> Vec<f64>;
    fn step(&mut self, loss: &LossFunction) -> Result<RoundRecord>;
}

#[derive(Debug)]
pub struct Learner {
    oracle: Oracle,
    cfg: LearnerConfig,
    constants: Constants,
    estimator: GradientEstimator,
    tolerance: f64,
    y: Vec<f64>,
    x: Vec<f64>,
    t: u64,
    rng: ChaCha8Rng,
}

impl Learner {
    /// Starts at `y_1 = x_1 = 0`.
    pub fn new(oracle: Oracle, cfg: LearnerConfig) -> Result<Self> {
        let start = vec![0.0; oracle.dim()];
        Self::with_start(oracle, cfg, start)
    }

    pub fn with_start(oracle: Oracle, cfg: LearnerConfig, start: Vec<f64>) -> Result<Self> {
        if cfg.horizon == 0 {
            return Err(Error::InvalidParameter("learner horizon must be positive".into()));
        }
        if !(cfg.lipschitz > 0.0 && cfg.lipschitz.is_finite()) {
            return Err(Error::InvalidParameter(format!("lipschitz constant {}", cfg.lipschitz)));
        }
        if cfg.schedule == Schedule::StronglyConvex && cfg.fixed_step.is_none() && cfg.strong_convexity <= 0.0 {
            return Err(Error::InvalidParameter(
                "strongly convex schedule needs a positive modulus".into(),
            ));
        }
        if let Some(eta) = cfg.fixed_step {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::InvalidParameter(format!("fixed step {eta}")));
            }
        }
        oracle.check_point(&start)?;
        if !oracle.body().is_member(&start) {
            return Err(Error::InvalidParameter("starting point must lie in the body".into()));
        }
        let body = oracle.body();
        let constants = Constants {
            lipschitz: cfg.lipschitz,
            diameter: body.diameter(),
            inner_radius: body.inner_radius(),
            strong_convexity: cfg.strong_convexity,
        };
        let estimator = GradientEstimator::new(cfg.estimator, cfg.precision(), &oracle)?;
        let tolerance = round_tolerance(cfg.precision());
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(cfg.stream);
        Ok(Self {
            oracle,
            cfg,
            constants,
            estimator,
            tolerance,
            y: start.clone(),
            x: start,
            t: 1,
            rng,
        })
    }

    /// The point played in the current round.
    pub fn play(&self) -> &[f64] {
        &self.x
    }

    pub fn lazy_iterate(&self) -> &[f64] {
        &self.y
    }

    /// Index of the upcoming round (starts at 1).
    pub fn round(&self) -> u64 {
        self.t
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.cfg
    }

    pub fn oracle(&self) -> &Oracle {
        &self.oracle
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn penalty_weight(&self) -> f64 {
        3.0 * self.constants.lipschitz * self.constants.diameter
    }

    pub fn current_step(&self) -> Result<f64> {
        match self.cfg.fixed_step {
            Some(eta) => Ok(eta),
            None => step_size(self.cfg.schedule, self.t, self.cfg.horizon.max(self.t), &self.constants),
        }
    }

    /// Plays `x_t`, suffers `f_t(x_t)` and advances to round `t + 1`.
    pub fn update(&mut self, loss: &LossFunction) -> Result<RoundRecord> {
        if loss.dim() != self.y.len() {
            return Err(Error::DimensionMismatch { expected: self.y.len(), got: loss.dim() });
        }
        let played = self.x.clone();
        let suffered = loss.value(&played);
        let calls_before = self.oracle.calls();
        let rows_before = self.oracle.counter().row_evals();
        let body = self.oracle.body();
        let y_norm = norm(&self.y);

        let est = self.estimator.estimate(&self.oracle, &self.y, &mut self.rng)?;
        if !all_finite(&est.vector) {
            return Err(Error::Estimator("non-finite gauge gradient".into()));
        }
        let grad = loss.gradient(&self.y);
        if !all_finite(&grad) {
            return Err(Error::NonFinite("loss gradient"));
        }
        let eta = self.current_step()?;
        let w = self.penalty_weight();
        let next: Vec<f64> = self
            .y
            .iter()
            .zip(grad.iter().zip(&est.vector))
            .map(|(y, (g, s))| y - eta * (g + w * s))
            .collect();
        if !all_finite(&next) {
            return Err(Error::NonFinite("lazy iterate"));
        }
        let proj = minkowski_project(&self.oracle, &next, self.tolerance)?;
        if est.flags.any() {
            log::debug!("round {}: estimator flags {:?}", self.t, est.flags);
        }
        let budget = self.estimator.call_budget(body, y_norm)
            + projection_call_budget(body, norm(&next), self.tolerance);
        self.y = next;
        self.x = proj.inner;
        let record = RoundRecord {
            t: self.t,
            played,
            loss: suffered,
            calls: self.oracle.calls() - calls_before,
            row_evals: self.oracle.counter().row_evals() - rows_before,
            budget,
            flags: est.flags,
            lazy_norm: norm(&self.y),
            experts: 1,
        };
        self.t += 1;
        Ok(record)
    }
}

impl OnlinePlayer for Learner {
    fn dim(&self) -> usize {
        self.y.len()
    }

    fn current_play(&self) -> Vec<f64> {
        self.x.clone()
    }

    fn step(&mut self, loss: &LossFunction) -> Result<RoundRecord> {
        self.update(loss)
    }
}

/// Runs the learner over the whole loss sequence.
pub fn run_learner(oracle: Oracle, cfg: LearnerConfig, losses: &[LossFunction]) -> Result<Vec<RoundRecord>> {
    if losses.is_empty() {
        return Ok(Vec::new());
    }
    if losses.len() as u64 != cfg.horizon {
        return Err(Error::InvalidParameter(format!(
            "{} losses for horizon {}",
            losses.len(),
            cfg.horizon
        )));
    }
    let mut learner = Learner::new(oracle, cfg)?;
    losses.iter().map(|f| learner.update(f)).collect()
}

/// Bound on the lazy iterate under the adaptive-smooth schedule,
/// `(r/3)(2 + 3D/r)^2 + 3D + 2r`.
pub fn lazy_iterate_bound(inner_radius: f64, diameter: f64) -> f64 {
    let r = inner_radius;
    let q = 2.0 + 3.0 * diameter / r;
    r / 3.0 * q * q + 3.0 * diameter + 2.0 * r
}
