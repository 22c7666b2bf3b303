//! Online gradient descent with exact Euclidean projection, for reference.

use std::sync::Arc;

use super::projection::project;
use crate::error::{Error, Result};
use crate::grad::EstimatorFlags;
use crate::learner::{step_size, Constants, OnlinePlayer, RoundRecord, Schedule};
use crate::linalg::{all_finite, norm};
use crate::loss::LossFunction;
use crate::oracle::ConvexBody;

#[derive(Debug)]
pub struct ProjectedOgd {
    body: Arc<dyn ConvexBody>,
    schedule: Schedule,
    constants: Constants,
    horizon: u64,
    x: Vec<f64>,
    t: u64,
}

impl ProjectedOgd {
    pub fn new(body: Arc<dyn ConvexBody>, horizon: u64, schedule: Schedule, lipschitz: f64, strong_convexity: f64) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be positive".into()));
        }
        let constants = Constants {
            lipschitz,
            diameter: body.diameter(),
            inner_radius: body.inner_radius(),
            strong_convexity,
        };
        // fail early on bodies without a projection
        project(body.shape(), &vec![0.0; body.dim()])?;
        step_size(schedule, 1, horizon, &constants)?;
        let x = vec![0.0; body.dim()];
        Ok(Self { body, schedule, constants, horizon, x, t: 1 })
    }

    pub fn update(&mut self, loss: &LossFunction) -> Result<RoundRecord> {
        let played = self.x.clone();
        let suffered = loss.value(&played);
        let eta = step_size(self.schedule, self.t, self.horizon.max(self.t), &self.constants)?;
        let g = loss.gradient(&played);
        let next: Vec<f64> = played.iter().zip(&g).map(|(x, g)| x - eta * g).collect();
        if !all_finite(&next) {
            return Err(Error::NonFinite("baseline iterate"));
        }
        self.x = project(self.body.shape(), &next)?;
        let rec = RoundRecord {
            t: self.t,
            played,
            loss: suffered,
            calls: 0,
            row_evals: 0,
            budget: 0,
            flags: EstimatorFlags::default(),
            lazy_norm: norm(&next),
            experts: 1,
        };
        self.t += 1;
        Ok(rec)
    }
}

impl OnlinePlayer for ProjectedOgd {
    fn dim(&self) -> usize {
        self.x.len()
    }

    fn current_play(&self) -> Vec<f64> {
        self.x.clone()
    }

    fn step(&mut self, loss: &LossFunction) -> Result<RoundRecord> {
        self.update(loss)
    }
}
