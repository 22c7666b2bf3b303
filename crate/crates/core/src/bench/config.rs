//! Experiment configuration, read from JSON.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grad::EstimatorKind;
use crate::learner::Schedule;
use crate::oracle::{Ball, ConvexBody, Ellipsoid, Polytope};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BodySpec {
    Ball {
        dim: usize,
        #[serde(default = "one")]
        radius: f64,
    },
    Ellipsoid {
        diag: Vec<f64>,
    },
    Box {
        half_widths: Vec<f64>,
    },
    Simplex {
        dim: usize,
        #[serde(default = "one")]
        scale: f64,
    },
    /// Rows `a^T x + b <= 0`; normals need not be unit length.
    Polytope {
        rows: Vec<(Vec<f64>, f64)>,
        #[serde(default)]
        diameter: Option<f64>,
    },
}

fn one() -> f64 {
    1.0
}

impl BodySpec {
    pub fn build(&self) -> Result<Arc<dyn ConvexBody>> {
        Ok(match self {
            Self::Ball { dim, radius } => Arc::new(Ball::new(*dim, *radius)?),
            Self::Ellipsoid { diag } => Arc::new(Ellipsoid::new(diag.clone())?),
            Self::Box { half_widths } => Arc::new(Polytope::cube(half_widths)?),
            Self::Simplex { dim, scale } => Arc::new(Polytope::simplex(*dim, *scale)?),
            Self::Polytope { rows, diameter } => Arc::new(Polytope::from_unnormalized(rows.clone(), *diameter)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossFamily {
    Linear,
    Quadratic,
}

/// One stretch of rounds sharing a gradient (linear) or centre (quadratic).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    /// First round, 1-based. Exactly one of `start` and `fraction` is set,
    /// except for the first segment which may omit both.
    #[serde(default)]
    pub start: Option<u64>,
    /// First round as a fraction of the horizon, in `[0, 1)`.
    #[serde(default)]
    pub fraction: Option<f64>,
    /// Gradient or centre; drawn from the loss stream when absent.
    #[serde(default)]
    pub target: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSpec {
    pub family: LossFamily,
    /// Bound `G` on loss gradients over the body. Derived when absent.
    #[serde(default)]
    pub lipschitz: Option<f64>,
    #[serde(default = "one")]
    pub strong_convexity: f64,
    /// Radius of the per-round perturbation added to each segment target.
    #[serde(default)]
    pub noise: f64,
    /// Linear offset; defaults to `G D`, the smallest that keeps losses
    /// non-negative on the body.
    #[serde(default)]
    pub offset: Option<f64>,
    #[serde(default)]
    pub segments: Vec<SegmentSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmKind {
    Algorithm1,
    Flh,
    Eflh,
    BaselineProjectedOgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub body: BodySpec,
    pub losses: LossSpec,
    pub algorithm: AlgorithmKind,
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorKind,
    #[serde(default = "default_schedule")]
    pub schedule: Schedule,
    pub horizon: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub loss_scale: Option<f64>,
    #[serde(default)]
    pub full_interval_scan: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn default_estimator() -> EstimatorKind {
    EstimatorKind::FiniteDifference
}

fn default_schedule() -> Schedule {
    Schedule::Convex
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        self.segment_starts()?;
        if self.losses.noise < 0.0 || !self.losses.noise.is_finite() {
            return Err(Error::InvalidParameter(format!("noise {}", self.losses.noise)));
        }
        if self.algorithm == AlgorithmKind::Flh && self.losses.family != LossFamily::Quadratic {
            return Err(Error::Unsupported("FLH needs strongly convex (quadratic) losses".into()));
        }
        if self.full_interval_scan && self.horizon as usize > super::regret::FULL_SCAN_LIMIT {
            return Err(Error::InvalidParameter(format!(
                "full interval scan limited to T <= {}",
                super::regret::FULL_SCAN_LIMIT
            )));
        }
        Ok(())
    }

    /// 1-based first round of every segment, strictly increasing in `[1, T]`.
    pub fn segment_starts(&self) -> Result<Vec<u64>> {
        let t = self.horizon;
        if self.losses.segments.is_empty() {
            return Ok(vec![1]);
        }
        let mut starts = Vec::with_capacity(self.losses.segments.len());
        for (i, s) in self.losses.segments.iter().enumerate() {
            let start = match (s.start, s.fraction) {
                (Some(a), None) => a,
                (None, Some(f)) if (0.0..1.0).contains(&f) => (f * t as f64).floor() as u64 + 1,
                (None, None) if i == 0 => 1,
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "segment {i} needs exactly one of start and fraction in [0, 1)"
                    )))
                }
            };
            starts.push(start);
        }
        if starts[0] != 1 {
            return Err(Error::InvalidParameter("first segment must start at round 1".into()));
        }
        if starts.windows(2).any(|w| w[1] <= w[0]) || *starts.last().unwrap() > t {
            return Err(Error::InvalidParameter(format!(
                "segment starts {starts:?} must increase strictly within [1, {t}]"
            )));
        }
        Ok(starts)
    }

    /// Segments as inclusive `(start, end)` round ranges.
    pub fn segments(&self) -> Result<Vec<(u64, u64)>> {
        let starts = self.segment_starts()?;
        Ok(starts
            .iter()
            .enumerate()
            .map(|(i, &s)| (s, starts.get(i + 1).map_or(self.horizon, |n| n - 1)))
            .collect())
    }

    /// SHA-256 of the canonical JSON encoding, without the output path.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        let text = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Stationary OGD on a linear loss whose sign flips halfway, the
    /// non-adaptive reference for interval regret.
    pub fn negative_control(horizon: u64, seed: u64) -> Self {
        Self {
            name: "negative_control".into(),
            body: BodySpec::Ball { dim: 2, radius: 1.0 },
            losses: LossSpec {
                family: LossFamily::Linear,
                lipschitz: Some(1.0),
                strong_convexity: 1.0,
                noise: 0.0,
                offset: None,
                segments: vec![
                    SegmentSpec { start: None, fraction: None, target: Some(vec![1.0, 0.0]) },
                    SegmentSpec { start: None, fraction: Some(0.5), target: Some(vec![-1.0, 0.0]) },
                ],
            },
            algorithm: AlgorithmKind::Algorithm1,
            estimator: EstimatorKind::FiniteDifference,
            schedule: Schedule::Convex,
            horizon,
            seed,
            epsilon: None,
            loss_scale: None,
            full_interval_scan: false,
            output: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "body": {"kind": "ball", "dim": 2},
        "losses": {"family": "linear", "segments": [{"target": [1.0, 0.0]}]},
        "algorithm": "algorithm1",
        "horizon": 100
    }"#;

    #[test]
    fn parses_minimal_config() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.body, BodySpec::Ball { dim: 2, radius: 1.0 });
        assert_eq!(c.estimator, EstimatorKind::FiniteDifference);
        assert_eq!(c.segments().unwrap(), vec![(1, 100)]);
        let again = ExperimentConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.hash(), c.hash());
    }

    #[test]
    fn segment_boundaries() {
        let mut c = ExperimentConfig::negative_control(1000, 0);
        assert_eq!(c.segments().unwrap(), vec![(1, 500), (501, 1000)]);
        c.losses.segments[1] = SegmentSpec { start: Some(1), fraction: None, target: None };
        assert!(c.validate().is_err());
        c.losses.segments[1] = SegmentSpec { start: Some(1001), fraction: None, target: None };
        assert!(c.validate().is_err());
        c.losses.segments[1] = SegmentSpec { start: Some(7), fraction: Some(0.5), target: None };
        assert!(c.validate().is_err());
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::from_json(&MINIMAL.replace("100", "0")).is_err());
        assert!(ExperimentConfig::from_json(&MINIMAL.replace("algorithm1", "flh")).is_err());
        assert!(ExperimentConfig::from_json(&MINIMAL.replace("\"horizon\"", "\"bogus\": 1, \"horizon\"")).is_err());
    }

    #[test]
    fn hash_ignores_output() {
        let mut c = ExperimentConfig::negative_control(10, 1);
        let h = c.hash();
        c.output = Some("/tmp/x".into());
        assert_eq!(c.hash(), h);
        c.seed = 2;
        assert_ne!(c.hash(), h);
    }
}
