//! Projection-free online convex optimization over convex bodies that are
//! only accessible through membership queries.
//!
//! The learner runs lazy online gradient descent on losses regularized by the
//! Minkowski gauge of the body and plays the radial pullback of its
//! unconstrained iterate. Gauge values and gradients are estimated from
//! membership queries alone. Adaptive-regret meta-learners (FLH, EFLH) use the
//! learner as their expert, and [`bench`] provides the experiment harness.

pub mod bench;
pub mod error;
pub mod gauge;
pub mod grad;
pub mod linalg;
pub mod learner;
pub mod loss;
pub mod meta;
pub mod oracle;

pub use error::{Error, Result};
pub use grad::{EstimatorKind, GradientEstimator};
pub use gauge::{gauge_bisect, minkowski_project, GaugeEvaluation, RegularizedLoss};
pub use learner::{Learner, LearnerConfig, OnlinePlayer, RoundRecord, Schedule};
pub use loss::LossFunction;
pub use meta::{Eflh, Flh, MetaConfig};
pub use oracle::{Ball, ConvexBody, Ellipsoid, Oracle, OracleCounter, Polytope, SmoothedPolytope};
