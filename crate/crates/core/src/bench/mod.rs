//! Experiment harness: seeded adversaries, certified comparators, interval
//! regret, sweeps and the invariant checks behind `verify`.

pub mod baseline;
pub mod comparator;
pub mod config;
pub mod losses;
pub mod projection;
pub mod regret;
pub mod run;
pub mod verify;

pub use comparator::{offline_comparator, Comparator};
pub use config::{AlgorithmKind, BodySpec, ExperimentConfig, LossFamily, LossSpec, SegmentSpec};
pub use losses::{generate_losses, GeneratedLosses};
pub use regret::{interval_regret_scan, slope_fit, IntervalRegret, LossPrefix, SlopeFit};
pub use run::{run_experiment, run_to_dir, sweep, write_outputs, RegretReport, Summary, SweepReport};
