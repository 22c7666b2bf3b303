//! Running configured experiments and writing their artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::baseline::ProjectedOgd;
use super::comparator::{offline_comparator, Comparator};
use super::config::{AlgorithmKind, ExperimentConfig};
use super::losses::{generate_losses, GeneratedLosses};
use super::regret::{dyadic_regrets, interval_regret, interval_regret_scan, slope_fit, IntervalRegret, LossPrefix, ScanResult, SlopeFit};
use crate::error::{Error, Result};
use crate::grad::{EstimatorFlags, EstimatorKind};
use crate::learner::{Learner, LearnerConfig, OnlinePlayer, RoundRecord};
use crate::meta::{Eflh, Flh, MetaConfig};
use crate::oracle::{ConvexBody, Oracle};

pub const SUMMARY_VERSION: u32 = 1;
pub const CSV_HEADER: &str = "t,player_loss,cum_loss,oracle_calls_round,estimator_events";
pub const CSV_FILE: &str = "rounds.csv";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub degenerate: u64,
    pub tie: u64,
    pub fallback: u64,
}

impl EventCounts {
    fn add(&mut self, f: &EstimatorFlags) {
        self.degenerate += f.degenerate as u64;
        self.tie += f.tie as u64;
        self.fallback += f.fallback as u64;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub version: u32,
    pub name: String,
    pub config_hash: String,
    pub seed: u64,
    pub horizon: u64,
    pub algorithm: AlgorithmKind,
    pub estimator: EstimatorKind,
    pub lipschitz: f64,
    pub lipschitz_on_body: f64,
    pub strong_convexity: f64,
    pub cumulative_loss: f64,
    pub comparator: Comparator,
    pub cumulative_regret: f64,
    pub worst_interval: ScanResult,
    pub segment_regrets: Vec<IntervalRegret>,
    pub total_oracle_calls: u64,
    pub max_round_calls: u64,
    pub estimator_events: EventCounts,
    pub max_lazy_norm: f64,
    pub max_experts: usize,
    pub eflh_factor_range: Option<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct RegretReport {
    pub summary: Summary,
    pub records: Vec<RoundRecord>,
    pub losses: GeneratedLosses,
    pub prefix: LossPrefix,
    pub body: Arc<dyn ConvexBody>,
}

impl RegretReport {
    pub fn dyadic_regrets(&self) -> Result<Vec<IntervalRegret>> {
        dyadic_regrets(self.body.as_ref(), &self.prefix)
    }

    pub fn interval(&self, s: usize, e: usize) -> Result<IntervalRegret> {
        interval_regret(self.body.as_ref(), &self.prefix, s, e)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * self.records.len() + 64);
        out.push_str(CSV_HEADER);
        out.push('\n');
        let mut cum = 0.0;
        for r in &self.records {
            cum += r.loss;
            let _ = writeln!(out, "{},{},{},{},{}", r.t, r.loss, cum, r.calls, events_label(&r.flags));
        }
        out
    }
}

fn events_label(f: &EstimatorFlags) -> String {
    let mut parts = Vec::new();
    if f.degenerate {
        parts.push("degenerate");
    }
    if f.tie {
        parts.push("tie");
    }
    if f.fallback {
        parts.push("fallback");
    }
    if parts.is_empty() {
        "none".into()
    } else {
        parts.join("|")
    }
}

#[allow(clippy::large_enum_variant)]
enum Player {
    Single(Learner),
    Flh(Flh),
    Eflh(Eflh),
    Baseline(ProjectedOgd),
}

impl Player {
    fn get(&mut self) -> &mut dyn OnlinePlayer {
        match self {
            Self::Single(p) => p,
            Self::Flh(p) => p,
            Self::Eflh(p) => p,
            Self::Baseline(p) => p,
        }
    }
}

fn build_player(cfg: &ExperimentConfig, body: Arc<dyn ConvexBody>, gen: &GeneratedLosses) -> Result<Player> {
    let oracle = Oracle::new(body.clone());
    let meta = || MetaConfig {
        horizon: cfg.horizon,
        lipschitz: gen.lipschitz,
        strong_convexity: gen.strong_convexity,
        estimator: cfg.estimator,
        seed: cfg.seed,
        epsilon: cfg.epsilon,
        // plays stay in K, so the weights only need constants over K
        loss_scale: cfg.loss_scale.or(Some(1.0 / (gen.lipschitz_on_body * body.diameter()))),
        exp_concavity: Some(gen.strong_convexity / gen.lipschitz_on_body.powi(2)),
    };
    Ok(match cfg.algorithm {
        AlgorithmKind::Algorithm1 => {
            let lc = LearnerConfig::new(cfg.horizon, gen.lipschitz, cfg.schedule, cfg.estimator)
                .with_strong_convexity(gen.strong_convexity)
                .with_seed(cfg.seed, 0);
            Player::Single(Learner::new(oracle, lc)?)
        }
        AlgorithmKind::Flh => Player::Flh(Flh::new(oracle, meta())?),
        AlgorithmKind::Eflh => Player::Eflh(Eflh::new(oracle, meta())?),
        AlgorithmKind::BaselineProjectedOgd => Player::Baseline(ProjectedOgd::new(
            body,
            cfg.horizon,
            cfg.schedule,
            gen.lipschitz,
            gen.strong_convexity,
        )?),
    })
}

/// Runs the configured algorithm and computes every regret statistic,
/// without touching the filesystem.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RegretReport> {
    cfg.validate()?;
    let body = cfg.body.build()?;
    let gen = generate_losses(cfg, body.as_ref())?;
    let mut player = build_player(cfg, body.clone(), &gen)?;
    let records = gen
        .losses
        .iter()
        .map(|f| player.get().step(f))
        .collect::<Result<Vec<_>>>()?;
    let eflh_factor_range = match &player {
        Player::Eflh(e) => Some(e.factor_range()),
        _ => None,
    };

    let player_losses: Vec<f64> = records.iter().map(|r| r.loss).collect();
    let cumulative_loss: f64 = player_losses.iter().sum();
    let comparator = offline_comparator(body.as_ref(), &gen.losses)?;
    let prefix = LossPrefix::new(body.dim(), &gen.losses, &player_losses)?;
    let worst_interval = interval_regret_scan(body.as_ref(), &prefix, cfg.full_interval_scan)?;
    let segment_regrets = gen
        .segments
        .iter()
        .map(|&(s, e)| interval_regret(body.as_ref(), &prefix, s as usize, e as usize))
        .collect::<Result<Vec<_>>>()?;
    let mut events = EventCounts::default();
    records.iter().for_each(|r| events.add(&r.flags));

    let summary = Summary {
        version: SUMMARY_VERSION,
        name: cfg.name.clone(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        horizon: cfg.horizon,
        algorithm: cfg.algorithm,
        estimator: cfg.estimator,
        lipschitz: gen.lipschitz,
        lipschitz_on_body: gen.lipschitz_on_body,
        strong_convexity: gen.strong_convexity,
        cumulative_loss,
        cumulative_regret: cumulative_loss - comparator.value,
        comparator,
        worst_interval,
        segment_regrets,
        total_oracle_calls: records.iter().map(|r| r.calls).sum(),
        max_round_calls: records.iter().map(|r| r.calls).max().unwrap_or(0),
        estimator_events: events,
        max_lazy_norm: records.iter().map(|r| r.lazy_norm).fold(0.0, f64::max),
        max_experts: records.iter().map(|r| r.experts).max().unwrap_or(0),
        eflh_factor_range,
    };
    Ok(RegretReport { summary, records, losses: gen, prefix, body })
}

/// Writes `rounds.csv` and `summary.json` into `dir`. Files already written
/// are removed if a later write fails.
pub fn write_outputs(report: &RegretReport, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let csv = dir.join(CSV_FILE);
    let json = dir.join(SUMMARY_FILE);
    let result = (|| -> Result<()> {
        fs::write(&csv, report.to_csv())?;
        let mut text = serde_json::to_string_pretty(&report.summary)?;
        text.push('\n');
        fs::write(&json, text)?;
        Ok(())
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&csv);
        let _ = fs::remove_file(&json);
        return Err(e);
    }
    Ok((csv, json))
}

pub fn run_to_dir(cfg: &ExperimentConfig, dir: &Path) -> Result<RegretReport> {
    let report = run_experiment(cfg)?;
    write_outputs(&report, dir)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub horizon: u64,
    pub cumulative_regret: f64,
    pub worst_interval_regret: f64,
    pub mean_round_calls: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    /// Fit of cumulative regret against the horizon; needs four horizons
    /// with enough positive regrets.
    pub fit: Option<SlopeFit>,
    /// Same fit for the worst interval regret.
    pub interval_fit: Option<SlopeFit>,
}

fn try_fit(points: &[SweepPoint], pick: impl Fn(&SweepPoint) -> f64) -> Option<SlopeFit> {
    if points.len() < 4 {
        return None;
    }
    let pts: Vec<(f64, f64)> = points.iter().map(|p| (p.horizon as f64, pick(p))).collect();
    match slope_fit(&pts) {
        Ok(fit) => Some(fit),
        Err(e) => {
            log::warn!("sweep fit skipped: {e}");
            None
        }
    }
}

/// Runs one experiment per horizon in parallel. With `out`, each run writes
/// into `out/T<horizon>/`.
pub fn sweep(cfg: &ExperimentConfig, horizons: &[u64], out: Option<&Path>) -> Result<SweepReport> {
    if horizons.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one horizon".into()));
    }
    let points = horizons
        .par_iter()
        .map(|&h| {
            let mut c = cfg.clone();
            c.horizon = h;
            let report = match out {
                Some(dir) => run_to_dir(&c, &dir.join(format!("T{h}")))?,
                None => run_experiment(&c)?,
            };
            let s = &report.summary;
            Ok(SweepPoint {
                horizon: h,
                cumulative_regret: s.cumulative_regret,
                worst_interval_regret: s.worst_interval.worst.regret,
                mean_round_calls: s.total_oracle_calls as f64 / h as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = try_fit(&points, |p| p.cumulative_regret);
    let interval_fit = try_fit(&points, |p| p.worst_interval_regret);
    let report = SweepReport { points, fit, interval_fit };
    if let Some(dir) = out {
        fs::write(dir.join("sweep.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    }
    Ok(report)
}
