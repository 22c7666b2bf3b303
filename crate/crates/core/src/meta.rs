//! Adaptive-regret meta-learners over restarted learner instances.
//!
//! [`Flh`] targets strongly convex losses: experts are born every round,
//! aggregated with exponential weights and pruned to a logarithmic working
//! set. [`Eflh`] targets general convex losses with a fixed geometric family
//! of expert lifespans and a linear multiplicative update.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grad::{EstimatorFlags, EstimatorKind};
use crate::learner::{Learner, LearnerConfig, OnlinePlayer, RoundRecord, Schedule};
use crate::loss::LossFunction;
use crate::oracle::Oracle;

#[derive(Debug, Clone, PartialEq)]
pub struct MetaConfig {
    pub horizon: u64,
    pub lipschitz: f64,
    pub strong_convexity: f64,
    pub estimator: EstimatorKind,
    pub seed: u64,
    /// EFLH level growth; defaults to `1 / ln T`.
    pub epsilon: Option<f64>,
    /// EFLH loss rescaling; defaults to `1 / (G D)`.
    pub loss_scale: Option<f64>,
    /// FLH exp-concavity; defaults to `lambda / G^2`.
    pub exp_concavity: Option<f64>,
}

impl MetaConfig {
    pub fn new(horizon: u64, lipschitz: f64, estimator: EstimatorKind) -> Self {
        Self {
            horizon,
            lipschitz,
            strong_convexity: 0.0,
            estimator,
            seed: 0,
            epsilon: None,
            loss_scale: None,
            exp_concavity: None,
        }
    }
}

/// Which learner instance to build.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExpertSpec {
    /// Strongly convex schedule restarted at birth.
    Flh { lifetime: u64 },
    /// Fixed step `r / (2 sqrt(l) G)`, horizon `4 l`.
    Eflh { level_length: u64 },
}

pub fn eflh_step(inner_radius: f64, level_length: u64, lipschitz: f64) -> f64 {
    inner_radius / (2.0 * (level_length as f64).sqrt() * lipschitz)
}

pub fn build_expert(oracle: &Oracle, cfg: &MetaConfig, spec: ExpertSpec, stream: u64) -> Result<Learner> {
    let mut lc = match spec {
        ExpertSpec::Flh { lifetime } => {
            LearnerConfig::new(lifetime, cfg.lipschitz, Schedule::StronglyConvex, cfg.estimator)
                .with_strong_convexity(cfg.strong_convexity)
        }
        ExpertSpec::Eflh { level_length } => {
            if level_length == 0 {
                return Err(Error::InvalidParameter("level length must be positive".into()));
            }
            let mut lc = LearnerConfig::new(4 * level_length, cfg.lipschitz, Schedule::Convex, cfg.estimator);
            lc.fixed_step = Some(eflh_step(oracle.body().inner_radius(), level_length, cfg.lipschitz));
            lc
        }
    };
    lc.precision_horizon = Some(cfg.horizon.max(1));
    lc.seed = cfg.seed;
    lc.stream = stream;
    Learner::new(oracle.fork(), lc)
}

/// Rounds an FLH expert born at `j = q 2^k` (q odd) stays alive: `2^(k+2) + 1`.
pub fn flh_lifetime(birth: u64) -> u64 {
    assert!(birth > 0, "expert ids start at 1");
    (1u64 << (birth.trailing_zeros() + 2)) + 1
}

/// Number of FLH experts alive at round `t`.
pub fn flh_working_set_size(t: u64) -> usize {
    (1..=t).filter(|&j| t < j + flh_lifetime(j)).count()
}

#[derive(Debug)]
struct Expert {
    birth: u64,
    level: usize,
    expires: u64,
    weight: f64,
    learner: Learner,
}

fn step_experts(experts: &mut [Expert], loss: &LossFunction) -> Result<Vec<RoundRecord>> {
    experts.par_iter_mut().map(|e| e.learner.update(loss)).collect()
}

fn merge(records: &[RoundRecord], weights: &[f64], t: u64, played: Vec<f64>, loss: f64) -> RoundRecord {
    let mut flags = EstimatorFlags::default();
    for r in records {
        flags.degenerate |= r.flags.degenerate;
        flags.tie |= r.flags.tie;
        flags.fallback |= r.flags.fallback;
    }
    debug_assert_eq!(records.len(), weights.len());
    RoundRecord {
        t,
        played,
        loss,
        calls: records.iter().map(|r| r.calls).sum(),
        row_evals: records.iter().map(|r| r.row_evals).sum(),
        budget: records.iter().map(|r| r.budget).sum(),
        flags,
        lazy_norm: records.iter().map(|r| r.lazy_norm).fold(0.0, f64::max),
        experts: records.len(),
    }
}

fn weighted_play(experts: &[Expert], dim: usize, total: f64) -> Vec<f64> {
    let mut x = vec![0.0; dim];
    for e in experts {
        let p = e.weight / total;
        for (xi, ei) in x.iter_mut().zip(e.learner.play()) {
            *xi += p * ei;
        }
    }
    x
}

/// Follow-the-leading-history over strongly convex losses.
#[derive(Debug)]
pub struct Flh {
    oracle: Oracle,
    cfg: MetaConfig,
    alpha: f64,
    experts: Vec<Expert>,
    t: u64,
}

impl Flh {
    pub fn new(oracle: Oracle, cfg: MetaConfig) -> Result<Self> {
        if cfg.horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be positive".into()));
        }
        if cfg.strong_convexity.is_nan() || cfg.strong_convexity <= 0.0 {
            return Err(Error::InvalidParameter("FLH needs strongly convex losses".into()));
        }
        let alpha = match cfg.exp_concavity {
            Some(a) if a > 0.0 && a.is_finite() => a,
            Some(a) => return Err(Error::InvalidParameter(format!("exp-concavity {a}"))),
            None => cfg.strong_convexity / (cfg.lipschitz * cfg.lipschitz),
        };
        let mut flh = Self { oracle, cfg, alpha, experts: Vec::new(), t: 1 };
        flh.admit(1, 1.0)?;
        Ok(flh)
    }

    fn admit(&mut self, birth: u64, weight: f64) -> Result<()> {
        let lifetime = flh_lifetime(birth);
        let learner = build_expert(&self.oracle, &self.cfg, ExpertSpec::Flh { lifetime }, birth)?;
        self.experts.push(Expert { birth, level: 0, expires: birth + lifetime, weight, learner });
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn round(&self) -> u64 {
        self.t
    }

    /// `(birth, weight)` of every live expert, ordered by birth.
    pub fn weights(&self) -> Vec<(u64, f64)> {
        self.experts.iter().map(|e| (e.birth, e.weight)).collect()
    }

    pub fn update(&mut self, loss: &LossFunction) -> Result<RoundRecord> {
        if self.experts.is_empty() {
            return Err(Error::InvalidParameter("empty FLH working set".into()));
        }
        let t = self.t;
        let played = weighted_play(&self.experts, self.oracle.dim(), 1.0);
        let suffered = loss.value(&played);
        let expert_losses: Vec<f64> = self.experts.iter().map(|e| loss.value(e.learner.play())).collect();
        let weights: Vec<f64> = self.experts.iter().map(|e| e.weight).collect();
        let records = step_experts(&mut self.experts, loss)?;

        // exp(-alpha f) shifted by the minimum loss; the shift cancels on normalization
        let lo = expert_losses.iter().copied().fold(f64::INFINITY, f64::min);
        let mut total = 0.0;
        for (e, l) in self.experts.iter_mut().zip(&expert_losses) {
            e.weight *= (-self.alpha * (l - lo)).exp();
            total += e.weight;
        }
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::NonFinite("FLH weights"));
        }
        for e in &mut self.experts {
            e.weight /= total;
        }
        self.experts.retain(|e| t + 1 < e.expires);
        self.admit(t + 1, 1.0 / t as f64)?;
        let total: f64 = self.experts.iter().map(|e| e.weight).sum();
        for e in &mut self.experts {
            e.weight /= total;
        }
        self.t += 1;
        Ok(merge(&records, &weights, t, played, suffered))
    }
}

impl OnlinePlayer for Flh {
    fn dim(&self) -> usize {
        self.oracle.dim()
    }

    fn current_play(&self) -> Vec<f64> {
        weighted_play(&self.experts, self.oracle.dim(), 1.0)
    }

    fn step(&mut self, loss: &LossFunction) -> Result<RoundRecord> {
        self.update(loss)
    }
}

/// Level lengths `l_k = floor(2^((1+eps)^k) / 2) + 1` for every level with
/// `2^((1+eps)^k) / 2 <= T`.
pub fn eflh_levels(horizon: u64, epsilon: f64) -> Result<Vec<u64>> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon {epsilon}")));
    }
    let mut out = Vec::new();
    for k in 0.. {
        let half = 2f64.powf((1.0 + epsilon).powi(k)) / 2.0;
        if half > horizon as f64 {
            break;
        }
        out.push(half.floor() as u64 + 1);
    }
    Ok(out)
}

pub fn eflh_rate(horizon: u64, level_length: u64) -> f64 {
    let ln_t = (horizon.max(2) as f64).ln();
    (ln_t / level_length as f64).sqrt().min(0.5)
}

/// Whether round `t` spawns a level expert for round `t + 1`.
pub fn eflh_admits(t: u64, level_length: u64) -> bool {
    (t - 1).is_multiple_of(level_length)
}

/// Geometric-lifespan meta-learner for general convex losses.
#[derive(Debug)]
pub struct Eflh {
    oracle: Oracle,
    cfg: MetaConfig,
    levels: Vec<u64>,
    rates: Vec<f64>,
    scale: f64,
    experts: Vec<Expert>,
    t: u64,
    factor_range: (f64, f64),
}

impl Eflh {
    pub fn new(oracle: Oracle, cfg: MetaConfig) -> Result<Self> {
        if cfg.horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be positive".into()));
        }
        let epsilon = cfg.epsilon.unwrap_or(1.0 / (cfg.horizon.max(3) as f64).ln());
        let levels = eflh_levels(cfg.horizon, epsilon)?;
        let rates = levels.iter().map(|&l| eflh_rate(cfg.horizon, l)).collect();
        let scale = match cfg.loss_scale {
            Some(s) if s > 0.0 && s.is_finite() => s,
            Some(s) => return Err(Error::InvalidParameter(format!("loss scale {s}"))),
            None => 1.0 / (cfg.lipschitz * oracle.body().diameter()),
        };
        let mut eflh = Self {
            oracle,
            cfg,
            levels,
            rates,
            scale,
            experts: Vec::new(),
            t: 1,
            factor_range: (1.0, 1.0),
        };
        for k in 0..eflh.levels.len() {
            eflh.admit(1, k)?;
        }
        Ok(eflh)
    }

    fn admit(&mut self, birth: u64, level: usize) -> Result<()> {
        let l = self.levels[level];
        let stream = (birth << 8) | level as u64;
        let learner = build_expert(&self.oracle, &self.cfg, ExpertSpec::Eflh { level_length: l }, stream)?;
        self.experts.push(Expert {
            birth,
            level,
            expires: birth + 4 * l,
            weight: self.rates[level],
            learner,
        });
        Ok(())
    }

    pub fn levels(&self) -> &[u64] {
        &self.levels
    }

    pub fn loss_scale(&self) -> f64 {
        self.scale
    }

    pub fn round(&self) -> u64 {
        self.t
    }

    /// `(birth, level, weight)` of every live expert.
    pub fn experts(&self) -> Vec<(u64, usize, f64)> {
        self.experts.iter().map(|e| (e.birth, e.level, e.weight)).collect()
    }

    /// Smallest and largest multiplicative factor applied so far.
    pub fn factor_range(&self) -> (f64, f64) {
        self.factor_range
    }

    pub fn update(&mut self, loss: &LossFunction) -> Result<RoundRecord> {
        if self.experts.is_empty() {
            return Err(Error::InvalidParameter("empty EFLH working set".into()));
        }
        let t = self.t;
        let total: f64 = self.experts.iter().map(|e| e.weight).sum();
        let played = weighted_play(&self.experts, self.oracle.dim(), total);
        let suffered = loss.value(&played);
        let expert_losses: Vec<f64> = self.experts.iter().map(|e| loss.value(e.learner.play())).collect();
        let weights: Vec<f64> = self.experts.iter().map(|e| e.weight).collect();
        let records = step_experts(&mut self.experts, loss)?;

        for (e, l) in self.experts.iter_mut().zip(&expert_losses) {
            let factor = 1.0 + self.rates[e.level] * self.scale * (suffered - l);
            self.factor_range.0 = self.factor_range.0.min(factor);
            self.factor_range.1 = self.factor_range.1.max(factor);
            e.weight *= factor;
            if !(e.weight > 0.0 && e.weight.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "EFLH weight of expert ({}, {}) left (0, inf) at round {t}",
                    e.birth, e.level
                )));
            }
        }
        self.experts.retain(|e| t + 1 < e.expires);
        if t < self.cfg.horizon {
            for k in 0..self.levels.len() {
                if eflh_admits(t, self.levels[k]) {
                    self.admit(t + 1, k)?;
                }
            }
        }
        self.t += 1;
        Ok(merge(&records, &weights, t, played, suffered))
    }
}

impl OnlinePlayer for Eflh {
    fn dim(&self) -> usize {
        self.oracle.dim()
    }

    fn current_play(&self) -> Vec<f64> {
        let total: f64 = self.experts.iter().map(|e| e.weight).sum();
        weighted_play(&self.experts, self.oracle.dim(), total)
    }

    fn step(&mut self, loss: &LossFunction) -> Result<RoundRecord> {
        self.update(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{Ball, ConvexBody};
    use std::sync::Arc;

    fn oracle() -> Oracle {
        Oracle::new(Arc::new(Ball::unit(2)))
    }

    fn quad(c: [f64; 2]) -> LossFunction {
        LossFunction::Quadratic { strong_convexity: 1.0, center: c.to_vec(), offset: 0.0 }
    }

    fn flh_cfg(t: u64) -> MetaConfig {
        let mut c = MetaConfig::new(t, 4.0, EstimatorKind::FiniteDifference);
        c.strong_convexity = 1.0;
        c
    }

    #[test]
    fn lifetimes() {
        assert_eq!(flh_lifetime(12), 17);
        assert_eq!(flh_lifetime(8), 33);
        assert_eq!(flh_lifetime(1), 5);
    }

    #[test]
    fn working_set_is_logarithmic() {
        // incremental count of live experts, checked against 4 log2 t + 4
        let mut alive: Vec<u64> = Vec::new();
        for t in 1..=100_000u64 {
            alive.push(t + flh_lifetime(t));
            alive.retain(|&exp| t < exp);
            assert!(alive.len() as f64 <= 4.0 * (t as f64).log2() + 4.0, "t = {t}");
        }
        assert_eq!(flh_working_set_size(1), 1);
    }

    #[test]
    fn flh_first_round_is_expert_one() {
        let flh = Flh::new(oracle(), flh_cfg(16)).unwrap();
        assert_eq!(flh.weights(), vec![(1, 1.0)]);
        assert_eq!(flh.current_play(), flh.experts[0].learner.play().to_vec());
    }

    #[test]
    fn flh_weights_stay_normalized_and_feasible() {
        let t = 300;
        let mut flh = Flh::new(oracle(), flh_cfg(t)).unwrap();
        for s in 1..=t {
            let c = if s < 150 { [0.5, 0.0] } else { [-0.3, 0.6] };
            let rec = flh.update(&quad(c)).unwrap();
            assert!(Ball::unit(2).is_member(&rec.played));
            let w = flh.weights();
            let sum: f64 = w.iter().map(|p| p.1).sum();
            assert!((sum - 1.0).abs() <= 1e-9);
            assert!(w.iter().all(|p| p.1 >= 0.0));
            assert_eq!(w.len(), flh_working_set_size(s + 1));
        }
    }

    #[test]
    fn equal_losses_keep_equal_weights() {
        let mut flh = Flh::new(oracle(), flh_cfg(64)).unwrap();
        // zero losses leave every expert at the origin
        for _ in 0..3 {
            flh.update(&LossFunction::zero(2)).unwrap();
        }
        let w = flh.weights();
        let before: Vec<f64> = w.iter().map(|p| p.1).collect();
        flh.update(&LossFunction::zero(2)).unwrap();
        let after = flh.weights();
        // survivors keep their ratios
        let (a, b) = (after[0].1 / after[1].1, before[0] / before[1]);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn flh_expert_restarts_schedule() {
        let e = build_expert(&oracle(), &flh_cfg(100), ExpertSpec::Flh { lifetime: flh_lifetime(7) }, 7).unwrap();
        assert_eq!(e.round(), 1);
        assert!((e.current_step().unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eflh_expert_step() {
        assert_eq!(eflh_step(1.0, 1, 1.0), 0.5);
        let cfg = MetaConfig::new(100, 1.0, EstimatorKind::FiniteDifference);
        let e = build_expert(&oracle(), &cfg, ExpertSpec::Eflh { level_length: 1 }, 0).unwrap();
        assert_eq!(e.current_step().unwrap(), 0.5);
        assert_eq!(e.config().horizon, 4);
        assert!(build_expert(&oracle(), &cfg, ExpertSpec::Eflh { level_length: 0 }, 0).is_err());
        assert!(build_expert(&oracle(), &flh_cfg(10), ExpertSpec::Flh { lifetime: 0 }, 0).is_err());
    }

    #[test]
    fn eflh_lifespans() {
        let levels = eflh_levels(1000, 1.0).unwrap();
        let spans: Vec<u64> = levels.iter().map(|l| 4 * l).collect();
        assert_eq!(&spans[..3], &[8, 12, 36]);
    }

    #[test]
    fn eflh_birth_times_pinned() {
        let mut cfg = MetaConfig::new(64, 1.0, EstimatorKind::FiniteDifference);
        cfg.epsilon = Some(1.0);
        let mut eflh = Eflh::new(oracle(), cfg).unwrap();
        assert_eq!(eflh.levels(), &[2, 3, 9]);
        let mut births: Vec<Vec<u64>> = vec![Vec::new(); 3];
        for _ in 0..64 {
            for (b, k, _) in eflh.experts() {
                if !births[k].contains(&b) {
                    births[k].push(b);
                }
            }
            eflh.update(&LossFunction::zero(2)).unwrap();
        }
        let expect = |l: u64| -> Vec<u64> {
            let mut v = vec![1];
            v.extend((0..64u64).filter(|s| s % l == 0).map(|s| s + 2).filter(|&b| b <= 64));
            v
        };
        assert_eq!(births[0], expect(2));
        assert_eq!(births[2], vec![1, 2, 11, 20, 29, 38, 47, 56]);
        assert_eq!(births[1], expect(3));
    }

    #[test]
    fn eflh_identical_plays_keep_weights() {
        let mut eflh = Eflh::new(oracle(), MetaConfig::new(50, 1.0, EstimatorKind::FiniteDifference)).unwrap();
        let before = eflh.experts();
        let f = LossFunction::Linear { gradient: vec![0.0, 0.0], offset: 1.0 };
        eflh.update(&f).unwrap();
        for (b, a) in before.iter().zip(eflh.experts()) {
            if a.0 == 1 {
                assert_eq!(b.2, a.2);
            }
        }
        assert_eq!(eflh.factor_range(), (1.0, 1.0));
    }

    #[test]
    fn eflh_factors_bounded_and_play_feasible() {
        let t = 400;
        let mut eflh = Eflh::new(oracle(), MetaConfig::new(t, 1.0, EstimatorKind::FiniteDifference)).unwrap();
        for s in 0..t {
            let g = if s < 200 { vec![1.0, 0.0] } else { vec![-0.6, 0.8] };
            let rec = eflh.update(&LossFunction::Linear { gradient: g, offset: 1.0 }).unwrap();
            assert!(Ball::unit(2).is_member(&rec.played));
            assert!(rec.experts <= 5 * eflh.levels().len());
        }
        let (lo, hi) = eflh.factor_range();
        assert!(lo >= 0.5 && hi <= 1.5);
    }

    #[test]
    fn deterministic_weights() {
        let run = || {
            let mut cfg = flh_cfg(80);
            cfg.estimator = EstimatorKind::Randomized;
            cfg.seed = 9;
            let mut flh = Flh::new(oracle(), cfg).unwrap();
            let mut trace = Vec::new();
            for s in 0..80 {
                flh.update(&quad([0.4 * (s as f64 / 7.0).sin(), 0.2])).unwrap();
                trace.extend(flh.weights().into_iter().map(|w| w.1.to_bits()));
            }
            trace
        };
        assert_eq!(run(), run());
    }
}
