//! Invariant checks run by `gaugeopt verify`. Each check is seeded and
//! returns a pass/fail row with a short detail string.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::comparator::offline_comparator;
use super::config::{AlgorithmKind, BodySpec, ExperimentConfig, LossFamily, SegmentSpec};
use super::run::run_experiment;
use crate::error::Result;
use crate::gauge::{gauge_bisect, gauge_call_budget};
use crate::grad::{analytic_gauge_grad, estimate_grad_fd, FdConfig};
use crate::learner::{lazy_iterate_bound, Schedule};
use crate::linalg::{dist, dot, norm};
use crate::meta::flh_working_set_size;
use crate::oracle::{Ball, ConvexBody, Ellipsoid, Oracle, Polytope, SmoothedPolytope};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, run: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match run() {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check { name, passed: false, detail: format!("error: {e}") },
    }
}

fn bodies() -> Vec<Arc<dyn ConvexBody>> {
    vec![
        Arc::new(Ball::unit(3)),
        Arc::new(Ellipsoid::new(vec![1.0, 4.0, 0.5]).expect("valid ellipsoid")),
        Arc::new(Polytope::cube(&[1.0, 0.5, 2.0]).expect("valid box")),
        Arc::new(Polytope::simplex(3, 2.0).expect("valid simplex")),
    ]
}

/// Point uniform in direction with norm uniform in `[0, reach)`.
fn sample(dim: usize, reach: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let n = norm(&v).max(1e-300);
    let s = reach * rng.random::<f64>() / n;
    v.into_iter().map(|x| x * s).collect()
}

fn gauge_accuracy(samples: usize) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let delta = 1e-6;
    let mut worst = 0.0f64;
    let mut over_budget = 0;
    for body in bodies() {
        let oracle = Oracle::new(body.clone());
        for _ in 0..samples {
            let x = sample(body.dim(), body.diameter(), &mut rng);
            let ev = gauge_bisect(&oracle, &x, delta)?;
            let exact = body.analytic_gauge(&x).expect("test bodies have closed forms");
            worst = worst.max((ev.gamma - exact).abs());
            if ev.calls_used > gauge_call_budget(body.as_ref(), norm(&x), delta) {
                over_budget += 1;
            }
        }
    }
    Ok((worst <= delta && over_budget == 0, format!("max error {worst:.2e}, {over_budget} over budget")))
}

fn gauge_shape(samples: usize) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let delta = 1e-9;
    let mut bad = 0;
    for body in bodies() {
        let oracle = Oracle::new(body.clone());
        let r = body.inner_radius();
        let reach = 2.0 * body.diameter();
        for _ in 0..samples {
            let x = sample(body.dim(), reach, &mut rng);
            let y = sample(body.dim(), reach, &mut rng);
            let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
            let gx = gauge_bisect(&oracle, &x, delta)?.gamma;
            let gy = gauge_bisect(&oracle, &y, delta)?.gamma;
            let gm = gauge_bisect(&oracle, &mid, delta)?.gamma;
            if gm > 0.5 * (gx + gy) + 2.0 * delta {
                bad += 1;
            }
            if (gx - gy).abs() > dist(&x, &y) / r + 2.0 * delta {
                bad += 1;
            }
            let ev = gauge_bisect(&oracle, &x, delta)?;
            if !body.is_member(&ev.inner) {
                bad += 1;
            }
        }
    }
    Ok((bad == 0, format!("{bad} convexity, Lipschitz or containment violations")))
}

fn smoothing_sandwich(samples: usize) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let a = 1000.0;
    let mut bad = 0;
    for d in [2usize, 5] {
        for base in [Polytope::cube(&vec![1.0; d])?, Polytope::simplex(d, 3.0)?] {
            let m = base.rows().len() as f64;
            let smooth = SmoothedPolytope::new(base.clone(), a)?;
            for _ in 0..samples {
                let x = sample(d, base.diameter(), &mut rng);
                let (h, ha) = (base.h(&x), smooth.h_smooth(&x));
                if ha < h || ha > h + m.ln() / a + 1e-12 {
                    bad += 1;
                }
                if smooth.is_member(&x) && !base.is_member(&x) {
                    bad += 1;
                }
            }
        }
    }
    Ok((bad == 0, format!("{bad} violations")))
}

fn estimator_accuracy(samples: usize) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut bad = 0;
    let mut euler = 0.0f64;
    for body in [bodies().remove(0), bodies().remove(1)] {
        let oracle = Oracle::new(body.clone());
        let cfg = FdConfig::for_horizon(body.dim(), 100, body.smoothness().unwrap_or(1.0));
        for _ in 0..samples {
            let mut x = sample(body.dim(), 2.0 * body.diameter(), &mut rng);
            if body.is_member(&x) {
                let g = body.analytic_gauge(&x).unwrap_or(1.0);
                x.iter_mut().for_each(|v| *v *= 1.5 / g.max(1e-3));
            }
            if body.is_member(&x) {
                continue;
            }
            let exact = analytic_gauge_grad(body.as_ref(), &x)?.vector;
            let est = estimate_grad_fd(&oracle, &x, &cfg)?;
            if dist(&est.vector, &exact) > est.error_bound.unwrap_or(0.0) {
                bad += 1;
            }
            let gamma = body.analytic_gauge(&x).expect("closed form");
            euler = euler.max((dot(&x, &exact) - gamma).abs());
        }
    }
    Ok((bad == 0 && euler <= 1e-6, format!("{bad} above error bound, Euler residual {euler:.1e}")))
}

fn learner_invariants() -> Result<(bool, String)> {
    let mut cfg = ExperimentConfig::negative_control(2000, 21);
    cfg.body = BodySpec::Ellipsoid { diag: vec![1.0, 4.0] };
    cfg.schedule = Schedule::AdaptiveSmooth;
    let report = run_experiment(&cfg)?;
    let body = &report.body;
    let infeasible = report.records.iter().filter(|r| !body.is_member(&r.played)).count();
    let over = report.records.iter().filter(|r| r.calls > r.budget).count();
    let bound = lazy_iterate_bound(body.inner_radius(), body.diameter());
    let lazy = report.summary.max_lazy_norm;
    let calls: u64 = report.records.iter().map(|r| r.calls).sum();
    let ok = infeasible == 0 && over == 0 && lazy <= bound && calls == report.summary.total_oracle_calls;
    Ok((ok, format!("{infeasible} infeasible, {over} over budget, lazy norm {lazy:.3} <= {bound:.3}")))
}

fn comparator_certificates() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut bad = 0;
    for body in bodies() {
        let mut cfg = ExperimentConfig::negative_control(300, 3);
        cfg.losses.family = LossFamily::Quadratic;
        cfg.losses.lipschitz = None;
        cfg.losses.noise = 0.4;
        cfg.losses.segments = vec![SegmentSpec { start: None, fraction: None, target: None }];
        cfg.body = BodySpec::Ball { dim: body.dim(), radius: 1.0 };
        let losses = super::losses::generate_losses(&cfg, body.as_ref())?.losses;
        let c = offline_comparator(body.as_ref(), &losses)?;
        let again: f64 = losses.iter().map(|f| f.value(&c.point)).sum();
        if again != c.value || !body.is_member(&c.point) {
            bad += 1;
        }
        for _ in 0..200 {
            let mut x = sample(body.dim(), body.diameter(), &mut rng);
            if !body.is_member(&x) {
                x.iter_mut().for_each(|v| *v = 0.0);
            }
            let v: f64 = losses.iter().map(|f| f.value(&x)).sum();
            if v < c.value - c.gap - 1e-9 {
                bad += 1;
            }
        }
    }
    Ok((bad == 0, format!("{bad} certificate violations")))
}

fn meta_invariants() -> Result<(bool, String)> {
    let over = (1..=100_000u64).filter(|&t| flh_working_set_size_fast(t) as f64 > 4.0 * (t as f64).log2() + 4.0).count();
    let mut cfg = ExperimentConfig::negative_control(1024, 4);
    cfg.losses.family = LossFamily::Quadratic;
    cfg.losses.lipschitz = None;
    cfg.algorithm = AlgorithmKind::Flh;
    cfg.schedule = Schedule::StronglyConvex;
    let flh = run_experiment(&cfg)?;
    let flh_bad = flh.records.iter().filter(|r| !flh.body.is_member(&r.played)).count();
    let mut cfg = ExperimentConfig::negative_control(1024, 4);
    cfg.algorithm = AlgorithmKind::Eflh;
    let eflh = run_experiment(&cfg)?;
    let eflh_bad = eflh.records.iter().filter(|r| !eflh.body.is_member(&r.played)).count();
    let (lo, hi) = eflh.summary.eflh_factor_range.unwrap_or((1.0, 1.0));
    let ok = over == 0 && flh_bad + eflh_bad == 0 && lo >= 0.5 && hi <= 1.5;
    Ok((ok, format!("working set over bound {over}x, infeasible plays {}, EFLH factors [{lo:.3}, {hi:.3}]", flh_bad + eflh_bad)))
}

/// Live-expert count, computed level by level instead of by scanning births.
fn flh_working_set_size_fast(t: u64) -> usize {
    if t <= 64 {
        return flh_working_set_size(t);
    }
    let mut n = 0;
    let mut k = 0;
    while (1u64 << k) <= t {
        let step = 1u64 << (k + 1);
        let life = (1u64 << (k + 2)) + 1;
        // births j = 2^k (mod 2^(k+1)) with t - life < j <= t
        let lo = t.saturating_sub(life - 1).max(1);
        let first = if lo <= 1 << k { 1 << k } else { (1 << k) + (lo - (1 << k)).div_ceil(step) * step };
        if first <= t {
            n += ((t - first) / step + 1) as usize;
        }
        k += 1;
    }
    n
}

fn baseline_sanity() -> Result<(bool, String)> {
    let mut cfg = ExperimentConfig::negative_control(10_000, 8);
    cfg.losses.segments.truncate(1);
    let ours = run_experiment(&cfg)?.summary.cumulative_regret;
    cfg.algorithm = AlgorithmKind::BaselineProjectedOgd;
    let base = run_experiment(&cfg)?.summary.cumulative_regret;
    let ratio = base / ours;
    Ok((ours > 0.0 && ratio <= 2.0, format!("baseline / gauge regret = {ratio:.3}")))
}

fn determinism() -> Result<(bool, String)> {
    let mut cfg = ExperimentConfig::negative_control(500, 77);
    cfg.estimator = crate::grad::EstimatorKind::Randomized;
    let a = run_experiment(&cfg)?.to_csv();
    let b = run_experiment(&cfg)?.to_csv();
    Ok((a == b, format!("{} bytes compared", a.len())))
}

/// Runs every check. `quick` shrinks the sample counts.
pub fn run_all(quick: bool) -> Vec<Check> {
    let n = if quick { 100 } else { 1000 };
    vec![
        check("gauge accuracy and call budget", || gauge_accuracy(n)),
        check("gauge convexity, Lipschitz, containment", || gauge_shape(n)),
        check("polytope smoothing sandwich", || smoothing_sandwich(10 * n)),
        check("fd estimator vs analytic gradient", || estimator_accuracy(n / 5)),
        check("learner feasibility, budget, lazy bound", learner_invariants),
        check("comparator certificates", comparator_certificates),
        check("meta working set, feasibility, EFLH factors", meta_invariants),
        check("baseline sanity", baseline_sanity),
        check("determinism", determinism),
    ]
}
