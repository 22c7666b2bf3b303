use std::sync::Arc;

use gaugeopt::bench::comparator::{minimize_aggregate, Aggregate};
use gaugeopt::bench::projection::project;
use gaugeopt::bench::regret::{dyadic_intervals, LossPrefix};
use gaugeopt::gauge::{gauge_bisect, gauge_call_budget, minkowski_project};
use gaugeopt::grad::analytic_gauge_grad;
use gaugeopt::linalg::{dist, dot, norm};
use gaugeopt::meta::flh_lifetime;
use gaugeopt::oracle::{Ball, ConvexBody, Ellipsoid, Oracle, Polytope, SmoothedPolytope};
use gaugeopt::LossFunction;
use proptest::prelude::*;

fn body(kind: u8, d: usize) -> Arc<dyn ConvexBody> {
    match kind % 4 {
        0 => Arc::new(Ball::new(d, 1.5).unwrap()),
        1 => Arc::new(Ellipsoid::new((0..d).map(|i| 0.5 + i as f64).collect()).unwrap()),
        2 => Arc::new(Polytope::cube(&(0..d).map(|i| 1.0 + 0.25 * i as f64).collect::<Vec<_>>()).unwrap()),
        _ => Arc::new(Polytope::simplex(d, 2.0).unwrap()),
    }
}

fn point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-6.0f64..6.0, d)
}

fn case() -> impl Strategy<Value = (u8, Vec<f64>, Vec<f64>)> {
    (0u8..4, 1usize..6).prop_flat_map(|(k, d)| (Just(k), point(d), point(d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn gauge_is_bracketed((kind, x, _) in case(), delta in prop::sample::select(vec![1e-3, 1e-6, 1e-9])) {
        let b = body(kind, x.len());
        let oracle = Oracle::new(b.clone());
        let ev = gauge_bisect(&oracle, &x, delta).unwrap();
        let exact = b.analytic_gauge(&x).unwrap();
        prop_assert!(ev.gamma <= exact + 1e-12);
        prop_assert!(ev.gamma >= exact - delta - 1e-12);
        prop_assert!(b.is_member(&ev.inner));
        prop_assert!(ev.calls_used <= gauge_call_budget(b.as_ref(), norm(&x), delta));
    }

    #[test]
    fn projection_lands_inside_and_close((kind, x, _) in case()) {
        let b = body(kind, x.len());
        let oracle = Oracle::new(b.clone());
        let ev = minkowski_project(&oracle, &x, 1e-8).unwrap();
        let exact = b.analytic_gauge(&x).unwrap();
        let target: Vec<f64> = x.iter().map(|v| v / exact).collect();
        prop_assert!(b.is_member(&ev.inner));
        prop_assert!(dist(&ev.inner, &target) <= 1e-8 + 1e-12 * norm(&x));
    }

    #[test]
    fn gauge_is_convex_and_lipschitz((kind, x, y) in case()) {
        let b = body(kind, x.len());
        let oracle = Oracle::new(b.clone());
        let delta = 1e-9;
        let g = |p: &[f64]| gauge_bisect(&oracle, p, delta).unwrap().gamma;
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, c)| 0.5 * (a + c)).collect();
        prop_assert!(g(&mid) <= 0.5 * (g(&x) + g(&y)) + 2.0 * delta);
        prop_assert!((g(&x) - g(&y)).abs() <= dist(&x, &y) / b.inner_radius() + 2.0 * delta);
    }

    #[test]
    fn gauge_is_homogeneous_outside((kind, x, _) in case(), c in 1.0f64..4.0) {
        let b = body(kind, x.len());
        let g = b.analytic_gauge(&x).unwrap();
        prop_assume!(g > 1.0);
        let cx: Vec<f64> = x.iter().map(|v| v * c).collect();
        let gc = b.analytic_gauge(&cx).unwrap();
        prop_assert!((gc - c * g).abs() <= 1e-9 * gc);
        // Euler identity
        let grad = analytic_gauge_grad(b.as_ref(), &x).unwrap().vector;
        prop_assert!((dot(&x, &grad) - g).abs() <= 1e-9 * g.max(1.0));
    }

    #[test]
    fn smoothing_sandwich(x in point(3), extra in 0usize..4, a in 50.0f64..5000.0) {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(extra as u64);
        let base = Polytope::random(3, extra, &mut rng).unwrap();
        let m = base.rows().len() as f64;
        let smooth = SmoothedPolytope::new(base.clone(), a).unwrap();
        let (h, ha) = (base.h(&x), smooth.h_smooth(&x));
        prop_assert!(h <= ha + 1e-12);
        prop_assert!(ha <= h + m.ln() / a + 1e-12);
        if smooth.is_member(&x) {
            prop_assert!(base.is_member(&x));
        }
    }

    #[test]
    fn euclidean_projection_is_nearest((kind, x, y) in case()) {
        let b = body(kind, x.len());
        let p = project(b.shape(), &x).unwrap();
        prop_assert!(b.is_member(&p));
        // idempotent and non-expansive
        let pp = project(b.shape(), &p).unwrap();
        prop_assert!(dist(&p, &pp) <= 1e-12);
        let q = project(b.shape(), &y).unwrap();
        prop_assert!(dist(&p, &q) <= dist(&x, &y) + 1e-9);
    }

    #[test]
    fn comparator_beats_feasible_points(
        (kind, c, probe) in case(),
        quad in prop::sample::select(vec![0.0, 0.3, 2.0]),
    ) {
        let b = body(kind, c.len());
        let agg = Aggregate { quad, linear: c.clone(), constant: 1.0 };
        let best = minimize_aggregate(b.shape(), &agg).unwrap();
        prop_assert!(b.is_member(&best.point));
        let feasible = project(b.shape(), &probe).unwrap();
        prop_assert!(agg.value(&feasible) >= best.value - best.gap - 1e-9);
        prop_assert!(best.gap <= 1e-6 * (1.0 + best.value.abs()));
    }

    #[test]
    fn prefix_aggregates_match(centres in prop::collection::vec(point(2), 1..40), s in 0usize..40, len in 1usize..40) {
        let losses: Vec<LossFunction> = centres
            .iter()
            .enumerate()
            .map(|(i, c)| if i % 2 == 0 {
                LossFunction::Quadratic { strong_convexity: 1.0, center: c.clone(), offset: 0.1 }
            } else {
                LossFunction::Linear { gradient: c.clone(), offset: 3.0 }
            })
            .collect();
        let n = losses.len();
        let start = s % n + 1;
        let end = (start + len - 1).min(n);
        let prefix = LossPrefix::new(2, &losses, &vec![0.5; n]).unwrap();
        let x = [0.25, -0.5];
        let direct: f64 = losses[start - 1..end].iter().map(|f| f.value(&x)).sum();
        prop_assert!((prefix.aggregate(start, end).value(&x) - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
    }

    #[test]
    fn dyadic_grid_is_well_formed(t in 1usize..3000) {
        let grid = dyadic_intervals(t);
        prop_assert!(grid.contains(&(1, t)));
        for &(s, e) in &grid {
            prop_assert!(1 <= s && s <= e && e <= t);
            let len = e - s + 1;
            if (s, e) != (1, t) {
                prop_assert!(len.is_power_of_two());
                prop_assert_eq!((s - 1) % len, 0);
            }
        }
    }

    #[test]
    fn flh_lifetime_formula(q in 0u64..1000, k in 0u32..20) {
        let j = (2 * q + 1) << k;
        prop_assert_eq!(flh_lifetime(j), (1u64 << (k + 2)) + 1);
    }
}
