//! Seeded loss sequences for experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::{ExperimentConfig, LossFamily};
use super::projection::max_norm;
use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::loss::LossFunction;
use crate::oracle::ConvexBody;

/// Stream of the loss adversary; learners use the low stream numbers.
pub const LOSS_STREAM: u64 = u64::MAX;

const CERT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedLosses {
    pub losses: Vec<LossFunction>,
    /// Certified gradient bound on the origin-centred ball of radius `2D`,
    /// which contains every lazy iterate the learners evaluate gradients at.
    pub lipschitz: f64,
    /// Gradient bound over the body itself.
    pub lipschitz_on_body: f64,
    pub strong_convexity: f64,
    pub segments: Vec<(u64, u64)>,
}

fn unit_vector(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

pub fn generate_losses(cfg: &ExperimentConfig, body: &dyn ConvexBody) -> Result<GeneratedLosses> {
    cfg.validate()?;
    let spec = &cfg.losses;
    let dim = body.dim();
    let diameter = body.diameter();
    let segments = cfg.segments()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(LOSS_STREAM);

    let lambda = spec.strong_convexity;
    if spec.family == LossFamily::Quadratic && !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("strong convexity {lambda}")));
    }
    let seg_specs: Vec<Option<&Vec<f64>>> = if spec.segments.is_empty() {
        vec![None]
    } else {
        spec.segments.iter().map(|s| s.target.as_ref()).collect()
    };
    let mut targets = Vec::with_capacity(segments.len());
    for t in seg_specs {
        let v = match t {
            Some(v) if v.len() != dim => return Err(Error::DimensionMismatch { expected: dim, got: v.len() }),
            Some(v) => v.clone(),
            None => {
                let u = unit_vector(dim, &mut rng);
                match spec.family {
                    LossFamily::Linear => {
                        let g = spec.lipschitz.unwrap_or(1.0) - spec.noise;
                        u.into_iter().map(|x| x * g).collect()
                    }
                    LossFamily::Quadratic => {
                        let rho = 0.75 * body.inner_radius() * rng.random::<f64>();
                        u.into_iter().map(|x| x * rho).collect()
                    }
                }
            }
        };
        targets.push(v);
    }

    let mut raw: Vec<Vec<f64>> = Vec::with_capacity(cfg.horizon as usize);
    for (seg, &(s, e)) in segments.iter().enumerate() {
        for _ in s..=e {
            let mut v = targets[seg].clone();
            if spec.noise > 0.0 {
                let u = unit_vector(dim, &mut rng);
                let r = spec.noise * rng.random::<f64>();
                v.iter_mut().zip(&u).for_each(|(a, b)| *a += r * b);
            }
            raw.push(v);
        }
    }

    let (losses, lipschitz) = match spec.family {
        LossFamily::Linear => {
            let observed = raw.iter().map(|g| norm(g)).fold(0.0, f64::max);
            let g = check_bound(spec.lipschitz, observed)?;
            let floor = g * diameter;
            let offset = match spec.offset {
                Some(c) if c + CERT_SLACK < floor => {
                    return Err(Error::InvalidParameter(format!(
                        "offset {c} below G D = {floor}; losses could go negative"
                    )))
                }
                Some(c) => c,
                None => floor,
            };
            let losses = raw.into_iter().map(|gradient| LossFunction::Linear { gradient, offset }).collect();
            (losses, g)
        }
        LossFamily::Quadratic => {
            let offset = spec.offset.unwrap_or(0.0);
            if offset < 0.0 {
                return Err(Error::InvalidParameter(format!("negative quadratic offset {offset}")));
            }
            let losses: Vec<LossFunction> = raw
                .into_iter()
                .map(|center| LossFunction::Quadratic { strong_convexity: lambda, center, offset })
                .collect();
            let observed = losses.iter().map(|f| f.lipschitz_on_ball(2.0 * diameter)).fold(0.0, f64::max);
            (losses, check_bound(spec.lipschitz, observed)?)
        }
    };
    let strong_convexity = if spec.family == LossFamily::Quadratic { lambda } else { 0.0 };
    // K lies in the origin-centred ball of radius D
    let reach = max_norm(body.shape()).unwrap_or(diameter);
    let lipschitz_on_body = losses.iter().map(|f| f.lipschitz_on_ball(reach)).fold(0.0, f64::max).min(lipschitz);
    Ok(GeneratedLosses {
        losses,
        lipschitz: lipschitz.max(f64::MIN_POSITIVE),
        lipschitz_on_body: lipschitz_on_body.max(f64::MIN_POSITIVE),
        strong_convexity,
        segments,
    })
}

fn check_bound(declared: Option<f64>, observed: f64) -> Result<f64> {
    match declared {
        Some(g) if observed > g * (1.0 + CERT_SLACK) => Err(Error::InvalidParameter(format!(
            "loss gradients reach {observed}, above the declared bound {g}"
        ))),
        Some(g) => Ok(g),
        None => Ok(observed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::config::{LossSpec, SegmentSpec};
    use crate::oracle::Ball;

    fn linear_cfg() -> ExperimentConfig {
        ExperimentConfig::negative_control(1000, 3)
    }

    #[test]
    fn nonnegative_linear() {
        let mut c = linear_cfg();
        c.losses.segments.truncate(1);
        let g = generate_losses(&c, &Ball::unit(2)).unwrap();
        assert_eq!(g.losses[0], LossFunction::Linear { gradient: vec![1.0, 0.0], offset: 2.0 });
        assert_eq!(g.losses[0].value(&[-1.0, 0.0]), 1.0);
    }

    #[test]
    fn piecewise_centres() {
        let mut c = linear_cfg();
        c.losses = LossSpec {
            family: LossFamily::Quadratic,
            lipschitz: None,
            strong_convexity: 1.0,
            noise: 0.0,
            offset: None,
            segments: vec![
                SegmentSpec { start: None, fraction: None, target: Some(vec![0.5, 0.0]) },
                SegmentSpec { start: Some(501), fraction: None, target: Some(vec![-0.5, 0.0]) },
            ],
        };
        let g = generate_losses(&c, &Ball::unit(2)).unwrap();
        assert_eq!(g.segments, vec![(1, 500), (501, 1000)]);
        let centre = |t: usize| match &g.losses[t] {
            LossFunction::Quadratic { center, .. } => center.clone(),
            _ => unreachable!(),
        };
        assert_eq!(centre(499), vec![0.5, 0.0]);
        assert_eq!(centre(500), vec![-0.5, 0.0]);
        // lambda (2D + |theta|) with D = 2, and lambda (1 + |theta|) on the body
        assert_eq!(g.lipschitz, 4.5);
        assert_eq!(g.lipschitz_on_body, 1.5);
    }

    #[test]
    fn seeded_and_noisy() {
        let mut c = linear_cfg();
        c.losses.segments = vec![];
        c.losses.noise = 0.1;
        let a = generate_losses(&c, &Ball::unit(2)).unwrap();
        let b = generate_losses(&c, &Ball::unit(2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.losses[0], a.losses[1]);
        assert!(a.lipschitz <= 1.0);
        c.seed += 1;
        assert_ne!(generate_losses(&c, &Ball::unit(2)).unwrap().losses, a.losses);
    }

    #[test]
    fn certification_errors() {
        let mut c = linear_cfg();
        c.losses.lipschitz = Some(0.5);
        assert!(generate_losses(&c, &Ball::unit(2)).is_err());
        let mut c = linear_cfg();
        c.losses.offset = Some(1.0);
        assert!(generate_losses(&c, &Ball::unit(2)).is_err());
    }
}
