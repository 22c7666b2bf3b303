//! Regret over intervals and growth-rate fits.

use serde::{Deserialize, Serialize};

use super::comparator::{minimize_aggregate, Aggregate, Comparator};
use crate::error::{Error, Result};
use crate::loss::LossFunction;
use crate::oracle::ConvexBody;

/// Longest horizon allowed for the all-intervals scan.
pub const FULL_SCAN_LIMIT: usize = 2000;

/// Prefix sums of loss coefficients and player losses, so any interval's
/// aggregate costs `O(d)`.
#[derive(Debug, Clone)]
pub struct LossPrefix {
    dim: usize,
    quad: Vec<f64>,
    linear: Vec<f64>,
    constant: Vec<f64>,
    player: Vec<f64>,
}

impl LossPrefix {
    pub fn new(dim: usize, losses: &[LossFunction], player_losses: &[f64]) -> Result<Self> {
        if losses.len() != player_losses.len() {
            return Err(Error::InvalidParameter(format!(
                "{} losses but {} player losses",
                losses.len(),
                player_losses.len()
            )));
        }
        let n = losses.len();
        let mut quad = vec![0.0; n + 1];
        let mut linear = vec![0.0; (n + 1) * dim];
        let mut constant = vec![0.0; n + 1];
        let mut player = vec![0.0; n + 1];
        for (t, f) in losses.iter().enumerate() {
            if f.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: f.dim() });
            }
            let (a, b, c) = f.coefficients();
            quad[t + 1] = quad[t] + a;
            constant[t + 1] = constant[t] + c;
            player[t + 1] = player[t] + player_losses[t];
            for i in 0..dim {
                linear[(t + 1) * dim + i] = linear[t * dim + i] + b[i];
            }
        }
        Ok(Self { dim, quad, linear, constant, player })
    }

    pub fn len(&self) -> usize {
        self.quad.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Aggregate of rounds `s..=e` (1-based).
    pub fn aggregate(&self, s: usize, e: usize) -> Aggregate {
        let d = self.dim;
        Aggregate {
            quad: self.quad[e] - self.quad[s - 1],
            linear: (0..d).map(|i| self.linear[e * d + i] - self.linear[(s - 1) * d + i]).collect(),
            constant: self.constant[e] - self.constant[s - 1],
        }
    }

    pub fn player_loss(&self, s: usize, e: usize) -> f64 {
        self.player[e] - self.player[s - 1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRegret {
    pub start: usize,
    pub end: usize,
    pub regret: f64,
    pub player_loss: f64,
    pub comparator_value: f64,
    pub comparator_gap: f64,
}

impl IntervalRegret {
    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }
}

pub fn interval_regret(body: &dyn ConvexBody, prefix: &LossPrefix, s: usize, e: usize) -> Result<IntervalRegret> {
    if s == 0 || e < s || e > prefix.len() {
        return Err(Error::InvalidParameter(format!("interval [{s}, {e}] outside [1, {}]", prefix.len())));
    }
    let Comparator { value, gap, .. } = minimize_aggregate(body.shape(), &prefix.aggregate(s, e))?;
    let player_loss = prefix.player_loss(s, e);
    Ok(IntervalRegret { start: s, end: e, regret: player_loss - value, player_loss, comparator_value: value, comparator_gap: gap })
}

/// `[q 2^k + 1, (q+1) 2^k]` for every level that fits, then `[1, T]`.
pub fn dyadic_intervals(horizon: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut len = 1;
    while len <= horizon {
        let mut q = 0;
        while (q + 1) * len <= horizon {
            out.push((q * len + 1, (q + 1) * len));
            q += 1;
        }
        len *= 2;
    }
    if horizon > 0 && !out.contains(&(1, horizon)) {
        out.push((1, horizon));
    }
    out
}

pub fn dyadic_regrets(body: &dyn ConvexBody, prefix: &LossPrefix) -> Result<Vec<IntervalRegret>> {
    dyadic_intervals(prefix.len())
        .into_iter()
        .map(|(s, e)| interval_regret(body, prefix, s, e))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub worst: IntervalRegret,
    pub intervals: usize,
    pub full: bool,
}

/// Worst interval regret over the dyadic grid, or over every interval when
/// `full` is set (horizons up to [`FULL_SCAN_LIMIT`]).
pub fn interval_regret_scan(body: &dyn ConvexBody, prefix: &LossPrefix, full: bool) -> Result<ScanResult> {
    let t = prefix.len();
    if t == 0 {
        return Err(Error::InvalidParameter("empty trajectory".into()));
    }
    let intervals: Vec<(usize, usize)> = if full {
        if t > FULL_SCAN_LIMIT {
            return Err(Error::InvalidParameter(format!(
                "full interval scan limited to T <= {FULL_SCAN_LIMIT}, got {t}"
            )));
        }
        (1..=t).flat_map(|s| (s..=t).map(move |e| (s, e))).collect()
    } else {
        dyadic_intervals(t)
    };
    let mut worst: Option<IntervalRegret> = None;
    for &(s, e) in &intervals {
        let r = interval_regret(body, prefix, s, e)?;
        if worst.as_ref().is_none_or(|w| r.regret > w.regret) {
            worst = Some(r);
        }
    }
    Ok(ScanResult { worst: worst.expect("at least one interval"), intervals: intervals.len(), full })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn least_squares(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return Err(Error::InvalidParameter(format!("need at least two paired points, got {n}")));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("all abscissae equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(LineFit { slope, intercept, r_squared })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    /// `log(regret)` against `log(T)`.
    pub log_log: LineFit,
    /// `regret` against `log(T)`.
    pub log_linear: LineFit,
    pub excluded: usize,
}

/// Fits regret growth over a sweep of `(T, regret)` points.
pub fn slope_fit(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 4 {
        return Err(Error::InvalidParameter(format!("slope fit needs 4 horizons, got {}", points.len())));
    }
    let kept: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.1 > 0.0).collect();
    let excluded = points.len() - kept.len();
    if excluded > 0 {
        log::warn!("slope fit: excluded {excluded} non-positive regret values");
    }
    let lx: Vec<f64> = kept.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = kept.iter().map(|p| p.1.ln()).collect();
    let log_log = least_squares(&lx, &ly)?;
    let all_lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let all_y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let log_linear = least_squares(&all_lx, &all_y)?;
    Ok(SlopeFit { log_log, log_linear, excluded })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::Ball;

    #[test]
    fn dyadic_grid() {
        assert_eq!(dyadic_intervals(1), vec![(1, 1)]);
        assert_eq!(
            dyadic_intervals(5),
            vec![(1, 1), (2, 2), (3, 3), (4, 4), (5, 5), (1, 2), (3, 4), (1, 4), (1, 5)]
        );
        assert_eq!(dyadic_intervals(8).len(), 8 + 4 + 2 + 1);
    }

    #[test]
    fn single_round() {
        let f = LossFunction::Linear { gradient: vec![1.0, 0.0], offset: 2.0 };
        let prefix = LossPrefix::new(2, &[f], &[2.0]).unwrap();
        let scan = interval_regret_scan(&Ball::unit(2), &prefix, false).unwrap();
        assert_eq!((scan.worst.start, scan.worst.end), (1, 1));
        assert_eq!(scan.worst.regret, 1.0);
    }

    #[test]
    fn full_scan_limits() {
        let prefix = LossPrefix::new(1, &vec![LossFunction::zero(1); 2001], &vec![0.0; 2001]).unwrap();
        assert!(interval_regret_scan(&Ball::unit(1), &prefix, true).is_err());
        let prefix = LossPrefix::new(1, &vec![LossFunction::zero(1); 6], &[0.0; 6]).unwrap();
        assert_eq!(interval_regret_scan(&Ball::unit(1), &prefix, true).unwrap().intervals, 21);
    }

    #[test]
    fn prefix_matches_direct_sum() {
        let losses: Vec<LossFunction> = (0..9)
            .map(|i| LossFunction::Quadratic { strong_convexity: 1.0 + i as f64, center: vec![0.1 * i as f64, -0.2], offset: 0.5 })
            .collect();
        let prefix = LossPrefix::new(2, &losses, &[1.0; 9]).unwrap();
        let x = [0.3, -0.7];
        let direct: f64 = losses[2..7].iter().map(|f| f.value(&x)).sum();
        assert!((prefix.aggregate(3, 7).value(&x) - direct).abs() < 1e-12);
        assert_eq!(prefix.player_loss(3, 7), 5.0);
    }

    #[test]
    fn sqrt_growth_slope() {
        let pts: Vec<(f64, f64)> = [1e2, 1e3, 1e4, 1e5].iter().map(|&t: &f64| (t, 3.0 * t.sqrt())).collect();
        let fit = slope_fit(&pts).unwrap();
        assert!((fit.log_log.slope - 0.5).abs() < 1e-9);
    }

    #[test]
    fn log_growth_fit() {
        let pts: Vec<(f64, f64)> = [1e2, 1e3, 1e4, 1e5].iter().map(|&t: &f64| (t, 7.0 * t.ln())).collect();
        let fit = slope_fit(&pts).unwrap();
        assert!((fit.log_linear.r_squared - 1.0).abs() < 1e-12);
        assert!((fit.log_linear.slope - 7.0).abs() < 1e-9);
        assert!(fit.log_log.slope < 0.2);
    }

    #[test]
    fn slope_fit_needs_four_points() {
        assert!(slope_fit(&[(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)]).is_err());
    }
}
