//! Convex bodies exposed through membership queries.
//!
//! Every body carries the two geometry constants the algorithms rely on: the
//! radius `r` of an origin-centred ball it contains and its diameter `D`.
//! Membership is the closed condition, so boundary points are inside.
//!
//! Bodies are immutable. Query accounting lives in [`Oracle`], which wraps a
//! shared body together with its own [`OracleCounter`].

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{dist, dot, norm, solve};

/// Absolute slack used to decide that two constraint rows are both active.
pub const TIE_SLACK: f64 = 1e-9;

/// Borrowed view of a concrete body, for code that needs closed forms.
#[derive(Debug, Clone, Copy)]
pub enum Shape<'a> {
    Ball(&'a Ball),
    Ellipsoid(&'a Ellipsoid),
    Polytope(&'a Polytope),
    Smoothed(&'a SmoothedPolytope),
}

pub trait ConvexBody: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// Radius of an origin-centred ball contained in the body.
    fn inner_radius(&self) -> f64;

    fn diameter(&self) -> f64;

    /// Exact, uncounted membership test. Use [`Oracle::contains`] in algorithms.
    fn is_member(&self, x: &[f64]) -> bool;

    /// Constraint-row evaluations spent by one membership query.
    fn rows_per_query(&self) -> u64 {
        0
    }

    /// Closed-form floored gauge `max(1, inf{c > 0 : x/c ∈ K})`, where available.
    fn analytic_gauge(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    /// Closed-form gradient of the floored gauge (zero inside the body).
    fn analytic_gauge_gradient(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Constant `beta` such that `beta^2` bounds the Hessian norm of the gauge
    /// outside the body. `None` for non-smooth boundaries.
    fn smoothness(&self) -> Option<f64> {
        None
    }

    fn shape(&self) -> Shape<'_>;
}

/// Origin-centred Euclidean ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    dim: usize,
    radius: f64,
}

impl Ball {
    pub fn new(dim: usize, radius: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("ball dimension must be positive".into()));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("ball radius {radius}")));
        }
        Ok(Self { dim, radius })
    }

    pub fn unit(dim: usize) -> Self {
        Self { dim, radius: 1.0 }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl ConvexBody for Ball {
    fn dim(&self) -> usize {
        self.dim
    }
    fn inner_radius(&self) -> f64 {
        self.radius
    }
    fn diameter(&self) -> f64 {
        2.0 * self.radius
    }
    fn is_member(&self, x: &[f64]) -> bool {
        dot(x, x) <= self.radius * self.radius
    }
    fn analytic_gauge(&self, x: &[f64]) -> Option<f64> {
        Some((norm(x) / self.radius).max(1.0))
    }
    fn analytic_gauge_gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let n = norm(x);
        if n <= self.radius {
            return Some(vec![0.0; self.dim]);
        }
        Some(x.iter().map(|v| v / (self.radius * n)).collect())
    }
    fn smoothness(&self) -> Option<f64> {
        Some(1.0 / self.radius)
    }
    fn shape(&self) -> Shape<'_> {
        Shape::Ball(self)
    }
}

/// Axis-aligned ellipsoid `{x : sum_i a_i x_i^2 <= 1}` with all `a_i > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    diag: Vec<f64>,
}

impl Ellipsoid {
    pub fn new(diag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::InvalidParameter("ellipsoid needs at least one axis".into()));
        }
        if diag.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::InvalidParameter(format!("ellipsoid diagonal {diag:?}")));
        }
        Ok(Self { diag })
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// `x^T A x`
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.diag.iter().zip(x).map(|(a, v)| a * v * v).sum()
    }

    fn max_diag(&self) -> f64 {
        self.diag.iter().cloned().fold(f64::MIN, f64::max)
    }

    fn min_diag(&self) -> f64 {
        self.diag.iter().cloned().fold(f64::MAX, f64::min)
    }
}

impl ConvexBody for Ellipsoid {
    fn dim(&self) -> usize {
        self.diag.len()
    }
    fn inner_radius(&self) -> f64 {
        1.0 / self.max_diag().sqrt()
    }
    fn diameter(&self) -> f64 {
        2.0 / self.min_diag().sqrt()
    }
    fn is_member(&self, x: &[f64]) -> bool {
        self.quad_form(x) <= 1.0
    }
    fn analytic_gauge(&self, x: &[f64]) -> Option<f64> {
        Some(self.quad_form(x).sqrt().max(1.0))
    }
    fn analytic_gauge_gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let q = self.quad_form(x);
        if q <= 1.0 {
            return Some(vec![0.0; self.dim()]);
        }
        let s = q.sqrt();
        Some(self.diag.iter().zip(x).map(|(a, v)| a * v / s).collect())
    }
    fn smoothness(&self) -> Option<f64> {
        Some(self.max_diag().sqrt())
    }
    fn shape(&self) -> Shape<'_> {
        Shape::Ellipsoid(self)
    }
}

/// One affine constraint `normal^T x + offset <= 0` with a unit normal.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Row {
    pub fn eval(&self, x: &[f64]) -> f64 {
        dot(&self.normal, x) + self.offset
    }
}

/// Where a polytope came from; the comparator uses this to pick a closed form.
#[derive(Debug, Clone, PartialEq)]
pub enum PolytopeKind {
    /// `[-w_1, w_1] x ... x [-w_d, w_d]`
    Box { half_widths: Vec<f64> },
    /// Scaled probability simplex translated so its centroid is the origin.
    Simplex { scale: f64 },
    General,
}

/// Result of [`Polytope::active_face`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActiveFace {
    pub index: usize,
    pub value: f64,
    /// Another row attains the maximum within [`TIE_SLACK`].
    pub tied: bool,
}

/// Polytope `{x : h(x) <= 0}` with `h(x) = max_i (alpha_i^T x + b_i)`.
#[derive(Debug, Clone)]
pub struct Polytope {
    dim: usize,
    rows: Vec<Row>,
    inner_radius: f64,
    diameter: f64,
    vertices: Option<Vec<Vec<f64>>>,
    kind: PolytopeKind,
}

const MAX_VERTEX_SUBSETS: u64 = 200_000;

impl Polytope {
    /// Builds a polytope from unit-normal rows. The diameter is computed
    /// exactly by vertex enumeration when that is cheap; otherwise `diameter`
    /// must be supplied and is validated by boundary probing.
    pub fn new(rows: Vec<Row>, diameter: Option<f64>) -> Result<Self> {
        Self::with_kind(rows, diameter, PolytopeKind::General)
    }

    fn with_kind(rows: Vec<Row>, diameter: Option<f64>, kind: PolytopeKind) -> Result<Self> {
        let dim = rows
            .first()
            .map(|r| r.normal.len())
            .ok_or_else(|| Error::InvalidParameter("polytope needs at least one row".into()))?;
        for (i, row) in rows.iter().enumerate() {
            if row.normal.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: row.normal.len() });
            }
            if (norm(&row.normal) - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!("row {i} normal is not a unit vector")));
            }
            if !row.offset.is_finite() {
                return Err(Error::NonFinite("polytope offset"));
            }
        }
        // distance from the origin to face i is -b_i
        let inner_radius = rows.iter().map(|r| -r.offset).fold(f64::INFINITY, f64::min);
        if inner_radius <= 0.0 {
            return Err(Error::InvalidParameter(
                "origin must lie strictly inside the polytope".into(),
            ));
        }
        let vertices = if binomial(rows.len() as u64, dim as u64) <= MAX_VERTEX_SUBSETS {
            Some(enumerate_vertices(dim, &rows))
        } else {
            None
        };
        let mut poly = Self { dim, rows, inner_radius, diameter: 0.0, vertices, kind };
        poly.diameter = match (&poly.vertices, diameter) {
            (Some(v), given) => {
                if v.len() <= dim || !poly.is_bounded_probe() {
                    return Err(Error::InvalidParameter("polytope is unbounded".into()));
                }
                let exact = max_pairwise_distance(v);
                if let Some(g) = given {
                    if g + 1e-9 < exact {
                        return Err(Error::InvalidParameter(format!(
                            "supplied diameter {g} below vertex diameter {exact}"
                        )));
                    }
                }
                exact
            }
            (None, Some(g)) => {
                poly.diameter = g;
                poly.validate_diameter()?;
                g
            }
            (None, None) => {
                return Err(Error::InvalidParameter(
                    "diameter required for polytopes with many rows".into(),
                ))
            }
        };
        Ok(poly)
    }

    /// Same as [`Polytope::new`] but rescales each row to a unit normal.
    pub fn from_unnormalized(rows: Vec<(Vec<f64>, f64)>, diameter: Option<f64>) -> Result<Self> {
        let rows = rows
            .into_iter()
            .map(|(a, b)| {
                let n = norm(&a);
                if n == 0.0 || !n.is_finite() {
                    return Err(Error::InvalidParameter("zero constraint normal".into()));
                }
                Ok(Row { normal: a.iter().map(|v| v / n).collect(), offset: b / n })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(rows, diameter)
    }

    /// Axis-aligned box with the given half widths, `2d` rows.
    pub fn cube(half_widths: &[f64]) -> Result<Self> {
        let d = half_widths.len();
        if d == 0 || half_widths.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter(format!("box half widths {half_widths:?}")));
        }
        let mut rows = Vec::with_capacity(2 * d);
        for (i, w) in half_widths.iter().enumerate() {
            for sign in [1.0, -1.0] {
                let mut normal = vec![0.0; d];
                normal[i] = sign;
                rows.push(Row { normal, offset: -w });
            }
        }
        let inner_radius = half_widths.iter().cloned().fold(f64::INFINITY, f64::min);
        let diameter = 2.0 * norm(half_widths);
        let vertices = (d <= 12).then(|| {
            (0..1usize << d)
                .map(|mask| {
                    (0..d)
                        .map(|i| if mask >> i & 1 == 1 { half_widths[i] } else { -half_widths[i] })
                        .collect()
                })
                .collect()
        });
        Ok(Self {
            dim: d,
            rows,
            inner_radius,
            diameter,
            vertices,
            kind: PolytopeKind::Box { half_widths: half_widths.to_vec() },
        })
    }

    /// `scale * ({x >= 0, sum x <= 1} - c)` with `c` the centroid `1/(d+1)`.
    pub fn simplex(dim: usize, scale: f64) -> Result<Self> {
        if dim == 0 || !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("simplex dim {dim} scale {scale}")));
        }
        let d = dim as f64;
        let shift = scale / (d + 1.0);
        let mut rows = Vec::with_capacity(dim + 1);
        for i in 0..dim {
            let mut normal = vec![0.0; dim];
            normal[i] = -1.0;
            rows.push(Row { normal, offset: -shift });
        }
        let s = 1.0 / d.sqrt();
        rows.push(Row { normal: vec![s; dim], offset: -shift * s });
        let mut vertices = vec![vec![-shift; dim]];
        for i in 0..dim {
            let mut v = vec![-shift; dim];
            v[i] += scale;
            vertices.push(v);
        }
        let diameter = max_pairwise_distance(&vertices);
        let inner_radius = rows.iter().map(|r| -r.offset).fold(f64::INFINITY, f64::min);
        Ok(Self {
            dim,
            rows,
            inner_radius,
            diameter,
            vertices: Some(vertices),
            kind: PolytopeKind::Simplex { scale },
        })
    }

    /// Random polytope: the box `[-2, 2]^d` cut by `extra` random half-spaces
    /// at distance in `[0.5, 1.5)` from the origin.
    pub fn random<R: Rng + ?Sized>(dim: usize, extra: usize, rng: &mut R) -> Result<Self> {
        let mut rows = Polytope::cube(&vec![2.0; dim])?.rows;
        for _ in 0..extra {
            let mut a: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let n = norm(&a);
            a.iter_mut().for_each(|v| *v /= n);
            let b = -(0.5 + rng.random::<f64>());
            rows.push(Row { normal: a, offset: b });
        }
        Self::new(rows, None)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn vertices(&self) -> Option<&[Vec<f64>]> {
        self.vertices.as_deref()
    }

    pub fn kind(&self) -> &PolytopeKind {
        &self.kind
    }

    /// `h(x) = max_i (alpha_i^T x + b_i)`
    pub fn h(&self, x: &[f64]) -> f64 {
        self.rows.iter().map(|r| r.eval(x)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Row attaining `h(x)`; ties go to the lowest index and are flagged.
    pub fn active_face(&self, x: &[f64]) -> ActiveFace {
        let values: Vec<f64> = self.rows.iter().map(|r| r.eval(x)).collect();
        let mut best = 0;
        for (i, v) in values.iter().enumerate() {
            if *v > values[best] {
                best = i;
            }
        }
        let top = values[best];
        let tied = values
            .iter()
            .enumerate()
            .any(|(i, v)| i != best && (top - v).abs() <= TIE_SLACK);
        // lowest index among the near-maximizers
        let index = values.iter().position(|v| (top - v).abs() <= TIE_SLACK).unwrap_or(best);
        ActiveFace { index, value: top, tied }
    }

    fn is_bounded_probe(&self) -> bool {
        // bounded iff the normals positively span R^d; checking every axis
        // direction is enough to reject the common failure of a missing side.
        (0..self.dim).all(|i| {
            let pos = self.rows.iter().any(|r| r.normal[i] > 1e-12);
            let neg = self.rows.iter().any(|r| r.normal[i] < -1e-12);
            pos && neg
        })
    }

    /// Largest `t` with `t u` inside, for unit `u`; `None` when unbounded.
    fn extent(&self, u: &[f64]) -> Option<f64> {
        self.rows
            .iter()
            .filter_map(|r| {
                let s = dot(&r.normal, u);
                (s > 0.0).then(|| -r.offset / s)
            })
            .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.min(t))))
    }

    fn validate_diameter(&self) -> Result<()> {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
        let mut points = Vec::new();
        for _ in 0..256 {
            let mut u: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
            let n = norm(&u);
            u.iter_mut().for_each(|v| *v /= n);
            let t = self
                .extent(&u)
                .ok_or_else(|| Error::InvalidParameter("polytope is unbounded".into()))?;
            points.push(u.iter().map(|v| v * t).collect::<Vec<_>>());
        }
        let probe = max_pairwise_distance(&points);
        if probe > self.diameter * (1.0 + 1e-9) {
            return Err(Error::InvalidParameter(format!(
                "supplied diameter {} below sampled extent {probe}",
                self.diameter
            )));
        }
        Ok(())
    }
}

impl ConvexBody for Polytope {
    fn dim(&self) -> usize {
        self.dim
    }
    fn inner_radius(&self) -> f64 {
        self.inner_radius
    }
    fn diameter(&self) -> f64 {
        self.diameter
    }
    fn is_member(&self, x: &[f64]) -> bool {
        self.h(x) <= 0.0
    }
    fn rows_per_query(&self) -> u64 {
        self.rows.len() as u64
    }
    fn analytic_gauge(&self, x: &[f64]) -> Option<f64> {
        let g = self
            .rows
            .iter()
            .map(|r| dot(&r.normal, x) / -r.offset)
            .fold(f64::NEG_INFINITY, f64::max);
        Some(g.max(1.0))
    }
    fn analytic_gauge_gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let (best, val) = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (i, dot(&r.normal, x) / -r.offset))
            .fold((0, f64::NEG_INFINITY), |acc, c| if c.1 > acc.1 { c } else { acc });
        if val <= 1.0 {
            return Some(vec![0.0; self.dim]);
        }
        let row = &self.rows[best];
        Some(row.normal.iter().map(|a| a / -row.offset).collect())
    }
    fn shape(&self) -> Shape<'_> {
        Shape::Polytope(self)
    }
}

/// Inner smoothing `K_a = {x : h_a(x) <= 0}` of a polytope, where `h_a` is the
/// log-sum-exp surrogate of `h` at scale `a`.
#[derive(Debug, Clone)]
pub struct SmoothedPolytope {
    base: Polytope,
    scale: f64,
    inner_radius: f64,
}

impl SmoothedPolytope {
    pub fn new(base: Polytope, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("smoothing scale {scale}")));
        }
        // h <= -ln(m)/a on the ball of radius r - ln(m)/a
        let inner_radius = base.inner_radius - (base.rows.len() as f64).ln() / scale;
        if inner_radius <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "smoothing scale {scale} too small for inner radius {}",
                base.inner_radius
            )));
        }
        Ok(Self { base, scale, inner_radius })
    }

    pub fn base(&self) -> &Polytope {
        &self.base
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `h_a(x) = (1/a) ln sum_i exp(a (alpha_i^T x + b_i))`, evaluated with the
    /// row maximum factored out so it cannot overflow.
    pub fn h_smooth(&self, x: &[f64]) -> f64 {
        let values: Vec<f64> = self.base.rows.iter().map(|r| r.eval(x)).collect();
        let top = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = values.iter().map(|v| (self.scale * (v - top)).exp()).sum();
        top + sum.ln() / self.scale
    }
}

impl ConvexBody for SmoothedPolytope {
    fn dim(&self) -> usize {
        self.base.dim
    }
    fn inner_radius(&self) -> f64 {
        self.inner_radius
    }
    fn diameter(&self) -> f64 {
        self.base.diameter
    }
    fn is_member(&self, x: &[f64]) -> bool {
        self.h_smooth(x) <= 0.0
    }
    fn rows_per_query(&self) -> u64 {
        self.base.rows.len() as u64
    }
    fn smoothness(&self) -> Option<f64> {
        // the log-sum-exp Hessian is bounded by a; the gauge picks up D/r
        Some((self.scale * self.base.diameter / self.inner_radius).sqrt())
    }
    fn shape(&self) -> Shape<'_> {
        Shape::Smoothed(self)
    }
}

/// Membership-call and constraint-row counters. Resettable, otherwise
/// monotone; safe to bump from several threads.
#[derive(Debug, Default)]
pub struct OracleCounter {
    calls: AtomicU64,
    row_evals: AtomicU64,
}

impl OracleCounter {
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn row_evals(&self) -> u64 {
        self.row_evals.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::Relaxed);
        self.row_evals.store(0, Ordering::Relaxed);
    }

    fn record_call(&self, rows: u64) {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.row_evals.fetch_add(rows, Ordering::Relaxed);
    }

    fn record_rows(&self, rows: u64) {
        self.row_evals.fetch_add(rows, Ordering::Relaxed);
    }
}

/// A shared body plus the counter that every query through it is charged to.
#[derive(Debug, Clone)]
pub struct Oracle {
    body: Arc<dyn ConvexBody>,
    counter: Arc<OracleCounter>,
}

impl Oracle {
    pub fn new(body: Arc<dyn ConvexBody>) -> Self {
        Self { body, counter: Arc::new(OracleCounter::default()) }
    }

    /// Same body, fresh counter.
    pub fn fork(&self) -> Self {
        Self::new(Arc::clone(&self.body))
    }

    /// A different body charged to this oracle's counter.
    pub fn rebind(&self, body: Arc<dyn ConvexBody>) -> Self {
        Self { body, counter: Arc::clone(&self.counter) }
    }

    pub fn body(&self) -> &dyn ConvexBody {
        self.body.as_ref()
    }

    pub fn body_arc(&self) -> Arc<dyn ConvexBody> {
        Arc::clone(&self.body)
    }

    pub fn counter(&self) -> &OracleCounter {
        &self.counter
    }

    pub fn calls(&self) -> u64 {
        self.counter.calls()
    }

    pub fn dim(&self) -> usize {
        self.body.dim()
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.body.dim() {
            return Err(Error::DimensionMismatch { expected: self.body.dim(), got: x.len() });
        }
        if !crate::linalg::all_finite(x) {
            return Err(Error::NonFinite("query point"));
        }
        Ok(())
    }

    /// Counted membership query.
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        self.check_point(x)?;
        Ok(self.query(x))
    }

    /// Counted membership query without validation; callers check once up front.
    pub(crate) fn query(&self, x: &[f64]) -> bool {
        self.counter.record_call(self.body.rows_per_query());
        self.body.is_member(x)
    }

    /// Active face of the underlying polytope, charging `m` row evaluations.
    pub fn active_face(&self, x: &[f64]) -> Result<ActiveFace> {
        self.check_point(x)?;
        let poly = match self.body.shape() {
            Shape::Polytope(p) => p,
            Shape::Smoothed(s) => s.base(),
            _ => return Err(Error::Unsupported("active face needs a polytope body".into())),
        };
        self.counter.record_rows(poly.rows.len() as u64);
        Ok(poly.active_face(x))
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
        if acc > MAX_VERTEX_SUBSETS * 10 {
            return u64::MAX;
        }
    }
    acc
}

fn enumerate_vertices(dim: usize, rows: &[Row]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut idx: Vec<usize> = (0..dim).collect();
    let m = rows.len();
    if m < dim {
        return out;
    }
    'outer: loop {
        let mat: Vec<Vec<f64>> = idx.iter().map(|&i| rows[i].normal.clone()).collect();
        let rhs: Vec<f64> = idx.iter().map(|&i| -rows[i].offset).collect();
        if let Some(v) = solve(mat, rhs) {
            let feasible = rows.iter().all(|r| r.eval(&v) <= 1e-9);
            if feasible && !out.iter().any(|w| dist(w, &v) < 1e-9) {
                out.push(v);
            }
        }
        let mut i = dim;
        while i > 0 {
            i -= 1;
            if idx[i] < m - dim + i {
                idx[i] += 1;
                for j in i + 1..dim {
                    idx[j] = idx[j - 1] + 1;
                }
                continue 'outer;
            }
        }
        return out;
    }
}

fn max_pairwise_distance(points: &[Vec<f64>]) -> f64 {
    let mut best = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.max(dist(a, b));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn square() -> Polytope {
        Polytope::cube(&[1.0, 1.0]).unwrap()
    }

    #[test]
    fn ball_membership() {
        let o = Oracle::new(Arc::new(Ball::unit(2)));
        assert!(o.contains(&[0.5, 0.0]).unwrap());
        assert!(!o.contains(&[2.0, 0.0]).unwrap());
        assert_eq!(o.calls(), 2);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let o = Oracle::new(Arc::new(Ball::unit(2)));
        assert!(matches!(o.contains(&[0.5]), Err(Error::DimensionMismatch { .. })));
        assert_eq!(o.calls(), 0);
    }

    #[test]
    fn box_boundary_is_inside() {
        let o = Oracle::new(Arc::new(square()));
        assert!(o.contains(&[1.0, 1.0]).unwrap());
        assert_eq!(o.counter().row_evals(), 4);
    }

    #[test]
    fn h_on_square() {
        let p = square();
        assert_eq!(p.h(&[2.0, 0.3]), 1.0);
        assert_eq!(p.h(&[0.0, 0.0]), -1.0);
        assert_eq!(p.h(&[1.0, 0.0]), 0.0);
    }

    #[test]
    fn smoothed_h_closed_form() {
        let s = SmoothedPolytope::new(square(), 1000.0).unwrap();
        let expected = -1.0 + 4f64.ln() / 1000.0;
        assert!((s.h_smooth(&[0.0, 0.0]) - expected).abs() < 1e-12);
        assert!((expected - -0.998_613_7).abs() < 1e-7);
        let v = s.h_smooth(&[2.0, 0.3]);
        assert!((1.0..=1.0 + 4f64.ln() / 1000.0).contains(&v));
        // direct summation at a small scale
        let s1 = SmoothedPolytope::new(Polytope::cube(&[3.0, 3.0]).unwrap(), 1.0).unwrap();
        let x = [0.4, -0.7];
        let direct = s1.base().rows().iter().map(|r| r.eval(&x).exp()).sum::<f64>().ln();
        assert!((s1.h_smooth(&x) - direct).abs() < 1e-12);
    }

    #[test]
    fn smoothed_single_row_is_exact() {
        // one-row "polytope" is unbounded, so evaluate the surrogate directly
        let row = Row { normal: vec![1.0, 0.0], offset: -1.0 };
        let base = Polytope {
            dim: 2,
            rows: vec![row],
            inner_radius: 1.0,
            diameter: 1.0,
            vertices: None,
            kind: PolytopeKind::General,
        };
        let s = SmoothedPolytope::new(base, 7.0).unwrap();
        for x in [[0.3, 5.0], [-2.0, 1.0], [1.0, 0.0]] {
            assert_eq!(s.h_smooth(&x), s.base().h(&x));
        }
    }

    #[test]
    fn no_overflow_for_large_scale() {
        let s = SmoothedPolytope::new(square(), 1e12).unwrap();
        assert!(s.h_smooth(&[50.0, 3.0]).is_finite());
    }

    #[test]
    fn active_face_cases() {
        let p = square();
        let f = p.active_face(&[1.0, 0.15]);
        assert_eq!(p.rows()[f.index].normal, vec![1.0, 0.0]);
        assert!(!f.tied);
        let f = p.active_face(&[1.0, 1.0]);
        assert!(f.tied);
        assert_eq!(f.index, 0);
        let f = p.active_face(&[-1.0, 0.0]);
        assert_eq!(p.rows()[f.index].normal, vec![-1.0, 0.0]);
    }

    #[test]
    fn simplex_geometry() {
        let s = Polytope::simplex(3, 1.0).unwrap();
        assert!(s.is_member(&[0.0; 3]));
        let r = s.inner_radius();
        assert!((r - 1.0 / (4.0 * 3f64.sqrt())).abs() < 1e-12);
        assert!((s.diameter() - 2f64.sqrt()).abs() < 1e-12);
        for v in s.vertices().unwrap() {
            assert!(s.h(v).abs() < 1e-12);
        }
    }

    #[test]
    fn random_polytope_vertices_match_box_diameter_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = Polytope::random(2, 3, &mut rng).unwrap();
        assert!(p.diameter() <= 4.0 * 2f64.sqrt() + 1e-9);
        assert!(p.inner_radius() > 0.0);
        for v in p.vertices().unwrap() {
            assert!(p.h(v) <= 1e-9);
        }
    }

    #[test]
    fn generic_polytope_diameter_from_vertices() {
        let p = Polytope::new(square().rows().to_vec(), None).unwrap();
        assert!((p.diameter() - 8f64.sqrt()).abs() < 1e-12);
        assert!(Polytope::new(square().rows().to_vec(), Some(1.0)).is_err());
    }

    #[test]
    fn unbounded_rejected() {
        let rows = vec![Row { normal: vec![1.0, 0.0], offset: -1.0 }, Row { normal: vec![0.0, 1.0], offset: -1.0 }];
        assert!(Polytope::new(rows, None).is_err());
    }

    #[test]
    fn non_unit_normal_rejected() {
        let rows = vec![Row { normal: vec![2.0, 0.0], offset: -1.0 }];
        assert!(Polytope::new(rows, None).is_err());
    }

    #[test]
    fn ellipsoid_constants() {
        let e = Ellipsoid::new(vec![4.0, 1.0]).unwrap();
        assert_eq!(e.inner_radius(), 0.5);
        assert_eq!(e.diameter(), 2.0);
        assert!((e.analytic_gauge(&[1.0, 1.0]).unwrap() - 5f64.sqrt()).abs() < 1e-15);
    }
}
