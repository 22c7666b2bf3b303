//! Euclidean projections and exact linear minimization on the bodies the
//! harness can certify. None of this uses membership queries.

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::oracle::{ConvexBody, Ellipsoid, Polytope, PolytopeKind, Shape};

fn unsupported(what: &str) -> Error {
    Error::Unsupported(format!("no certified {what} for this body"))
}

/// Euclidean projection onto the body. Rounding can leave the result a few
/// ulps outside; it is then pulled toward the origin until it is a member.
pub fn project(shape: Shape<'_>, x: &[f64]) -> Result<Vec<f64>> {
    Ok(pull_inside(shape, project_raw(shape, x)?))
}

fn pull_inside(shape: Shape<'_>, mut p: Vec<f64>) -> Vec<f64> {
    let mut shrink = 1.0 - f64::EPSILON;
    while !is_member(shape, &p) {
        p.iter_mut().for_each(|v| *v *= shrink);
        shrink *= shrink;
    }
    p
}

fn is_member(shape: Shape<'_>, x: &[f64]) -> bool {
    match shape {
        Shape::Ball(b) => b.is_member(x),
        Shape::Ellipsoid(e) => e.is_member(x),
        Shape::Polytope(p) => p.is_member(x),
        Shape::Smoothed(s) => s.is_member(x),
    }
}

fn project_raw(shape: Shape<'_>, x: &[f64]) -> Result<Vec<f64>> {
    match shape {
        Shape::Ball(b) => {
            let n = norm(x);
            let r = b.radius();
            Ok(if n <= r { x.to_vec() } else { x.iter().map(|v| v * r / n).collect() })
        }
        Shape::Ellipsoid(e) => Ok(project_ellipsoid(e, x)),
        Shape::Polytope(p) => match p.kind() {
            PolytopeKind::Box { half_widths } => {
                Ok(x.iter().zip(half_widths).map(|(v, w)| v.clamp(-w, *w)).collect())
            }
            PolytopeKind::Simplex { scale } => Ok(project_simplex(*scale, x)),
            PolytopeKind::General => Err(unsupported("projection")),
        },
        Shape::Smoothed(_) => Err(unsupported("projection")),
    }
}

/// `max_{x in K} ||x||` when it has a closed form.
pub fn max_norm(shape: Shape<'_>) -> Option<f64> {
    match shape {
        Shape::Ball(b) => Some(b.radius()),
        Shape::Ellipsoid(e) => Some(1.0 / e.diag().iter().cloned().fold(f64::INFINITY, f64::min).sqrt()),
        Shape::Polytope(p) => match p.kind() {
            PolytopeKind::Box { half_widths } => Some(norm(half_widths)),
            _ => p.vertices().map(|v| v.iter().map(|x| norm(x)).fold(0.0, f64::max)),
        },
        Shape::Smoothed(_) => None,
    }
}

/// `argmin_{x in K} c^T x`, exact up to the same inward rounding as [`project`].
pub fn linear_minimizer(shape: Shape<'_>, c: &[f64]) -> Result<Vec<f64>> {
    Ok(pull_inside(shape, linear_minimizer_raw(shape, c)?))
}

fn linear_minimizer_raw(shape: Shape<'_>, c: &[f64]) -> Result<Vec<f64>> {
    let n = norm(c);
    match shape {
        Shape::Ball(b) => {
            if n == 0.0 {
                return Ok(vec![0.0; c.len()]);
            }
            Ok(c.iter().map(|v| -v * b.radius() / n).collect())
        }
        Shape::Ellipsoid(e) => {
            // minimize c^T x s.t. x^T A x <= 1: x = -A^{-1} c / sqrt(c^T A^{-1} c)
            let q: f64 = e.diag().iter().zip(c).map(|(a, v)| v * v / a).sum();
            if q == 0.0 {
                return Ok(vec![0.0; c.len()]);
            }
            let s = q.sqrt();
            Ok(e.diag().iter().zip(c).map(|(a, v)| -v / (a * s)).collect())
        }
        Shape::Polytope(p) => polytope_linear_minimizer(p, c),
        Shape::Smoothed(_) => Err(unsupported("linear minimization")),
    }
}

fn polytope_linear_minimizer(p: &Polytope, c: &[f64]) -> Result<Vec<f64>> {
    if let PolytopeKind::Box { half_widths } = p.kind() {
        return Ok(c
            .iter()
            .zip(half_widths)
            .map(|(v, w)| if *v > 0.0 { -w } else if *v < 0.0 { *w } else { 0.0 })
            .collect());
    }
    let vertices = p.vertices().ok_or_else(|| unsupported("linear minimization"))?;
    let best = vertices
        .iter()
        .min_by(|a, b| dot(c, a).total_cmp(&dot(c, b)))
        .ok_or_else(|| unsupported("linear minimization"))?;
    Ok(best.clone())
}

/// Projection onto `scale * (Delta - 1/(d+1))`, with `Delta = {z >= 0, sum z <= 1}`.
fn project_simplex(scale: f64, x: &[f64]) -> Vec<f64> {
    let shift = 1.0 / (x.len() as f64 + 1.0);
    let z: Vec<f64> = x.iter().map(|v| v / scale + shift).collect();
    let clamped: Vec<f64> = z.iter().map(|v| v.max(0.0)).collect();
    let p = if clamped.iter().sum::<f64>() <= 1.0 {
        clamped
    } else {
        // projection onto the probability simplex by sorting
        let mut u = z.clone();
        u.sort_by(|a, b| b.total_cmp(a));
        let mut cum = 0.0;
        let mut theta = 0.0;
        for (i, ui) in u.iter().enumerate() {
            cum += ui;
            let t = (cum - 1.0) / (i as f64 + 1.0);
            if ui - t > 0.0 {
                theta = t;
            }
        }
        z.iter().map(|v| (v - theta).max(0.0)).collect()
    };
    p.iter().map(|v| scale * (v - shift)).collect()
}

/// KKT: `z_i = x_i / (1 + mu a_i)` with `mu >= 0` chosen so `z^T A z = 1`.
fn project_ellipsoid(e: &Ellipsoid, x: &[f64]) -> Vec<f64> {
    if e.quad_form(x) <= 1.0 {
        return x.to_vec();
    }
    let at = |mu: f64| -> Vec<f64> { e.diag().iter().zip(x).map(|(a, v)| v / (1.0 + mu * a)).collect() };
    let (mut lo, mut hi) = (0.0, 1.0);
    while e.quad_form(&at(hi)) > 1.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if e.quad_form(&at(mid)) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(hi)
}
