//! Moment-based quadric fitting.

use nalgebra::Vector3;

use super::{semantic, ElementSegment, Source};
use crate::cloud::{mean_and_covariance, principal_axes};
use crate::error::{Error, Result};
use crate::quadric::{compose, CanonicalForm, QuadricKind, QuadricMatrix};
use crate::transform::RigidTransform;

/// Relative standard deviation under which an axis counts as flat.
const RANK_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct StatisticalFit {
    pub kind: QuadricKind,
    pub q: QuadricMatrix,
    /// `k_s · σ` per principal axis, largest first.
    pub scale: Vector3<f64>,
    /// Centroid and principal axes (columns in the order of `scale`).
    pub pose: RigidTransform,
}

/// Semantic label to quadric type.
pub fn assign_quadric_type(label: u32, source: Source) -> QuadricKind {
    match (label, source) {
        (_, Source::Ground) | (_, Source::Plane) => QuadricKind::Plane,
        (_, Source::Line) => QuadricKind::Line,
        (semantic::GROUND, _) | (semantic::PLANE, _) => QuadricKind::Plane,
        (semantic::LINE, _) => QuadricKind::Line,
        (semantic::TRUNK, _) => QuadricKind::EllipticCylinder,
        _ => QuadricKind::Ellipsoid,
    }
}

/// Per-axis canonical coefficients in the principal frame (largest spread
/// first) and the constant term.
fn axis_pattern(kind: QuadricKind) -> Option<([f64; 3], f64)> {
    Some(match kind {
        QuadricKind::Point => ([1.0, 1.0, 1.0], 0.0),
        QuadricKind::Line => ([0.0, 1.0, 1.0], 0.0),
        QuadricKind::Plane => ([0.0, 0.0, 1.0], 0.0),
        QuadricKind::Sphere | QuadricKind::Ellipsoid => ([1.0, 1.0, 1.0], -1.0),
        QuadricKind::Cylinder | QuadricKind::EllipticCylinder => ([0.0, 1.0, 1.0], -1.0),
        QuadricKind::Cone | QuadricKind::EllipticCone => ([-1.0, 1.0, 1.0], 0.0),
        QuadricKind::Unclassified => return None,
    })
}

fn required_rank(kind: QuadricKind) -> usize {
    match kind {
        QuadricKind::Point => 0,
        QuadricKind::Line => 1,
        QuadricKind::Plane => 2,
        _ => 3,
    }
}

/// Averages same-signed axis lengths whose relative gap is below `tol`, so a
/// nearly symmetric segment yields an exactly symmetric quadric.
fn snap_symmetric(scale: &mut Vector3<f64>, pattern: &[f64; 3], tol: f64) {
    let close = |a: f64, b: f64| (a - b).abs() < tol * a.max(b);
    let same = |i: usize, j: usize| pattern[i] != 0.0 && pattern[i] == pattern[j];
    if same(0, 1) && same(1, 2) && close(scale[0], scale[2]) {
        let m = scale.mean();
        scale.fill(m);
        return;
    }
    let g01 = (scale[0] - scale[1]) / scale[0];
    let g12 = (scale[1] - scale[2]) / scale[1];
    if same(0, 1) && close(scale[0], scale[1]) && (!same(1, 2) || g01 <= g12) {
        let m = 0.5 * (scale[0] + scale[1]);
        scale[0] = m;
        scale[1] = m;
    } else if same(1, 2) && close(scale[1], scale[2]) {
        let m = 0.5 * (scale[1] + scale[2]);
        scale[1] = m;
        scale[2] = m;
    }
}

/// Fits `kind` from the centroid and covariance of `points`: axes from the
/// covariance eigenvectors, lengths `k_s · σ`. Scale-free kinds (point, line,
/// plane) use unit canonical coefficients, which leaves the surface unchanged
/// and tolerates exactly flat data.
pub fn fit_statistical(points: &[Vector3<f64>], kind: QuadricKind, k_s: f64, symmetry_tolerance: f64) -> Result<StatisticalFit> {
    let (pattern, c44) = axis_pattern(kind).ok_or(Error::FitDegenerate("unclassified"))?;
    if points.len() < 3 {
        return Err(Error::FitDegenerate(kind.name()));
    }
    let (center, cov) = mean_and_covariance(points);
    let (vals, axes) = principal_axes(&cov);
    let sigma = vals.map(|v| v.max(0.0).sqrt());
    let rank = (0..3).filter(|&i| sigma[i] > RANK_TOLERANCE * sigma[0].max(1e-300)).count();
    if sigma[0] == 0.0 || rank < required_rank(kind) {
        return Err(Error::FitDegenerate(kind.name()));
    }
    let mut scale = sigma * k_s;
    snap_symmetric(&mut scale, &pattern, symmetry_tolerance);
    let lambda = if matches!(kind, QuadricKind::Point | QuadricKind::Line | QuadricKind::Plane) {
        Vector3::from(pattern)
    } else {
        Vector3::from_fn(|i, _| pattern[i] / (scale[i] * scale[i]))
    };
    let pose = RigidTransform::new(axes, center);
    let q = compose(&CanonicalForm::new(lambda, c44), &pose);
    Ok(StatisticalFit { kind, q, scale, pose })
}

/// [`fit_statistical`] with the rank-relaxing chain
/// ellipsoid → elliptic cylinder → plane → point.
pub fn fit_with_fallback(segment: &ElementSegment, k_s: f64, symmetry_tolerance: f64) -> Result<StatisticalFit> {
    let first = assign_quadric_type(segment.label, segment.source);
    let chain: &[QuadricKind] = match first {
        QuadricKind::Ellipsoid | QuadricKind::Sphere => &[
            QuadricKind::Ellipsoid,
            QuadricKind::EllipticCylinder,
            QuadricKind::Plane,
            QuadricKind::Point,
        ],
        QuadricKind::EllipticCylinder | QuadricKind::Cylinder => {
            &[QuadricKind::EllipticCylinder, QuadricKind::Plane, QuadricKind::Point]
        }
        QuadricKind::Plane => &[QuadricKind::Plane, QuadricKind::Point],
        QuadricKind::Line => &[QuadricKind::Line, QuadricKind::Point],
        _ => &[QuadricKind::Point],
    };
    let mut last = Error::FitDegenerate(first.name());
    for &kind in chain {
        match fit_statistical(&segment.points, kind, k_s, symmetry_tolerance) {
            Ok(f) => return Ok(f),
            Err(e) => last = e,
        }
    }
    Err(last)
}
