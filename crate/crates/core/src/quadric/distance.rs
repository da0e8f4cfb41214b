use nalgebra::{Matrix4, Vector3};

use super::QuadricMatrix;
use crate::error::{Error, Result};

const GRADIENT_FLOOR: f64 = 1e-12;

/// Mean first-order (Taubin) distance `|f(x)| / ‖∇f(x)‖` of `points` to the
/// surface, evaluated in unit space: points are centered on their centroid
/// and divided by their largest centered norm, and `q` is carried through
/// the same similarity transform.
///
/// A point whose gradient magnitude falls below `1e-12` contributes `1.0`,
/// unless it also lies on the surface, in which case it contributes `0`.
pub fn taubin_distance(points: &[Vector3<f64>], q: &QuadricMatrix) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::InvalidInput("taubin distance of an empty point set".into()));
    }
    let n = points.len() as f64;
    let centroid = points.iter().fold(Vector3::zeros(), |acc, p| acc + p) / n;
    let mut radius = points.iter().map(|p| (p - centroid).norm()).fold(0.0, f64::max);
    if radius < 1e-12 {
        radius = 1.0;
    }

    // x_world = radius * x_unit + centroid
    let mut m = Matrix4::identity() * radius;
    m[(3, 3)] = 1.0;
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&centroid);
    let unit = QuadricMatrix::from_matrix(m.transpose() * q.matrix() * m);
    let norm = unit.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::NotAQuadric("zero matrix"));
    }
    let unit = unit.scaled(1.0 / norm);

    let total: f64 = points
        .iter()
        .map(|p| {
            let x = (p - centroid) / radius;
            let f = unit.eval(&x);
            let g = unit.gradient(&x).norm();
            if g < GRADIENT_FLOOR {
                if f.abs() < GRADIENT_FLOOR {
                    0.0
                } else {
                    1.0
                }
            } else {
                (f / g).abs()
            }
        })
        .sum();
    Ok(total / n)
}
