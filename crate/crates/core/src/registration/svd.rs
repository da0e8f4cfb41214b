use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::transform::RigidTransform;

/// Relative singular-value floor below which centered points count as
/// collinear.
const COLLINEAR_TOLERANCE: f64 = 1e-9;

fn spread(points: impl Iterator<Item = Vector3<f64>>, mean: &Vector3<f64>) -> Vector3<f64> {
    let mut m = Matrix3::zeros();
    for p in points {
        let d = p - mean;
        m += d * d.transpose();
    }
    m.symmetric_eigenvalues()
}

fn is_degenerate(sv: &Vector3<f64>) -> bool {
    let mut v = [sv.x.abs(), sv.y.abs(), sv.z.abs()];
    v.sort_by(|a, b| b.total_cmp(a));
    !(v[0] > 0.0) || v[1] <= COLLINEAR_TOLERANCE * v[0]
}

/// Least-squares rigid transform mapping each `pairs[k].0` onto `pairs[k].1`
/// (centroid subtraction, SVD of the cross-covariance, reflection fix).
pub fn svd_align(pairs: &[(Vector3<f64>, Vector3<f64>)]) -> Result<RigidTransform> {
    if pairs.len() < 3 {
        return Err(Error::DegenerateConfiguration("fewer than three correspondences"));
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<Vector3<f64>>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<Vector3<f64>>() / n;
    if is_degenerate(&spread(pairs.iter().map(|p| p.0), &mx)) || is_degenerate(&spread(pairs.iter().map(|p| p.1), &my)) {
        return Err(Error::DegenerateConfiguration("collinear or coincident centers"));
    }
    let mut h = Matrix3::zeros();
    for (x, y) in pairs {
        h += (x - mx) * (y - my).transpose();
    }
    let svd = h.svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::DegenerateConfiguration("cross-covariance SVD failed")),
    };
    let v = vt.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let r = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    Ok(RigidTransform::new(r, my - r * mx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::rotation_angle_between;

    #[test]
    fn recovers_known_transform_from_three_pairs() {
        let t = RigidTransform::from_axis_angle(Vector3::new(0.4, -1.0, 2.0), Vector3::new(3.0, -4.0, 12.0));
        let xs = [Vector3::new(0.0, 0.0, 0.0), Vector3::new(5.0, 1.0, 0.0), Vector3::new(-2.0, 7.0, 1.0)];
        let pairs: Vec<_> = xs.iter().map(|x| (*x, t.apply(x))).collect();
        let est = svd_align(&pairs).unwrap();
        assert!(rotation_angle_between(&est.rotation, &t.rotation) < 1e-9);
        assert!((est.translation - t.translation).norm() < 1e-9);
    }

    #[test]
    fn identity_set() {
        let xs = [Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, 2.0, 0.0), Vector3::new(0.0, 0.0, 3.0), Vector3::new(1.0, 1.0, 1.0)];
        let pairs: Vec<_> = xs.iter().map(|x| (*x, *x)).collect();
        let est = svd_align(&pairs).unwrap();
        assert!((est.rotation - Matrix3::identity()).norm() < 1e-12);
        assert!(est.translation.norm() < 1e-12);
    }

    #[test]
    fn collinear_is_degenerate() {
        let xs = [Vector3::new(0.0, 0.0, 0.0), Vector3::new(1.0, 1.0, 1.0), Vector3::new(3.0, 3.0, 3.0)];
        let pairs: Vec<_> = xs.iter().map(|x| (*x, *x)).collect();
        assert!(matches!(svd_align(&pairs), Err(Error::DegenerateConfiguration(_))));
    }
}
