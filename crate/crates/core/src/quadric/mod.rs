//! Quadric algebra: the implicit surface `xᵀ Q x = 0` over homogeneous
//! points, its canonical decomposition into type, scale and pose, and
//! point-to-surface distance.
//!
//! Coefficient layout of `q = [A, B, C, D, E, F, G, H, I, J]`:
//!
//! ```text
//!     | A D E G |
//! Q = | D B F H |
//!     | E F C I |
//!     | G H I J |
//! ```

mod decompose;
mod distance;
mod kind;

pub use decompose::{
    classify_center, compose, decompose, normalize, CanonicalForm, CenterClass, Decomposition,
    GeometryAttributes, DUPLICATE_TOLERANCE, ZERO_EIGEN_TOLERANCE,
};
pub use distance::taubin_distance;
pub use kind::{indicator_all, indicator_vector, Degeneracy, Indicator, QuadricKind};

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The ten coefficients of a second-degree polynomial in x, y, z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadricCoefficients(pub [f64; 10]);

impl QuadricCoefficients {
    pub fn new(q: [f64; 10]) -> Result<Self> {
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotAQuadric("non-finite coefficient"));
        }
        if q[..6].iter().all(|&v| v == 0.0) {
            return Err(Error::NotAQuadric("all quadratic terms are zero"));
        }
        Ok(Self(q))
    }

    pub fn as_array(&self) -> &[f64; 10] {
        &self.0
    }
}

/// Symmetric 4×4 matrix form of a quadric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadricMatrix {
    m: Matrix4<f64>,
}

impl QuadricMatrix {
    /// Wraps `m`, symmetrizing it.
    pub fn from_matrix(m: Matrix4<f64>) -> Self {
        Self {
            m: (m + m.transpose()) * 0.5,
        }
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.m
    }

    /// Upper-left block `Q33`.
    pub fn q33(&self) -> Matrix3<f64> {
        self.m.fixed_view::<3, 3>(0, 0).into_owned()
    }

    /// Upper-right column `l`.
    pub fn l(&self) -> Vector3<f64> {
        self.m.fixed_view::<3, 1>(0, 3).into_owned()
    }

    /// Bottom-right entry `k`.
    pub fn k(&self) -> f64 {
        self.m[(3, 3)]
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self { m: self.m * alpha }
    }

    pub fn flatten(&self) -> [f64; 10] {
        let m = &self.m;
        [
            m[(0, 0)],
            m[(1, 1)],
            m[(2, 2)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 2)],
            m[(0, 3)],
            m[(1, 3)],
            m[(2, 3)],
            m[(3, 3)],
        ]
    }

    pub fn coefficients(&self) -> Result<QuadricCoefficients> {
        QuadricCoefficients::new(self.flatten())
    }

    /// Implicit value `f_q(x) = [x;1]ᵀ Q [x;1]`.
    pub fn eval(&self, x: &Vector3<f64>) -> f64 {
        let h = Vector4::new(x.x, x.y, x.z, 1.0);
        h.dot(&(self.m * h))
    }

    /// `∇Q · [x;1]` with the 3×4 gradient operator `2·[Q33 | l]`.
    pub fn gradient(&self, x: &Vector3<f64>) -> Vector3<f64> {
        (self.q33() * x + self.l()) * 2.0
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm()
    }

    /// The same surface expressed in a frame where points map as
    /// `x_new = T x_old`.
    pub fn transformed(&self, t: &crate::transform::RigidTransform) -> Self {
        let inv = t.inverse().to_matrix();
        Self::from_matrix(inv.transpose() * self.m * inv)
    }
}

/// Assembles the symmetric matrix from coefficients.
pub fn build_matrix(q: &QuadricCoefficients) -> Result<QuadricMatrix> {
    let [a, b, c, d, e, f, g, h, i, j] = QuadricCoefficients::new(q.0)?.0;
    Ok(QuadricMatrix {
        m: Matrix4::new(a, d, e, g, d, b, f, h, e, f, c, i, g, h, i, j),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unit_sphere_layout() {
        let q = QuadricCoefficients::new([1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0]).unwrap();
        let m = build_matrix(&q).unwrap();
        assert_eq!(*m.matrix(), Matrix4::from_diagonal(&Vector4::new(1.0, 1.0, 1.0, -1.0)));
    }

    #[test]
    fn coincident_planes_layout() {
        let q = QuadricCoefficients::new([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let m = build_matrix(&q).unwrap();
        let mut expected = Matrix4::zeros();
        expected[(0, 0)] = 1.0;
        assert_eq!(*m.matrix(), expected);
    }

    #[test]
    fn zero_quadratic_block_is_rejected() {
        let r = QuadricCoefficients::new([0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        assert!(matches!(r, Err(Error::NotAQuadric(_))));
        assert!(QuadricCoefficients::new([f64::NAN, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn flatten_inverts_build() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let mut q = [0.0; 10];
            q.iter_mut().for_each(|v| *v = rng.random_range(-5.0..5.0));
            let coeffs = QuadricCoefficients::new(q).unwrap();
            assert_eq!(build_matrix(&coeffs).unwrap().flatten(), q);
        }
    }

    #[test]
    fn sphere_gradient_is_radial() {
        let m = QuadricMatrix::from_matrix(Matrix4::from_diagonal(&Vector4::new(1.0, 1.0, 1.0, -1.0)));
        assert_eq!(m.gradient(&Vector3::new(1.0, 0.0, 0.0)), Vector3::new(2.0, 0.0, 0.0));
    }

    #[test]
    fn linear_plane_gradient() {
        // f = z: only the I coefficient (1/2) is set.
        let mut mat = Matrix4::zeros();
        mat[(2, 3)] = 0.5;
        mat[(3, 2)] = 0.5;
        let m = QuadricMatrix::from_matrix(mat);
        for x in [Vector3::new(0.0, 0.0, 0.0), Vector3::new(3.0, -1.0, 7.0)] {
            assert_eq!(m.gradient(&x), Vector3::new(0.0, 0.0, 1.0));
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-5;
        for _ in 0..1000 {
            let mut q = [0.0; 10];
            q.iter_mut().for_each(|v| *v = rng.random_range(-2.0..2.0));
            let m = build_matrix(&QuadricCoefficients::new(q).unwrap()).unwrap();
            let x = Vector3::new(
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            );
            let g = m.gradient(&x);
            let mut fd = Vector3::zeros();
            for k in 0..3 {
                let mut e = Vector3::zeros();
                e[k] = h;
                fd[k] = (m.eval(&(x + e)) - m.eval(&(x - e))) / (2.0 * h);
            }
            let rel = (g - fd).norm() / g.norm().max(1.0);
            assert!(rel < 1e-6, "relative error {rel}");
        }
    }
}
