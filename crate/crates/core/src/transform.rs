//! Rigid transforms in SE(3) and the small amount of Lie-group machinery the
//! optimizer needs.

use nalgebra::{Matrix3, Matrix4, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Rotation + translation acting as `x -> R x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self::new(Matrix3::identity(), Vector3::zeros())
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::new(Matrix3::identity(), translation)
    }

    /// Rotation of `yaw` radians about +z followed by `translation`.
    pub fn from_yaw(yaw: f64, translation: Vector3<f64>) -> Self {
        Self::new(rotation_z(yaw), translation)
    }

    /// Builds a transform from an axis-angle vector and a translation.
    pub fn from_axis_angle(axis_angle: Vector3<f64>, translation: Vector3<f64>) -> Self {
        Self::new(so3_exp(&axis_angle), translation)
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn apply_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// `self ∘ other`, i.e. apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform::new(rt, -(rt * self.translation))
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn from_matrix(m: &Matrix4<f64>) -> RigidTransform {
        RigidTransform::new(
            m.fixed_view::<3, 3>(0, 0).into_owned(),
            m.fixed_view::<3, 1>(0, 3).into_owned(),
        )
    }

    /// Rows of the homogeneous 4×4 matrix.
    pub fn to_rows(&self) -> [[f64; 4]; 4] {
        let m = self.to_matrix();
        let mut rows = [[0.0; 4]; 4];
        for (r, row) in rows.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = m[(r, c)];
            }
        }
        rows
    }

    pub fn from_rows(rows: &[[f64; 4]; 4]) -> RigidTransform {
        let mut m = Matrix4::zeros();
        for (r, row) in rows.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                m[(r, c)] = *v;
            }
        }
        RigidTransform::from_matrix(&m)
    }

    /// Right-multiplicative update `R ← R·Exp(δφ)`, `t ← t + δt`.
    pub fn retract(&self, delta_rot: &Vector3<f64>, delta_trans: &Vector3<f64>) -> RigidTransform {
        RigidTransform::new(
            orthonormalize(&(self.rotation * so3_exp(delta_rot))),
            self.translation + delta_trans,
        )
    }

    /// Max deviation of `RᵀR` from identity, plus |det − 1|.
    pub fn orthonormality_error(&self) -> f64 {
        let e = (self.rotation.transpose() * self.rotation - Matrix3::identity()).abs().max();
        e + (self.rotation.determinant() - 1.0).abs()
    }
}

impl Serialize for RigidTransform {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RigidTransform {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows = <[[f64; 4]; 4]>::deserialize(deserializer)?;
        Ok(RigidTransform::from_rows(&rows))
    }
}

pub fn rotation_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn so3_exp(phi: &Vector3<f64>) -> Matrix3<f64> {
    Rotation3::new(*phi).into_inner()
}

pub fn so3_log(r: &Matrix3<f64>) -> Vector3<f64> {
    Rotation3::from_matrix_unchecked(*r).scaled_axis()
}

/// Projects a near-rotation onto SO(3) via SVD.
pub fn orthonormalize(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Matrix3::identity(),
    };
    let mut d = Matrix3::identity();
    if (u * vt).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    u * d * vt
}

/// Geodesic angle between two rotations, radians, in [0, π].
pub fn rotation_angle_between(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let r = a.transpose() * b;
    let cos = (r.trace() - 1.0) / 2.0;
    let sin = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]).norm() / 2.0;
    sin.atan2(cos)
}

/// Unit quaternion `[w, x, y, z]` of a rotation matrix.
pub fn quaternion_from_rotation(r: &Matrix3<f64>) -> [f64; 4] {
    let q = UnitQuaternion::from_matrix(&orthonormalize(r));
    let mut out = [q.w, q.i, q.j, q.k];
    // q and -q are the same rotation; keep w non-negative.
    if out[0] < 0.0 {
        out.iter_mut().for_each(|v| *v = -*v);
    }
    out
}

pub fn rotation_from_quaternion(q: &[f64; 4]) -> Matrix3<f64> {
    let q = nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]);
    UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner()
}
