use nalgebra::{Matrix3, Matrix4, SymmetricEigen, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use super::kind::{Indicator, QuadricKind};
use super::QuadricMatrix;
use crate::error::{Error, Result};
use crate::transform::RigidTransform;

/// Eigenvalues below this fraction of the largest magnitude count as zero.
pub const ZERO_EIGEN_TOLERANCE: f64 = 1e-6;
/// Eigenvalues closer than this relative gap count as repeated.
pub const DUPLICATE_TOLERANCE: f64 = 1e-3;
/// Canonical constant term below this fraction of ‖Q‖ counts as zero.
const C44_TOLERANCE: f64 = 1e-9;

/// Diagonal canonical matrix `diag(λa, λb, λc, c44)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalForm {
    pub lambda: Vector3<f64>,
    pub c44: f64,
    pub signature: [i8; 4],
}

impl CanonicalForm {
    /// `lambda[i]` pairs with column `i` of the pose rotation; forms produced by
    /// [`decompose`] are sorted non-increasing.
    pub fn new(lambda: Vector3<f64>, c44: f64) -> Self {
        let max = lambda.amax();
        let scale = lambda.norm().max(c44.abs());
        let sig = |v: f64, tol: f64| -> i8 {
            if v.abs() <= tol {
                0
            } else if v > 0.0 {
                1
            } else {
                -1
            }
        };
        let lam_tol = ZERO_EIGEN_TOLERANCE * max;
        Self {
            lambda,
            c44,
            signature: [
                sig(lambda.x, lam_tol),
                sig(lambda.y, lam_tol),
                sig(lambda.z, lam_tol),
                sig(c44, C44_TOLERANCE * scale),
            ],
        }
    }

    /// Canonical form of `kind` with per-axis lengths `scale`:
    /// `λ_i = I_C[i] / s_i²`, `c44 = I_C[3]`.
    pub fn for_kind(kind: QuadricKind, scale: &Vector3<f64>) -> Result<Self> {
        let sig = kind
            .signature()
            .ok_or(Error::NotAQuadric("unclassified kind has no canonical form"))?;
        let mut lambda = Vector3::zeros();
        for i in 0..3 {
            if sig[i] != 0 {
                if !(scale[i] > 0.0) {
                    return Err(Error::InvalidInput(format!("scale[{i}] must be positive")));
                }
                lambda[i] = sig[i] as f64 / (scale[i] * scale[i]);
            }
        }
        Ok(Self::new(lambda, sig[3] as f64))
    }

    pub fn matrix(&self) -> Matrix4<f64> {
        Matrix4::from_diagonal(&Vector4::new(self.lambda.x, self.lambda.y, self.lambda.z, self.c44))
    }

    pub fn is_sorted(&self) -> bool {
        self.lambda.x >= self.lambda.y && self.lambda.y >= self.lambda.z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterClass {
    Central,
    LinearCenter,
    PlanarCenter,
}

/// Geometric attributes inferred from a normalized quadric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryAttributes {
    pub scale: Vector3<f64>,
    /// Columns are the canonical axes `r_a, r_b, r_c`.
    pub rotation: Matrix3<f64>,
    pub center: Vector3<f64>,
    pub i_s: Indicator,
    pub i_r: Indicator,
    pub i_t: Indicator,
    pub center_class: CenterClass,
}

impl GeometryAttributes {
    pub fn pose(&self) -> RigidTransform {
        RigidTransform::new(self.rotation, self.center)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    pub canonical: CanonicalForm,
    pub attributes: GeometryAttributes,
    pub kind: QuadricKind,
}

/// `Q = P⁻ᵀ C P⁻¹`.
pub fn compose(canonical: &CanonicalForm, pose: &RigidTransform) -> QuadricMatrix {
    let inv = pose.inverse().to_matrix();
    QuadricMatrix::from_matrix(inv.transpose() * canonical.matrix() * inv)
}

/// Eigen-decomposition of a symmetric 3×3 matrix, sorted by signed value,
/// largest first.
fn sorted_eigen(m: &Matrix3<f64>) -> (Vector3<f64>, Matrix3<f64>) {
    let eig = SymmetricEigen::new(*m);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut values = Vector3::zeros();
    let mut vectors = Matrix3::zeros();
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        vectors.set_column(dst, &eig.eigenvectors.column(src).normalize());
    }
    (values, vectors)
}

/// Solves `Q33 t + l = 0` for the center, minimum-norm when `Q33` is rank
/// deficient.
pub fn classify_center(q33: &Matrix3<f64>, l: &Vector3<f64>) -> Result<(Vector3<f64>, CenterClass)> {
    let svd = q33.svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::NotAQuadric("SVD of quadratic block failed")),
    };
    let sigma = svd.singular_values;
    let smax = sigma.max();
    if !(smax > 0.0) {
        return Err(Error::NotAQuadric("quadratic block is zero"));
    }
    let tol = ZERO_EIGEN_TOLERANCE * smax;
    let mut t = Vector3::zeros();
    let mut rank = 0;
    for i in 0..3 {
        if sigma[i] > tol {
            rank += 1;
            let coeff = u.column(i).dot(l) / sigma[i];
            t -= vt.row(i).transpose() * coeff;
        }
    }
    let residual = (q33 * t + l).norm();
    let scale = l.norm().max(smax * t.norm()).max(f64::MIN_POSITIVE);
    if residual > 1e-6 * scale {
        return Err(Error::NoCenter);
    }
    let class = match rank {
        3 => CenterClass::Central,
        2 => CenterClass::LinearCenter,
        _ => CenterClass::PlanarCenter,
    };
    Ok((t, class))
}

/// Constant term of the canonical form, `k + lᵀ t` at any center `t`.
fn canonical_constant(q: &QuadricMatrix) -> Result<f64> {
    let (t, _) = classify_center(&q.q33(), &q.l())?;
    Ok(q.k() + q.l().dot(&t))
}

/// Removes the proportional ambiguity of `Q`.
///
/// With a nonzero canonical constant term the matrix is scaled by
/// `|∏λ(Q33) / ∏λ(Q)|` over nonzero eigenvalues, which brings `c44` to ±1;
/// otherwise by `1/‖Q‖`. The eigenvalue-product ratio equals `1/|c44|`
/// (Schur complement of `Q33`) and is evaluated that way, since the direct
/// product loses all precision once the quadric sits far from the origin.
/// The overall sign is then fixed so that positive eigenvalues of `Q33` are
/// in the majority.
pub fn normalize(q: &QuadricMatrix) -> Result<QuadricMatrix> {
    let fro = q.frobenius_norm();
    if !fro.is_finite() || fro == 0.0 {
        return Err(Error::NotAQuadric("zero matrix"));
    }
    let ev33 = SymmetricEigen::new(q.q33()).eigenvalues;
    if ev33.amax() <= 1e-12 * fro {
        return Err(Error::NotAQuadric("quadratic block is zero"));
    }
    let alpha = match canonical_constant(q) {
        Ok(c44) if c44.abs() > C44_TOLERANCE * fro => 1.0 / c44.abs(),
        _ => 1.0 / fro,
    };
    let tol = ZERO_EIGEN_TOLERANCE * ev33.amax();
    let pos = ev33.iter().filter(|v| **v > tol).count();
    let neg = ev33.iter().filter(|v| **v < -tol).count();
    let flip = neg > pos || (neg == pos && ev33.sum() < 0.0);
    Ok(q.scaled(if flip { -alpha } else { alpha }))
}

fn is_zero(v: f64, max: f64) -> bool {
    v.abs() <= ZERO_EIGEN_TOLERANCE * max
}

fn is_duplicate(a: f64, b: f64, max: f64) -> bool {
    if is_zero(a, max) && is_zero(b, max) {
        return true;
    }
    (a - b).abs() < DUPLICATE_TOLERANCE * a.abs().max(b.abs())
}

/// Decomposes `Q` into canonical form, geometric attributes and type.
pub fn decompose(q: &QuadricMatrix) -> Result<Decomposition> {
    let qn = normalize(q)?;
    let (lambda, vectors) = sorted_eigen(&qn.q33());
    let max = lambda.amax();
    let (center, center_class) = classify_center(&qn.q33(), &qn.l())?;
    let c44 = qn.k() + qn.l().dot(&center);

    let mut canon_lambda = lambda;
    for v in canon_lambda.iter_mut() {
        if is_zero(*v, max) {
            *v = 0.0;
        }
    }
    let signature = {
        let s = |v: f64| -> i8 {
            if v == 0.0 {
                0
            } else if v > 0.0 {
                1
            } else {
                -1
            }
        };
        let c = if c44.abs() > C44_TOLERANCE * qn.frobenius_norm() {
            s(c44)
        } else {
            0
        };
        [s(canon_lambda.x), s(canon_lambda.y), s(canon_lambda.z), c]
    };
    let canonical = CanonicalForm {
        lambda: canon_lambda,
        c44: if signature[3] == 0 { 0.0 } else { c44 },
        signature,
    };

    let dup = |i: usize, j: usize| is_duplicate(lambda[i], lambda[j], max);
    let kind = match signature {
        [1, 1, 1, -1] if dup(0, 1) && dup(1, 2) && dup(0, 2) => QuadricKind::Sphere,
        [1, 1, 1, -1] => QuadricKind::Ellipsoid,
        [1, 1, 0, -1] if dup(0, 1) => QuadricKind::Cylinder,
        [1, 1, 0, -1] => QuadricKind::EllipticCylinder,
        [1, 1, -1, 0] if dup(0, 1) => QuadricKind::Cone,
        [1, 1, -1, 0] => QuadricKind::EllipticCone,
        [1, 1, 1, 0] => QuadricKind::Point,
        [1, 1, 0, 0] => QuadricKind::Line,
        [1, 0, 0, 0] => QuadricKind::Plane,
        _ => QuadricKind::Unclassified,
    };

    let nonzero: Indicator = [
        (signature[0] != 0) as u8,
        (signature[1] != 0) as u8,
        (signature[2] != 0) as u8,
    ];
    let unique: Indicator = [
        (!dup(0, 1) && !dup(0, 2)) as u8,
        (!dup(0, 1) && !dup(1, 2)) as u8,
        (!dup(0, 2) && !dup(1, 2)) as u8,
    ];
    let (i_s, i_r) = match kind {
        QuadricKind::Point => ([0, 0, 0], [0, 0, 0]),
        QuadricKind::Cone | QuadricKind::EllipticCone => ([nonzero[0], nonzero[1], 0], unique),
        QuadricKind::Line => ([0, 0, 0], [0, 0, 1]),
        QuadricKind::Plane => ([0, 0, 0], [1, 0, 0]),
        _ => (nonzero, unique),
    };
    let i_t = nonzero;

    // Absolute lengths need c44 = ±1; scale-free kinds use the unit-norm spectrum.
    let reference = if canonical.c44 != 0.0 {
        canonical.c44.abs()
    } else {
        lambda.norm()
    };
    let mut scale = Vector3::zeros();
    for i in 0..3 {
        if i_s[i] == 1 {
            scale[i] = (reference / lambda[i].abs()).sqrt();
        }
    }

    let rotation = canonicalize_signs(vectors, &i_r);

    Ok(Decomposition {
        canonical,
        attributes: GeometryAttributes {
            scale,
            rotation,
            center,
            i_s,
            i_r,
            i_t,
            center_class,
        },
        kind,
    })
}

/// Resolves the per-column sign ambiguity: meaningful columns get a positive
/// largest-magnitude component, then a degenerate column (or the last one)
/// absorbs the handedness fix.
fn canonicalize_signs(mut r: Matrix3<f64>, i_r: &Indicator) -> Matrix3<f64> {
    for c in 0..3 {
        if i_r[c] == 1 {
            let col = r.column(c);
            let mut best = 0;
            for k in 1..3 {
                if col[k].abs() > col[best].abs() + 1e-12 {
                    best = k;
                }
            }
            if col[best] < 0.0 {
                let flipped = -r.column(c);
                r.set_column(c, &flipped);
            }
        }
    }
    if r.determinant() < 0.0 {
        let c = (0..3).rev().find(|&c| i_r[c] == 0).unwrap_or(2);
        let flipped = -r.column(c);
        r.set_column(c, &flipped);
    }
    r
}
