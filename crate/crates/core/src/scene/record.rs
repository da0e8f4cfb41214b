//! The 21-parameter scene element and attribute fusion.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::fit::StatisticalFit;
use crate::error::{Error, Result};
use crate::quadric::{
    build_matrix, decompose, indicator_all, normalize, CenterClass, Indicator, QuadricCoefficients, QuadricKind,
    QuadricMatrix,
};
use crate::transform::{orthonormalize, quaternion_from_rotation, rotation_from_quaternion, RigidTransform};

/// Label, quadric coefficients, full scale, full rotation (unit quaternion
/// `w, x, y, z`) and full center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadricRecord {
    pub label: u32,
    pub q: [f64; 10],
    pub s_f: [f64; 3],
    pub eta_f: [f64; 4],
    pub t_f: [f64; 3],
}

/// Quantities derived once from a record for matching and registration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordGeometry {
    pub kind: QuadricKind,
    pub i_s: Indicator,
    pub i_r: Indicator,
    pub i_t: Indicator,
    pub center_class: CenterClass,
    /// Decomposed axes of `q`.
    pub rotation_q: Matrix3<f64>,
    pub rotation_f: Matrix3<f64>,
    pub s_f: Vector3<f64>,
    pub t_f: Vector3<f64>,
}

impl QuadricRecord {
    pub const PARAMETERS: usize = 21;

    pub fn quadric(&self) -> Result<QuadricMatrix> {
        build_matrix(&QuadricCoefficients::new(self.q)?)
    }

    pub fn geometry(&self) -> Result<RecordGeometry> {
        let d = decompose(&self.quadric()?)?;
        Ok(RecordGeometry {
            kind: d.kind,
            i_s: d.attributes.i_s,
            i_r: d.attributes.i_r,
            i_t: d.attributes.i_t,
            center_class: d.attributes.center_class,
            rotation_q: d.attributes.rotation,
            rotation_f: self.rotation(),
            s_f: self.scale(),
            t_f: self.center(),
        })
    }

    pub fn scale(&self) -> Vector3<f64> {
        Vector3::from(self.s_f)
    }

    pub fn center(&self) -> Vector3<f64> {
        Vector3::from(self.t_f)
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        rotation_from_quaternion(&self.eta_f)
    }

    /// Point-type record at `p`: `‖x − p‖² = 0` with fully degenerate scale
    /// and rotation.
    pub fn point(label: u32, p: &Vector3<f64>, scale_floor: f64) -> Self {
        let q = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0, -p.x, -p.y, -p.z, p.norm_squared()];
        Self {
            label,
            q,
            s_f: [scale_floor; 3],
            eta_f: [1.0, 0.0, 0.0, 0.0],
            t_f: [p.x, p.y, p.z],
        }
    }

    /// The record of the same element observed in a frame where points are
    /// `f(x)`: `Q' = M⁻ᵀ Q M⁻¹` with `M` the homogeneous matrix of `f`.
    pub fn transformed(&self, f: &RigidTransform) -> Result<Self> {
        let m_inv = f.inverse().to_matrix();
        let q = normalize(&QuadricMatrix::from_matrix(m_inv.transpose() * self.quadric()?.matrix() * m_inv))?;
        let t = f.apply(&self.center());
        Ok(Self {
            label: self.label,
            q: q.flatten(),
            s_f: self.s_f,
            eta_f: quaternion_from_rotation(&(f.rotation * self.rotation())),
            t_f: [t.x, t.y, t.z],
        })
    }

    pub fn to_values(&self) -> [f64; 21] {
        let mut v = [0.0; 21];
        v[0] = self.label as f64;
        v[1..11].copy_from_slice(&self.q);
        v[11..14].copy_from_slice(&self.s_f);
        v[14..18].copy_from_slice(&self.eta_f);
        v[18..21].copy_from_slice(&self.t_f);
        v
    }
}

/// Matches statistical axes to decomposed axes by largest |cosine| so that
/// fused columns refer to the same direction.
fn align_axes(decomposed: &Matrix3<f64>, stat_axes: &Matrix3<f64>, stat_scale: &Vector3<f64>) -> (Matrix3<f64>, Vector3<f64>) {
    let mut assigned = [usize::MAX; 3];
    let mut used = [false; 3];
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(9);
    for i in 0..3 {
        for j in 0..3 {
            pairs.push((decomposed.column(i).dot(&stat_axes.column(j)).abs(), i, j));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    for (_, i, j) in pairs {
        if assigned[i] == usize::MAX && !used[j] {
            assigned[i] = j;
            used[j] = true;
        }
    }
    let mut axes = Matrix3::zeros();
    let mut scale = Vector3::zeros();
    for i in 0..3 {
        let j = assigned[i];
        let mut col = stat_axes.column(j).into_owned();
        if col.dot(&decomposed.column(i)) < 0.0 {
            col = -col;
        }
        axes.set_column(i, &col);
        scale[i] = stat_scale[j];
    }
    (axes, scale)
}

/// Fuses decomposed attributes of the fitted quadric with the statistical
/// moments: degenerate scale and rotation components come from the moments,
/// and the center comes from the quadric only when it is fully determined.
pub fn build_record(label: u32, fit: &StatisticalFit, scale_floor: f64) -> Result<QuadricRecord> {
    let q = normalize(&fit.q)?;
    let d = decompose(&q)?;
    if d.kind == QuadricKind::Unclassified {
        return Err(Error::NotAQuadric("unclassified fit"));
    }
    let a = &d.attributes;
    let (stat_axes, stat_scale) = align_axes(&a.rotation, &fit.pose.rotation, &fit.scale);
    let mut s_f = [0.0; 3];
    let mut r_f = Matrix3::zeros();
    for i in 0..3 {
        let s = if a.i_s[i] == 1 { a.scale[i] } else { stat_scale[i] };
        s_f[i] = s.max(scale_floor);
        let col = if a.i_r[i] == 1 {
            a.rotation.column(i).into_owned()
        } else {
            stat_axes.column(i).into_owned()
        };
        r_f.set_column(i, &col);
    }
    let r_f = orthonormalize(&r_f);
    let t_f = if indicator_all(&a.i_t) {
        a.center
    } else {
        fit.pose.translation
    };
    Ok(QuadricRecord {
        label,
        q: q.flatten(),
        s_f,
        eta_f: quaternion_from_rotation(&r_f),
        t_f: [t_f.x, t_f.y, t_f.z],
    })
}

/// Product of the `size_rank` largest components of `s_f`: length for
/// lines, area for planes, volume otherwise.
pub fn record_size(record: &QuadricRecord, kind: QuadricKind) -> f64 {
    let mut s = record.s_f;
    s.sort_by(|a, b| b.total_cmp(a));
    s.iter().take(kind.size_rank()).product()
}

/// Keeps, per label, the `k_e` largest records. Ties go to the lower index;
/// the original order is preserved among survivors. Returns kept indices.
pub fn select_top_k(records: &[QuadricRecord], kinds: &[QuadricKind], k_e: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..records.len()).collect();
    let sizes: Vec<f64> = records.iter().zip(kinds).map(|(r, k)| record_size(r, *k)).collect();
    order.sort_by(|&a, &b| {
        records[a]
            .label
            .cmp(&records[b].label)
            .then(sizes[b].total_cmp(&sizes[a]))
            .then(a.cmp(&b))
    });
    let mut kept = Vec::new();
    let mut count = 0;
    let mut current = None;
    for i in order {
        if current != Some(records[i].label) {
            current = Some(records[i].label);
            count = 0;
        }
        if count < k_e {
            kept.push(i);
            count += 1;
        }
    }
    kept.sort_unstable();
    kept
}
