//! Degeneracy-aware quadric distance and its Jacobian.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};

use crate::error::Result;
use crate::quadric::{CenterClass, Indicator};
use crate::scene::{semantic, QuadricRecord, RecordGeometry};
use crate::transform::{skew, RigidTransform};

pub type RotationResidual = SVector<f64, 9>;
pub type ResidualJacobian = SMatrix<f64, 12, 6>;

/// Residual of one source/target pair under a transform. Jacobian columns
/// are `[δφ, δt]` for the update `R ← R·Exp(δφ)`, `t ← t + δt`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadricResidual {
    pub e_r: RotationResidual,
    pub e_t: Vector3<f64>,
    pub jacobian: ResidualJacobian,
    pub weight: f64,
}

impl QuadricResidual {
    pub fn stacked(&self) -> SVector<f64, 12> {
        let mut v = SVector::<f64, 12>::zeros();
        v.fixed_rows_mut::<9>(0).copy_from(&self.e_r);
        v.fixed_rows_mut::<3>(9).copy_from(&self.e_t);
        v
    }
}

/// The parts of a source/target pair that enter the residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualTerm {
    pub rot_x: Matrix3<f64>,
    pub t_x: Vector3<f64>,
    pub rot_y: Matrix3<f64>,
    /// Rotation axes meaningful on both sides.
    pub i_r: Indicator,
    pub i_t_y: Indicator,
    pub t_y: Vector3<f64>,
}

impl ResidualTerm {
    pub fn new(gx: &RecordGeometry, gy: &RecordGeometry) -> Self {
        Self {
            rot_x: gx.rotation_q,
            t_x: gx.t_f,
            rot_y: gy.rotation_q,
            i_r: [gx.i_r[0] & gy.i_r[0], gx.i_r[1] & gy.i_r[1], gx.i_r[2] & gy.i_r[2]],
            i_t_y: gy.i_t,
            t_y: gy.t_f,
        }
    }

    pub fn evaluate(&self, t: &RigidTransform) -> QuadricResidual {
        let r = &t.rotation;
        let mut e_r = RotationResidual::zeros();
        let mut jac = ResidualJacobian::zeros();
        for i in 0..3 {
            if self.i_r[i] == 0 {
                continue;
            }
            let a = self.rot_x.column(i).into_owned();
            let b = self.rot_y.column(i).into_owned();
            let ra = r * a;
            e_r.fixed_rows_mut::<3>(3 * i).copy_from(&ra.cross(&b));
            // d(R Exp(φ) a × b)/dφ = [b]× R [a]×
            let block = skew(&b) * r * skew(&a);
            jac.fixed_view_mut::<3, 3>(3 * i, 0).copy_from(&block);
        }
        let mask = Matrix3::from_diagonal(&crate::quadric::indicator_vector(&self.i_t_y));
        let proj = mask * self.rot_y.transpose();
        let e_t = proj * (r * self.t_x + t.translation - self.t_y);
        jac.fixed_view_mut::<3, 3>(9, 0).copy_from(&(-proj * r * skew(&self.t_x)));
        jac.fixed_view_mut::<3, 3>(9, 3).copy_from(&proj);
        QuadricResidual {
            e_r,
            e_t,
            jacobian: jac,
            weight: 1.0,
        }
    }

    /// Same term with the source center moved to `t_x`.
    fn shifted(&self, t_x: Vector3<f64>) -> Self {
        Self { t_x, ..*self }
    }
}

/// Residual of `r_x` against `r_y` under `t`.
pub fn quadric_residual(r_x: &QuadricRecord, r_y: &QuadricRecord, t: &RigidTransform) -> Result<QuadricResidual> {
    Ok(ResidualTerm::new(&r_x.geometry()?, &r_y.geometry()?).evaluate(t))
}

/// Analytic Jacobian against central differences along the six tangent
/// directions (step 1e-6). Returns `‖J − J_fd‖_F / ‖J_fd‖_F`, or the
/// absolute difference when the numeric Jacobian vanishes.
pub fn residual_jacobian_check(r_x: &QuadricRecord, r_y: &QuadricRecord, t: &RigidTransform) -> Result<f64> {
    let term = ResidualTerm::new(&r_x.geometry()?, &r_y.geometry()?);
    Ok(jacobian_check_term(&term, t))
}

pub(crate) fn numeric_jacobian(term: &ResidualTerm, t: &RigidTransform) -> ResidualJacobian {
    const H: f64 = 1e-6;
    let mut num = ResidualJacobian::zeros();
    for k in 0..6 {
        let mut d = SVector::<f64, 6>::zeros();
        d[k] = H;
        let plus = term.evaluate(&retract6(t, &d)).stacked();
        let minus = term.evaluate(&retract6(t, &(-d))).stacked();
        num.set_column(k, &((plus - minus) / (2.0 * H)));
    }
    num
}

pub(crate) fn jacobian_check_term(term: &ResidualTerm, t: &RigidTransform) -> f64 {
    let analytic = term.evaluate(t).jacobian;
    let num = numeric_jacobian(term, t);
    let diff = (analytic - num).norm();
    let scale = num.norm();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

pub(crate) fn retract6(t: &RigidTransform, d: &SVector<f64, 6>) -> RigidTransform {
    t.retract(&d.fixed_rows::<3>(0).into_owned(), &d.fixed_rows::<3>(3).into_owned())
}

/// Plane, line and ground labels carry the structures that the
/// orientation filter applies to.
pub fn is_key_structure(label: u32) -> bool {
    matches!(label, semantic::GROUND | semantic::PLANE | semantic::LINE)
}

/// True when some meaningful rotation axis is neither parallel nor
/// perpendicular to the ground normal within `delta_g_deg`.
pub fn is_irregular(geometry: &RecordGeometry, ground_normal: &Vector3<f64>, delta_g_deg: f64) -> bool {
    let n = ground_normal.normalize();
    (0..3).filter(|&i| geometry.i_r[i] == 1).any(|i| {
        let axis = geometry.rotation_q.column(i).normalize();
        let theta = axis.dot(&n).clamp(-1.0, 1.0).acos().to_degrees();
        let deviation = theta.min((180.0 - theta).abs()).min((90.0 - theta).abs());
        deviation > delta_g_deg
    })
}

/// Sampling radius for pseudo-sources: the mean full scale over the axes
/// along which the center is undetermined, floored at `floor`.
fn pseudo_radius(gx: &RecordGeometry, floor: f64) -> f64 {
    let free: Vec<f64> = (0..3).filter(|&i| gx.i_t[i] == 0).map(|i| gx.s_f[i]).collect();
    if free.is_empty() {
        return floor;
    }
    (free.iter().sum::<f64>() / free.len() as f64).max(floor)
}

/// Directions of undetermined center for non-central sources, from the
/// full rotation.
fn free_axes(gx: &RecordGeometry) -> Vec<Vector3<f64>> {
    match gx.center_class {
        CenterClass::LinearCenter | CenterClass::PlanarCenter => (0..3)
            .filter(|&i| gx.i_t[i] == 0)
            .map(|i| gx.rotation_f.column(i).into_owned())
            .collect(),
        _ => Vec::new(),
    }
}

const PSEUDO_FLOOR: f64 = 0.05;

/// Pseudo-source centers (two along a center line, four in a center plane).
fn pseudo_centers(gx: &RecordGeometry) -> Vec<Vector3<f64>> {
    let radius = pseudo_radius(gx, PSEUDO_FLOOR);
    let mut out = Vec::new();
    for axis in free_axes(gx) {
        out.push(gx.t_f + axis * radius);
        out.push(gx.t_f - axis * radius);
    }
    out
}

/// The pair's own term followed by one term per pseudo-source.
pub(crate) fn terms_for_pair(gx: &RecordGeometry, gy: &RecordGeometry) -> Vec<ResidualTerm> {
    let base = ResidualTerm::new(gx, gy);
    let mut out = vec![base];
    out.extend(pseudo_centers(gx).into_iter().map(|c| base.shifted(c)));
    out
}

/// Pseudo-source records for a non-central `r_x`, each paired with `r_y`.
/// Central sources yield no pairs.
pub fn augment_noncentral(r_x: &QuadricRecord, r_y: &QuadricRecord) -> Result<Vec<(QuadricRecord, QuadricRecord)>> {
    let gx = r_x.geometry()?;
    Ok(pseudo_centers(&gx)
        .into_iter()
        .map(|c| {
            let mut p = r_x.clone();
            p.t_f = [c.x, c.y, c.z];
            (p, r_y.clone())
        })
        .collect())
}
