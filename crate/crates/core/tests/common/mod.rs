#![allow(dead_code)]

use nalgebra::Vector3;
use quadreg::quadric::{compose, normalize, CanonicalForm, QuadricKind};
use quadreg::scene::{QuadricRecord, SceneRepresentation};
use quadreg::transform::{quaternion_from_rotation, so3_exp, RigidTransform};
use rand::Rng;

/// Exact record of a `kind` quadric with the given scale at `pose`.
pub fn record(kind: QuadricKind, label: u32, scale: Vector3<f64>, pose: &RigidTransform) -> QuadricRecord {
    let q = normalize(&compose(&CanonicalForm::for_kind(kind, &scale).unwrap(), pose)).unwrap();
    QuadricRecord {
        label,
        q: q.flatten(),
        s_f: [scale.x, scale.y, scale.z],
        eta_f: quaternion_from_rotation(&pose.rotation),
        t_f: [pose.translation.x, pose.translation.y, pose.translation.z],
    }
}

pub fn scene(records: Vec<QuadricRecord>) -> SceneRepresentation {
    SceneRepresentation {
        records,
        augmented: Vec::new(),
        descriptors: Vec::new(),
        ground_normal: Vector3::z(),
    }
}

pub fn random_rotation_pose(rng: &mut impl Rng, spread: f64) -> RigidTransform {
    let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let t = Vector3::new(rng.random_range(-spread..spread), rng.random_range(-spread..spread), rng.random_range(-spread..spread));
    RigidTransform::new(so3_exp(&(axis * rng.random_range(0.0..1.5))), t)
}

pub fn yaw_pose(rng: &mut impl Rng, spread: f64) -> RigidTransform {
    RigidTransform::from_yaw(
        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        Vector3::new(rng.random_range(-spread..spread), rng.random_range(-spread..spread), rng.random_range(-1.0..1.0)),
    )
}

pub fn gaussian(rng: &mut impl Rng, sigma: f64) -> Vector3<f64> {
    use rand_distr::{Distribution, Normal};
    let n = Normal::new(0.0, sigma).unwrap();
    Vector3::new(n.sample(rng), n.sample(rng), n.sample(rng))
}

/// Upright pose at `p` with a random yaw.
pub fn upright(rng: &mut impl Rng, p: Vector3<f64>) -> RigidTransform {
    RigidTransform::from_yaw(rng.random_range(0.0..std::f64::consts::TAU), p)
}

/// A street-like scene of exact quadrics: walls (x-normal planes rotated
/// upright), vertical poles, trunks, shrubs and spheres.
pub fn street_records(rng: &mut impl Rng, n_each: usize) -> Vec<QuadricRecord> {
    use quadreg::scene::semantic;
    let mut out = Vec::new();
    let spot = |rng: &mut dyn rand::RngCore| Vector3::new(rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0), 0.0);
    for _ in 0..n_each {
        let p = spot(rng) + Vector3::new(0.0, 0.0, 1.5);
        out.push(record(QuadricKind::Plane, semantic::PLANE, Vector3::new(1.0, 1.0, 1.0), &upright(rng, p)));
        let mut r = out.last().unwrap().clone();
        r.s_f = [0.05, rng.random_range(2.0..8.0), 1.5];
        *out.last_mut().unwrap() = r;
    }
    for _ in 0..n_each {
        let p = spot(rng) + Vector3::new(0.0, 0.0, 2.0);
        let mut r = record(QuadricKind::Line, semantic::LINE, Vector3::new(1.0, 1.0, 1.0), &RigidTransform::from_translation(p));
        r.s_f = [0.05, 0.05, 2.0];
        out.push(r);
    }
    for _ in 0..n_each {
        let p = spot(rng) + Vector3::new(0.0, 0.0, 1.5);
        let rad = rng.random_range(0.15..0.5);
        let mut r = record(QuadricKind::Cylinder, semantic::TRUNK, Vector3::new(rad, rad, 1.0), &upright(rng, p));
        r.s_f = [rad, rad, 1.5];
        out.push(r);
    }
    for _ in 0..n_each {
        let p = spot(rng) + Vector3::new(0.0, 0.0, 1.0);
        let a = rng.random_range(0.5..1.0);
        out.push(record(QuadricKind::Ellipsoid, semantic::VEGETATION, Vector3::new(a, a * 1.5, a * 2.5), &upright(rng, p)));
    }
    for _ in 0..n_each {
        let p = spot(rng) + Vector3::new(0.0, 0.0, 0.8);
        let r = rng.random_range(0.4..1.2);
        out.push(record(QuadricKind::Sphere, semantic::VEHICLE, Vector3::new(r, r, r), &RigidTransform::from_translation(p)));
    }
    out
}
