//! KITTI-style trajectories: one pose per line, 12 numbers of a row-major 3×4.

use std::io::Write;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::transform::RigidTransform;

pub fn parse_poses(path: &Path, text: &str) -> Result<Vec<RigidTransform>> {
    let mut poses = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(path, k + 1, format!("bad number: {e}")))?;
        if v.len() != 12 {
            return Err(Error::parse(path, k + 1, format!("expected 12 values, found {}", v.len())));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::parse(path, k + 1, "non-finite value"));
        }
        let r = Matrix3::new(v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10]);
        let t = Vector3::new(v[3], v[7], v[11]);
        poses.push(RigidTransform::new(crate::transform::orthonormalize(&r), t));
    }
    Ok(poses)
}

pub fn write_poses(poses: &[RigidTransform], out: &mut impl Write) -> std::io::Result<()> {
    for p in poses {
        let r = &p.rotation;
        let t = &p.translation;
        writeln!(
            out,
            "{} {} {} {} {} {} {} {} {} {} {} {}",
            r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x,
            r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y,
            r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z
        )?;
    }
    Ok(())
}
