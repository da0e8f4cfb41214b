//! Point cloud, label and trajectory file formats.

mod labels;
mod pcd;
mod ply;
mod poses;

use std::path::Path;

pub use labels::parse_labels;
pub use pcd::{parse_pcd, write_pcd};
pub use ply::{parse_ply, write_ply};
pub use poses::{parse_poses, write_poses};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::transform::RigidTransform;

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Reads a `.ply` or `.pcd` cloud, chosen by extension.
pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    match ext.as_deref() {
        Some("ply") => {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            parse_ply(path, &bytes)
        }
        Some("pcd") => parse_pcd(path, &read_text(path)?),
        _ => Err(Error::InvalidInput(format!(
            "{}: unsupported cloud extension (expected .ply or .pcd)",
            path.display()
        ))),
    }
}

pub fn write_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut buf = Vec::new();
    let res = match path.extension().and_then(|e| e.to_str()) {
        Some("pcd") => write_pcd(cloud, &mut buf),
        _ => write_ply(cloud, &mut buf),
    };
    res.and_then(|_| std::fs::write(path, buf)).map_err(|e| Error::io(path, e))
}

/// Reads a cloud and attaches labels from a separate file.
pub fn read_cloud_with_labels(path: &Path, labels: &Path) -> Result<PointCloud> {
    let mut cloud = read_cloud(path)?;
    let l = parse_labels(labels, &read_text(labels)?)?;
    if l.len() != cloud.len() {
        return Err(Error::InvalidInput(format!(
            "{}: {} labels for {} points",
            labels.display(),
            l.len(),
            cloud.len()
        )));
    }
    cloud.labels = Some(l);
    Ok(cloud)
}

pub fn read_poses(path: &Path) -> Result<Vec<RigidTransform>> {
    parse_poses(path, &read_text(path)?)
}
