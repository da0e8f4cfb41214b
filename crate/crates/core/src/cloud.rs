use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::transform::RigidTransform;

/// Points in meters with optional per-point semantic labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub labels: Option<Vec<u32>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>) -> Self {
        Self { points, labels: None }
    }

    pub fn with_labels(points: Vec<Vector3<f64>>, labels: Vec<u32>) -> Result<Self> {
        let cloud = Self {
            points,
            labels: Some(labels),
        };
        cloud.validate()?;
        Ok(cloud)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self.points.iter().position(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(Error::InvalidInput(format!("point {i} has a non-finite coordinate")));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.points.len() {
                return Err(Error::InvalidInput(format!(
                    "{} labels for {} points",
                    labels.len(),
                    self.points.len()
                )));
            }
        }
        Ok(())
    }

    pub fn transformed(&self, t: &RigidTransform) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| t.apply(p)).collect(),
            labels: self.labels.clone(),
        }
    }

    pub fn label(&self, i: usize) -> Option<u32> {
        self.labels.as_ref().map(|l| l[i])
    }
}

pub fn centroid(points: &[Vector3<f64>]) -> Vector3<f64> {
    if points.is_empty() {
        return Vector3::zeros();
    }
    points.iter().fold(Vector3::zeros(), |acc, p| acc + p) / points.len() as f64
}

/// Centroid and population covariance (`1/n` normalization).
pub fn mean_and_covariance(points: &[Vector3<f64>]) -> (Vector3<f64>, nalgebra::Matrix3<f64>) {
    let c = centroid(points);
    let mut cov = nalgebra::Matrix3::zeros();
    for p in points {
        let d = p - c;
        cov += d * d.transpose();
    }
    if !points.is_empty() {
        cov /= points.len() as f64;
    }
    (c, cov)
}

/// Eigenvalues of a symmetric matrix sorted descending, with matching
/// eigenvector columns forming a right-handed frame.
pub fn principal_axes(cov: &nalgebra::Matrix3<f64>) -> (Vector3<f64>, nalgebra::Matrix3<f64>) {
    let eig = nalgebra::SymmetricEigen::new(*cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut values = Vector3::zeros();
    let mut vectors = nalgebra::Matrix3::zeros();
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        vectors.set_column(dst, &eig.eigenvectors.column(src).normalize());
    }
    if vectors.determinant() < 0.0 {
        let c = -vectors.column(2);
        vectors.set_column(2, &c);
    }
    (values, vectors)
}
