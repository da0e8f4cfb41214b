//! Per-pair registration metrics and their dataset aggregate.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::config::MetricsConfig;
use crate::transform::{rotation_angle_between, RigidTransform};

/// Relative translation error, meters.
pub fn rte(estimate: &RigidTransform, gt: &RigidTransform) -> f64 {
    (gt.translation - estimate.translation).norm()
}

/// Relative rotation error, degrees in `[0, 180]`.
pub fn rre(estimate: &RigidTransform, gt: &RigidTransform) -> f64 {
    rotation_angle_between(&estimate.rotation, &gt.rotation).to_degrees()
}

/// Correspondences whose GT-transformed source center lies within
/// `threshold` of the target center.
pub fn count_inliers(centers: &[(Vector3<f64>, Vector3<f64>)], gt: &RigidTransform, threshold: f64) -> usize {
    centers.iter().filter(|(x, y)| (gt.apply(x) - y).norm() <= threshold).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub num_correspondences: usize,
    pub inliers: usize,
    pub inlier_ratio: f64,
    /// At least `min_inliers` inlier correspondences.
    pub matched: bool,
    /// `None` when registration reported failure.
    pub rte_m: Option<f64>,
    pub rre_deg: Option<f64>,
    pub success: bool,
    pub runtime_ms: f64,
    pub storage_bytes: usize,
}

/// Metrics of one registration result. `centers` holds the source and
/// target centers of every putative correspondence.
pub fn compute_metrics(
    estimate: Option<&RigidTransform>,
    gt: &RigidTransform,
    centers: &[(Vector3<f64>, Vector3<f64>)],
    cfg: &MetricsConfig,
) -> PairMetrics {
    let inliers = count_inliers(centers, gt, cfg.inlier_threshold);
    let (rte_m, rre_deg) = match estimate {
        Some(t) => (Some(rte(t, gt)), Some(rre(t, gt))),
        None => (None, None),
    };
    let success = matches!((rte_m, rre_deg), (Some(t), Some(r)) if t <= cfg.rte_max && r <= cfg.rre_max_deg);
    PairMetrics {
        num_correspondences: centers.len(),
        inliers,
        inlier_ratio: if centers.is_empty() { 0.0 } else { inliers as f64 / centers.len() as f64 },
        matched: inliers >= cfg.min_inliers,
        rte_m,
        rre_deg,
        success,
        runtime_ms: 0.0,
        storage_bytes: 0,
    }
}

/// Dataset aggregate. Ratios and counts are means over pairs; RTE and RRE
/// are means over successful pairs (`None` without any success).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub pairs: usize,
    pub num_correspondences: f64,
    pub inlier_ratio: f64,
    pub correspondence_recall: f64,
    pub success_rate: f64,
    pub rte_m: Option<f64>,
    pub rre_deg: Option<f64>,
    pub runtime_ms: f64,
    pub storage_bytes: f64,
}

impl MetricsReport {
    pub fn aggregate(rows: &[PairMetrics]) -> Self {
        let n = rows.len();
        let mean = |f: &dyn Fn(&PairMetrics) -> f64| if n == 0 { 0.0 } else { rows.iter().map(f).sum::<f64>() / n as f64 };
        let ok: Vec<&PairMetrics> = rows.iter().filter(|r| r.success).collect();
        let ok_mean = |f: &dyn Fn(&PairMetrics) -> f64| {
            if ok.is_empty() {
                None
            } else {
                Some(ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64)
            }
        };
        Self {
            pairs: n,
            num_correspondences: mean(&|r| r.num_correspondences as f64),
            inlier_ratio: mean(&|r| r.inlier_ratio),
            correspondence_recall: mean(&|r| f64::from(u8::from(r.matched))),
            success_rate: mean(&|r| f64::from(u8::from(r.success))),
            rte_m: ok_mean(&|r| r.rte_m.unwrap_or(0.0)),
            rre_deg: ok_mean(&|r| r.rre_deg.unwrap_or(0.0)),
            runtime_ms: mean(&|r| r.runtime_ms),
            storage_bytes: mean(&|r| r.storage_bytes as f64),
        }
    }
}
