//! Point augmentation for scenes with few quadrics.

use std::collections::BTreeMap;

use nalgebra::Vector3;

use super::descriptor::{Descriptor, FpfhContext, DESCRIPTOR_BINS};
use super::grid::{voxel_downsample, VoxelGrid};
use super::record::{record_size, QuadricRecord};
use super::{ElementSegment, Source};
use crate::cloud::{mean_and_covariance, principal_axes, PointCloud};
use crate::config::SceneConfig;
use crate::quadric::QuadricKind;

/// A record together with the segment it was fitted from.
#[derive(Debug, Clone)]
pub struct FittedElement {
    pub segment: usize,
    pub record: QuadricRecord,
    pub kind: QuadricKind,
}

/// Down-sampled points of the `k_a` largest elements per label, each with an
/// FPFH descriptor computed on the down-sampled cloud. Nothing is produced
/// once the scene holds `delta_a` records or more. Ground is not augmented.
///
/// Returned records are point-type; the second vector holds the matching
/// descriptors and the count of uniform fallbacks.
pub fn augment_points(
    cloud: &PointCloud,
    segments: &[ElementSegment],
    elements: &[FittedElement],
    cfg: &SceneConfig,
) -> (Vec<QuadricRecord>, Vec<Descriptor>, usize) {
    if elements.len() >= cfg.delta_a {
        return (Vec::new(), Vec::new(), 0);
    }
    let mut by_label: BTreeMap<u32, Vec<(f64, usize)>> = BTreeMap::new();
    for (k, e) in elements.iter().enumerate() {
        if segments[e.segment].source == Source::Ground {
            continue;
        }
        by_label
            .entry(e.record.label)
            .or_default()
            .push((record_size(&e.record, e.kind), k));
    }

    let support = voxel_downsample(&cloud.points, cfg.augment_voxel);
    let radius = cfg.descriptor_radius;
    let viewpoint = Vector3::zeros();
    let normals = super::descriptor::estimate_normals(&support, radius, &viewpoint, cfg.descriptor_max_neighbors);
    let grid = VoxelGrid::build(&support, radius);
    let mut ctx = FpfhContext::new(&support, &normals, radius, cfg.descriptor_max_neighbors);

    let mut records = Vec::new();
    let mut descriptors = Vec::new();
    let mut flagged = 0;
    let mut buf = Vec::new();
    for (label, mut sized) in by_label {
        sized.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, k) in sized.iter().take(cfg.k_a) {
            let seg = &segments[elements[k].segment];
            for p in voxel_downsample(&seg.points, cfg.augment_voxel) {
                grid.radius_search(&support, &p, radius, &mut buf);
                let d = if buf.len() >= 5 {
                    let nb: Vec<_> = buf.iter().map(|&j| support[j]).collect();
                    let (_, cov) = mean_and_covariance(&nb);
                    let (_, axes) = principal_axes(&cov);
                    let mut n = axes.column(2).into_owned();
                    if n.dot(&(viewpoint - p)) < 0.0 {
                        n = -n;
                    }
                    ctx.descriptor(&p, &n)
                } else {
                    None
                };
                let d = d.unwrap_or_else(|| {
                    flagged += 1;
                    [1.0 / DESCRIPTOR_BINS as f64; DESCRIPTOR_BINS]
                });
                records.push(QuadricRecord::point(label, &p, cfg.scale_floor));
                descriptors.push(d);
            }
        }
    }
    (records, descriptors, flagged)
}
