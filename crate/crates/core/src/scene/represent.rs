use log::{debug, warn};
use nalgebra::Vector3;
use rayon::prelude::*;
use serde::Serialize;

use super::augment::{augment_points, FittedElement};
use super::descriptor::Descriptor;
use super::extract::{extract_ground, extract_lines, extract_objects, extract_planes};
use super::fit::{assign_quadric_type, fit_with_fallback};
use super::record::{build_record, select_top_k, QuadricRecord};
use super::{semantic, ElementSegment};
use crate::cloud::PointCloud;
use crate::config::SceneConfig;
use crate::error::{Error, Result};
use crate::quadric::{decompose, taubin_distance};
use crate::transform::RigidTransform;

/// Quadric records, augmented point records with their descriptors, and the
/// ground normal (`+z` when no ground was found).
#[derive(Debug, Clone, PartialEq)]
pub struct SceneRepresentation {
    pub records: Vec<QuadricRecord>,
    pub augmented: Vec<QuadricRecord>,
    pub descriptors: Vec<Descriptor>,
    pub ground_normal: Vector3<f64>,
}

impl SceneRepresentation {
    /// Quadric records followed by augmented point records.
    pub fn element_count(&self) -> usize {
        self.records.len() + self.augmented.len()
    }

    /// Element `i` in the combined indexing of [`Self::element_count`].
    pub fn element(&self, i: usize) -> &QuadricRecord {
        if i < self.records.len() {
            &self.records[i]
        } else {
            &self.augmented[i - self.records.len()]
        }
    }

    pub fn is_augmented(&self, i: usize) -> bool {
        i >= self.records.len()
    }

    /// Every element and the ground normal carried into the frame of `f`.
    /// Descriptors are rotation invariant and kept as they are.
    pub fn transformed(&self, f: &RigidTransform) -> Result<Self> {
        Ok(Self {
            records: self.records.iter().map(|r| r.transformed(f)).collect::<Result<_>>()?,
            augmented: self.augmented.iter().map(|r| r.transformed(f)).collect::<Result<_>>()?,
            descriptors: self.descriptors.clone(),
            ground_normal: f.rotation * self.ground_normal,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RepresentDiagnostics {
    pub points: usize,
    pub ground_found: bool,
    pub ground_segments: usize,
    pub plane_segments: usize,
    pub line_segments: usize,
    pub object_segments: usize,
    /// Segments fitted with a lower-rank type than assigned.
    pub fit_fallbacks: usize,
    /// Segments whose fit failed entirely.
    pub fit_failures: usize,
    /// Fits above the Taubin gate (kept, since no other fitter is available).
    pub taubin_gate_exceeded: usize,
    pub dropped_unclassified: usize,
    pub records_before_selection: usize,
    pub records: usize,
    pub augmented: usize,
    pub uniform_descriptors: usize,
}

fn remove(pool: &mut Vec<usize>, taken: &[ElementSegment], n: usize) {
    let mut mask = vec![false; n];
    for s in taken {
        for &i in &s.indices {
            mask[i] = true;
        }
    }
    pool.retain(|&i| !mask[i]);
}

/// Extraction, typed fitting, attribute fusion, per-label top-K selection
/// and sparse-scene augmentation.
pub fn represent(cloud: &PointCloud, cfg: &SceneConfig, seed: u64) -> Result<(SceneRepresentation, RepresentDiagnostics)> {
    cloud.validate()?;
    if cloud.is_empty() {
        return Err(Error::EmptyScene);
    }
    let n = cloud.len();
    let mut diag = RepresentDiagnostics {
        points: n,
        ..Default::default()
    };

    // Points already labeled with an object class skip structure extraction.
    let (mut structure, labeled_objects): (Vec<usize>, Vec<usize>) =
        (0..n).partition(|&i| !cloud.label(i).is_some_and(semantic::is_object_class));

    let mut segments: Vec<ElementSegment> = Vec::new();
    let ground_normal = match extract_ground(cloud, &structure, cfg, seed) {
        Ok((seg, normal)) => {
            diag.ground_found = true;
            diag.ground_segments = 1;
            remove(&mut structure, std::slice::from_ref(&seg), n);
            segments.push(seg);
            normal
        }
        Err(e) => {
            warn!("{e}; continuing without a ground record");
            Vector3::z()
        }
    };

    let planes = extract_planes(cloud, &structure, cfg);
    remove(&mut structure, &planes, n);
    diag.plane_segments = planes.len();
    segments.extend(planes);

    let lines = extract_lines(cloud, &structure, cfg, seed);
    remove(&mut structure, &lines, n);
    diag.line_segments = lines.len();
    segments.extend(lines);

    structure.extend(labeled_objects);
    structure.sort_unstable();
    let objects = extract_objects(cloud, &structure, cfg);
    diag.object_segments = objects.len();
    segments.extend(objects);
    debug!(
        "segments: ground {} planes {} lines {} objects {}",
        diag.ground_segments, diag.plane_segments, diag.line_segments, diag.object_segments
    );

    let fitted: Vec<_> = segments
        .par_iter()
        .map(|seg| {
            let fit = fit_with_fallback(seg, cfg.k_s, cfg.symmetry_tolerance)?;
            let taubin = taubin_distance(&seg.points, &fit.q)?;
            let record = build_record(seg.label, &fit, cfg.scale_floor)?;
            let kind = decompose(&record.quadric()?)?.kind;
            Ok::<_, Error>((fit.kind, taubin, record, kind))
        })
        .collect();

    let mut elements = Vec::new();
    for (k, res) in fitted.into_iter().enumerate() {
        match res {
            Ok((fit_kind, taubin, record, kind)) => {
                if fit_kind != assign_quadric_type(segments[k].label, segments[k].source) {
                    diag.fit_fallbacks += 1;
                }
                if taubin > cfg.delta_p {
                    diag.taubin_gate_exceeded += 1;
                }
                elements.push(FittedElement {
                    segment: k,
                    record,
                    kind,
                });
            }
            Err(Error::NotAQuadric(_)) => diag.dropped_unclassified += 1,
            Err(e) => {
                debug!("segment {k} not fitted: {e}");
                diag.fit_failures += 1;
            }
        }
    }
    diag.records_before_selection = elements.len();

    let records: Vec<QuadricRecord> = elements.iter().map(|e| e.record.clone()).collect();
    let kinds: Vec<_> = elements.iter().map(|e| e.kind).collect();
    let keep = select_top_k(&records, &kinds, cfg.k_e);
    let elements: Vec<FittedElement> = keep.iter().map(|&i| elements[i].clone()).collect();

    let (augmented, descriptors, flagged) = augment_points(cloud, &segments, &elements, cfg);
    diag.records = elements.len();
    diag.augmented = augmented.len();
    diag.uniform_descriptors = flagged;
    if elements.is_empty() && augmented.is_empty() {
        return Err(Error::EmptyScene);
    }
    Ok((
        SceneRepresentation {
            records: elements.into_iter().map(|e| e.record).collect(),
            augmented,
            descriptors,
            ground_normal,
        },
        diag,
    ))
}
