//! Putative correspondences: semantic-gated scale similarity for quadric
//! records, descriptor matching for augmented points.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadric::Indicator;
use crate::scene::{l1_distance, QuadricRecord, SceneRepresentation};

/// Indices use the combined element indexing of [`SceneRepresentation::element`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Correspondence {
    pub source: usize,
    pub target: usize,
    pub similarity: f64,
    pub augmented: bool,
}

fn similarity_masked(x: &QuadricRecord, y: &QuadricRecord, mask: &Indicator) -> f64 {
    let mut sq = 0.0;
    for i in 0..3 {
        if mask[i] == 1 {
            let d = x.s_f[i] - y.s_f[i];
            sq += d * d;
        }
    }
    -sq.sqrt()
}

fn scale_mask(r: &QuadricRecord) -> Result<Indicator> {
    Ok(r.geometry()?.i_s)
}

/// Negated distance between the meaningful scale components. The mask is
/// the component-wise AND of both records' scale indicators, so records of
/// the same type use that type's indicator.
pub fn quadric_similarity(x: &QuadricRecord, y: &QuadricRecord) -> Result<f64> {
    if x.label != y.label {
        return Err(Error::LabelMismatch(x.label, y.label));
    }
    let (mx, my) = (scale_mask(x)?, scale_mask(y)?);
    let mask = [mx[0] & my[0], mx[1] & my[1], mx[2] & my[2]];
    Ok(similarity_masked(x, y, &mask))
}

fn group_by_label(records: &[QuadricRecord]) -> BTreeMap<u32, Vec<usize>> {
    let mut g: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        g.entry(r.label).or_default().push(i);
    }
    g
}

/// `k` best columns of `row` by (similarity desc, index asc).
fn top_k(row: impl Iterator<Item = (usize, f64)>, k: usize) -> Vec<usize> {
    let mut v: Vec<(usize, f64)> = row.collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    v.truncate(k);
    v.into_iter().map(|(i, _)| i).collect()
}

/// Mutual top-`k_s` quadric matches per shared label, followed by augmented
/// point matches (mutual nearest descriptor with a ratio test, then the
/// label filter).
pub fn init_correspondences(x: &SceneRepresentation, y: &SceneRepresentation, k_s: usize, descriptor_ratio: f64) -> Result<Vec<Correspondence>> {
    let gx = group_by_label(&x.records);
    let gy = group_by_label(&y.records);
    let shared_records = gx.keys().any(|l| gy.contains_key(l));
    let ax = group_by_label(&x.augmented);
    let ay = group_by_label(&y.augmented);
    if !shared_records && !ax.keys().any(|l| ay.contains_key(l)) {
        return Err(Error::NoSharedSemantics);
    }
    let mask_x: Vec<Indicator> = x.records.iter().map(scale_mask).collect::<Result<_>>()?;
    let mask_y: Vec<Indicator> = y.records.iter().map(scale_mask).collect::<Result<_>>()?;

    let mut out = Vec::new();
    for (label, xs) in &gx {
        let Some(ys) = gy.get(label) else { continue };
        let sim: Vec<Vec<f64>> = xs
            .iter()
            .map(|&i| {
                ys.iter()
                    .map(|&j| {
                        let (a, b) = (mask_x[i], mask_y[j]);
                        similarity_masked(&x.records[i], &y.records[j], &[a[0] & b[0], a[1] & b[1], a[2] & b[2]])
                    })
                    .collect()
            })
            .collect();
        let mut from_y = vec![false; xs.len() * ys.len()];
        for b in 0..ys.len() {
            for a in top_k((0..xs.len()).map(|a| (a, sim[a][b])), k_s) {
                from_y[a * ys.len() + b] = true;
            }
        }
        for a in 0..xs.len() {
            let mut picks = top_k(sim[a].iter().copied().enumerate(), k_s);
            picks.sort_unstable();
            for b in picks {
                if from_y[a * ys.len() + b] {
                    out.push(Correspondence {
                        source: xs[a],
                        target: ys[b],
                        similarity: sim[a][b],
                        augmented: false,
                    });
                }
            }
        }
    }
    out.extend(match_descriptors(x, y, descriptor_ratio));
    Ok(out)
}

/// Nearest and second-nearest indices and distances of `d` among `set`.
fn two_nearest(d: &crate::scene::Descriptor, set: &[crate::scene::Descriptor]) -> Option<(usize, f64, f64)> {
    let mut best = (usize::MAX, f64::INFINITY);
    let mut second = f64::INFINITY;
    for (j, e) in set.iter().enumerate() {
        let dist = l1_distance(d, e);
        if dist < best.1 {
            second = best.1;
            best = (j, dist);
        } else if dist < second {
            second = dist;
        }
    }
    (best.0 != usize::MAX).then_some((best.0, best.1, second))
}

fn match_descriptors(x: &SceneRepresentation, y: &SceneRepresentation, ratio: f64) -> Vec<Correspondence> {
    if x.descriptors.is_empty() || y.descriptors.is_empty() {
        return Vec::new();
    }
    let fwd: Vec<_> = x.descriptors.par_iter().map(|d| two_nearest(d, &y.descriptors)).collect();
    let bwd: Vec<_> = y.descriptors.par_iter().map(|d| two_nearest(d, &x.descriptors)).collect();
    let (nx, ny) = (x.records.len(), y.records.len());
    let mut out = Vec::new();
    for (i, f) in fwd.iter().enumerate() {
        let Some((j, best, second)) = *f else { continue };
        // Identical distances (e.g. uniform fallback histograms) fail the ratio test.
        if !(best < ratio * second) {
            continue;
        }
        if bwd[j].map(|b| b.0) != Some(i) {
            continue;
        }
        if x.augmented[i].label != y.augmented[j].label {
            continue;
        }
        out.push(Correspondence {
            source: nx + i,
            target: ny + j,
            similarity: 0.0,
            augmented: true,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadric::{compose, CanonicalForm, QuadricKind};
    use crate::scene::semantic;
    use crate::transform::RigidTransform;
    use nalgebra::Vector3;

    fn sphere(r: f64, c: Vector3<f64>) -> QuadricRecord {
        let q = compose(&CanonicalForm::for_kind(QuadricKind::Sphere, &Vector3::new(r, r, r)).unwrap(), &RigidTransform::from_translation(c));
        let q = crate::quadric::normalize(&q).unwrap();
        QuadricRecord {
            label: semantic::OBJECT,
            q: q.flatten(),
            s_f: [r; 3],
            eta_f: [1.0, 0.0, 0.0, 0.0],
            t_f: [c.x, c.y, c.z],
        }
    }

    fn scene(records: Vec<QuadricRecord>) -> SceneRepresentation {
        SceneRepresentation {
            records,
            augmented: Vec::new(),
            descriptors: Vec::new(),
            ground_normal: Vector3::z(),
        }
    }

    #[test]
    fn sphere_radius_two_vs_three() {
        let a = sphere(2.0, Vector3::zeros());
        let b = sphere(3.0, Vector3::new(1.0, 0.0, 0.0));
        assert!((quadric_similarity(&a, &b).unwrap() + 3f64.sqrt()).abs() < 1e-7);
        assert_eq!(quadric_similarity(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn planes_ignore_statistical_scale() {
        let plane = |s: f64| QuadricRecord {
            label: semantic::PLANE,
            q: [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, -2.0, 4.0],
            s_f: [s, 2.0 * s, 0.05],
            eta_f: [1.0, 0.0, 0.0, 0.0],
            t_f: [0.0, 0.0, 2.0],
        };
        assert_eq!(quadric_similarity(&plane(1.0), &plane(7.0)).unwrap(), 0.0);
    }

    #[test]
    fn label_mismatch() {
        let a = sphere(1.0, Vector3::zeros());
        let mut b = a.clone();
        b.label = semantic::LINE;
        assert!(matches!(quadric_similarity(&a, &b), Err(Error::LabelMismatch(_, _))));
    }

    #[test]
    fn single_identical_record() {
        let x = scene(vec![sphere(1.0, Vector3::zeros())]);
        let c = init_correspondences(&x, &x, 20, 0.9).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!((c[0].source, c[0].target), (0, 0));
    }

    #[test]
    fn no_shared_labels() {
        let x = scene(vec![sphere(1.0, Vector3::zeros())]);
        let mut r = sphere(1.0, Vector3::zeros());
        r.label = semantic::VEHICLE;
        let y = scene(vec![r]);
        assert!(matches!(init_correspondences(&x, &y, 20, 0.9), Err(Error::NoSharedSemantics)));
    }

    #[test]
    fn mutual_top_k_picks_similar_radii() {
        let radii_x = [1.0, 2.0, 3.0];
        let radii_y = [3.05, 1.02, 2.01];
        let x = scene(radii_x.iter().map(|&r| sphere(r, Vector3::zeros())).collect());
        let y = scene(radii_y.iter().map(|&r| sphere(r, Vector3::zeros())).collect());
        let c = init_correspondences(&x, &y, 1, 0.9).unwrap();
        let pairs: Vec<_> = c.iter().map(|c| (c.source, c.target)).collect();
        assert_eq!(pairs, vec![(0, 1), (1, 2), (2, 0)]);
    }

    #[test]
    fn descriptor_matches_are_mutual_and_label_filtered() {
        let mut x = scene(vec![]);
        let mut y = scene(vec![]);
        let d = |k: usize| {
            let mut h = [0.0; 33];
            h[k] = 1.0;
            h
        };
        for k in 0..3 {
            x.augmented.push(QuadricRecord::point(semantic::PLANE, &Vector3::new(k as f64, 0.0, 0.0), 0.05));
            x.descriptors.push(d(k));
        }
        for (k, label) in [(2, semantic::PLANE), (0, semantic::PLANE), (1, semantic::LINE)] {
            y.augmented.push(QuadricRecord::point(label, &Vector3::zeros(), 0.05));
            y.descriptors.push(d(k));
        }
        let c = init_correspondences(&x, &y, 20, 0.9).unwrap();
        let pairs: Vec<_> = c.iter().map(|c| (c.source, c.target, c.augmented)).collect();
        assert_eq!(pairs, vec![(0, 1, true), (2, 0, true)]);
    }
}
