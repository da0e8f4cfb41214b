//! Candidate validation by semantic nearest neighbors and a robust quadric
//! distance.

use std::collections::BTreeMap;

use nalgebra::Vector3;

use super::residual::{is_irregular, is_key_structure, terms_for_pair, ResidualTerm};
use crate::scene::RecordGeometry;
use crate::transform::RigidTransform;

/// Dynamic covariance scaling: `s²r²` with `s = min(1, 2Φ/(Φ + r²))`.
/// Bounded above by `Φ`.
pub fn dcs(r: f64, phi: f64) -> f64 {
    let r2 = r * r;
    let s = (2.0 * phi / (phi + r2)).min(1.0);
    s * s * r2
}

/// One side of a registration problem, with decomposed geometry for every
/// quadric record.
#[derive(Debug, Clone)]
pub struct PreparedSide<'a> {
    pub labels: Vec<u32>,
    pub geometry: Vec<RecordGeometry>,
    pub ground_normal: &'a Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionSettings {
    pub delta_g_deg: f64,
    pub w_rot: f64,
    pub phi: f64,
    pub snn_max_distance: f64,
    pub support_distance: f64,
}

/// Residual terms of one pair, or `None` when either side is an irregular
/// key structure.
pub(crate) fn pair_terms(
    label: u32,
    gx: &RecordGeometry,
    gy: &RecordGeometry,
    ground_x: &Vector3<f64>,
    ground_y: &Vector3<f64>,
    delta_g_deg: f64,
) -> Option<Vec<ResidualTerm>> {
    if is_key_structure(label) && (is_irregular(gx, ground_x, delta_g_deg) || is_irregular(gy, ground_y, delta_g_deg)) {
        return None;
    }
    Some(terms_for_pair(gx, gy))
}

/// Greedy one-to-one nearest pairs on transformed full centers, per
/// shared label, within `max_distance`. Shorter distances are taken first;
/// ties go to the lower source, then target, index.
pub fn semantic_nearest_pairs(x: &PreparedSide, y: &PreparedSide, t: &RigidTransform, max_distance: f64) -> Vec<(usize, usize)> {
    let mut by_label: BTreeMap<u32, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (i, &l) in x.labels.iter().enumerate() {
        by_label.entry(l).or_default().0.push(i);
    }
    for (j, &l) in y.labels.iter().enumerate() {
        by_label.entry(l).or_default().1.push(j);
    }
    let moved: Vec<Vector3<f64>> = x.geometry.iter().map(|g| t.apply(&g.t_f)).collect();
    let mut out = Vec::new();
    for (xs, ys) in by_label.values() {
        let mut cand = Vec::new();
        for &i in xs {
            for &j in ys {
                let d = (moved[i] - y.geometry[j].t_f).norm();
                if d <= max_distance {
                    cand.push((d, i, j));
                }
            }
        }
        cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut used_x = vec![false; x.labels.len()];
        let mut used_y = vec![false; y.labels.len()];
        for (_, i, j) in cand {
            if !used_x[i] && !used_y[j] {
                used_x[i] = true;
                used_y[j] = true;
                out.push((i, j));
            }
        }
    }
    out.sort_unstable();
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Validation {
    /// Mean robust distance over all pair and pseudo-pair terms; `+∞`
    /// without any term.
    pub score: f64,
    pub pairs: usize,
    /// Pairs whose own term is within the support distance.
    pub support: usize,
}

pub fn validate(x: &PreparedSide, y: &PreparedSide, t: &RigidTransform, s: &SelectionSettings) -> Validation {
    let pairs = semantic_nearest_pairs(x, y, t, s.snn_max_distance);
    let sw = s.w_rot.sqrt();
    let mut total = 0.0;
    let mut count = 0usize;
    let mut support = 0usize;
    let mut used = 0usize;
    for &(i, j) in &pairs {
        let Some(terms) = pair_terms(x.labels[i], &x.geometry[i], &y.geometry[j], x.ground_normal, y.ground_normal, s.delta_g_deg) else {
            continue;
        };
        used += 1;
        for (k, term) in terms.iter().enumerate() {
            let e = term.evaluate(t);
            let r = sw * e.e_r.norm() + e.e_t.norm();
            if k == 0 && r <= s.support_distance {
                support += 1;
            }
            total += dcs(r, s.phi);
            count += 1;
        }
    }
    Validation {
        score: if count == 0 { f64::INFINITY } else { total / count as f64 },
        pairs: used,
        support,
    }
}

/// Index of the lowest score; ties go to the earlier candidate, which the
/// caller orders by level.
pub fn argmin_score(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, &s) in scores.iter().enumerate() {
        if !s.is_finite() {
            continue;
        }
        match best {
            Some(b) if scores[b] <= s => {}
            _ => best = Some(k),
        }
    }
    best
}
