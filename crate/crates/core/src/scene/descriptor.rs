//! Fast point feature histograms (11 bins for each of three angular features).

use nalgebra::Vector3;

use super::grid::VoxelGrid;
use crate::cloud::{mean_and_covariance, principal_axes};

pub const DESCRIPTOR_BINS: usize = 33;
pub type Descriptor = [f64; DESCRIPTOR_BINS];

const FEATURE_BINS: usize = 11;
const MIN_NEIGHBORS: usize = 5;

fn uniform() -> Descriptor {
    [1.0 / DESCRIPTOR_BINS as f64; DESCRIPTOR_BINS]
}

fn subsample(idx: &mut Vec<usize>, max: usize) {
    if max > 0 && idx.len() > max {
        let n = idx.len();
        *idx = (0..max).map(|k| idx[k * n / max]).collect();
    }
}

/// PCA normals within `radius`, oriented toward `viewpoint`. Points with
/// fewer than five neighbors get `None`.
pub fn estimate_normals(points: &[Vector3<f64>], radius: f64, viewpoint: &Vector3<f64>, max_neighbors: usize) -> Vec<Option<Vector3<f64>>> {
    let grid = VoxelGrid::build(points, radius);
    let mut buf = Vec::new();
    points
        .iter()
        .map(|p| {
            grid.radius_search(points, p, radius, &mut buf);
            if buf.len() < MIN_NEIGHBORS {
                return None;
            }
            subsample(&mut buf, max_neighbors);
            let nb: Vec<_> = buf.iter().map(|&j| points[j]).collect();
            let (_, cov) = mean_and_covariance(&nb);
            let (_, axes) = principal_axes(&cov);
            let mut n = axes.column(2).into_owned();
            if n.dot(&(viewpoint - p)) < 0.0 {
                n = -n;
            }
            Some(n)
        })
        .collect()
}

/// Angular pair features `(α, φ, θ)` of the Darboux frame.
fn pair_features(p1: &Vector3<f64>, n1: &Vector3<f64>, p2: &Vector3<f64>, n2: &Vector3<f64>) -> Option<(f64, f64, f64)> {
    let mut d = p2 - p1;
    let len = d.norm();
    if len == 0.0 {
        return None;
    }
    let a1 = n1.dot(&d) / len;
    let a2 = n2.dot(&d) / len;
    let (u, other, f3) = if a1.abs().min(1.0).acos() > a2.abs().min(1.0).acos() {
        d = -d;
        (n2, n1, -a2)
    } else {
        (n1, n2, a1)
    };
    let v = d.cross(u);
    let vn = v.norm();
    if vn == 0.0 {
        return None;
    }
    let v = v / vn;
    let w = u.cross(&v);
    let f2 = v.dot(other);
    let f1 = w.dot(other).atan2(u.dot(other));
    Some((f1, f2, f3))
}

fn bin(value: f64, lo: f64, hi: f64) -> usize {
    let b = ((value - lo) / (hi - lo) * FEATURE_BINS as f64).floor();
    (b.max(0.0) as usize).min(FEATURE_BINS - 1)
}

/// Feature histograms over a point cloud with precomputed normals.
pub(crate) struct FpfhContext<'a> {
    points: &'a [Vector3<f64>],
    normals: &'a [Option<Vector3<f64>>],
    grid: VoxelGrid,
    radius: f64,
    max_neighbors: usize,
    spfh: Vec<Option<Option<Descriptor>>>,
}

impl<'a> FpfhContext<'a> {
    pub(crate) fn new(points: &'a [Vector3<f64>], normals: &'a [Option<Vector3<f64>>], radius: f64, max_neighbors: usize) -> Self {
        Self {
            points,
            normals,
            grid: VoxelGrid::build(points, radius),
            radius,
            max_neighbors,
            spfh: vec![None; points.len()],
        }
    }

    fn neighbors_of(&self, p: &Vector3<f64>, exclude: Option<usize>) -> Vec<usize> {
        let mut buf = Vec::new();
        self.grid.radius_search(self.points, p, self.radius, &mut buf);
        buf.retain(|&j| Some(j) != exclude && self.normals[j].is_some() && self.points[j] != *p);
        subsample(&mut buf, self.max_neighbors);
        buf
    }

    fn simple(&self, p: &Vector3<f64>, n: &Vector3<f64>, neighbors: &[usize]) -> Option<Descriptor> {
        let mut h = [0.0; DESCRIPTOR_BINS];
        let mut count = 0usize;
        for &j in neighbors {
            let nj = self.normals[j].as_ref().expect("filtered");
            if let Some((f1, f2, f3)) = pair_features(p, n, &self.points[j], nj) {
                h[bin(f1, -std::f64::consts::PI, std::f64::consts::PI)] += 1.0;
                h[FEATURE_BINS + bin(f2, -1.0, 1.0)] += 1.0;
                h[2 * FEATURE_BINS + bin(f3, -1.0, 1.0)] += 1.0;
                count += 1;
            }
        }
        if count == 0 {
            return None;
        }
        for v in h.iter_mut() {
            *v /= count as f64;
        }
        Some(h)
    }

    fn spfh_of(&mut self, i: usize) -> Option<Descriptor> {
        if let Some(cached) = self.spfh[i] {
            return cached;
        }
        let value = match self.normals[i] {
            Some(n) => {
                let nb = self.neighbors_of(&self.points[i], Some(i));
                self.simple(&self.points[i], &n, &nb)
            }
            None => None,
        };
        self.spfh[i] = Some(value);
        value
    }

    /// FPFH at `p` with normal `n`; `None` when the neighborhood is too thin.
    pub(crate) fn descriptor(&mut self, p: &Vector3<f64>, n: &Vector3<f64>) -> Option<Descriptor> {
        let nb = self.neighbors_of(p, None);
        if nb.len() < MIN_NEIGHBORS {
            return None;
        }
        let mut h = self.simple(p, n, &nb)?;
        let mut acc = [0.0; DESCRIPTOR_BINS];
        let mut used = 0usize;
        for &j in &nb {
            if let Some(s) = self.spfh_of(j) {
                let w = 1.0 / (self.points[j] - p).norm();
                for (a, v) in acc.iter_mut().zip(s.iter()) {
                    *a += w * v;
                }
                used += 1;
            }
        }
        if used > 0 {
            for (hv, a) in h.iter_mut().zip(acc.iter()) {
                *hv += a / used as f64;
            }
        }
        let total: f64 = h.iter().sum();
        if !(total > 0.0) {
            return None;
        }
        for v in h.iter_mut() {
            *v /= total;
        }
        Some(h)
    }
}

/// FPFH of `point` over `neighborhood`, normals estimated within the same
/// set and oriented toward the origin. Returns the descriptor and whether it
/// is the uniform fallback used for thin neighborhoods.
pub fn compute_descriptor(point: &Vector3<f64>, neighborhood: &[Vector3<f64>], radius: f64) -> (Descriptor, bool) {
    let mut pts = neighborhood.to_vec();
    pts.push(*point);
    let normals = estimate_normals(&pts, radius, &Vector3::zeros(), 0);
    let Some(n) = normals[pts.len() - 1] else {
        return (uniform(), true);
    };
    let mut ctx = FpfhContext::new(&pts, &normals, radius, 0);
    match ctx.descriptor(point, &n) {
        Some(d) => (d, false),
        None => (uniform(), true),
    }
}

pub fn l1_distance(a: &Descriptor, b: &Descriptor) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum()
}
