//! Ground, plane, line and object extraction.

use std::collections::{BTreeMap, HashMap};

use nalgebra::Vector3;
use rand::Rng;

use super::grid::{euclidean_clusters, neighbors26, Key, VoxelGrid};
use super::{seeded_rng, semantic, ElementSegment, Source};
use crate::cloud::{mean_and_covariance, principal_axes, PointCloud};
use crate::config::SceneConfig;
use crate::error::{Error, Result};

const GROUND_SALT: u64 = 1;
const LINE_SALT: u64 = 2;
/// Upper bound on band points scored per RANSAC hypothesis.
const RANSAC_SCORE_SAMPLES: usize = 4000;
const MIN_VOXEL_POINTS: usize = 6;

fn plane_fit(points: impl Iterator<Item = Vector3<f64>>) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
    let pts: Vec<_> = points.collect();
    let (c, cov) = mean_and_covariance(&pts);
    let (vals, vecs) = principal_axes(&cov);
    (c, vecs.column(2).into_owned(), vals)
}

/// Lowest-band RANSAC plane refined by PCA. Returns the ground segment (every
/// pool point within the inlier threshold) and the upward unit normal.
pub fn extract_ground(
    cloud: &PointCloud,
    pool: &[usize],
    cfg: &SceneConfig,
    seed: u64,
) -> Result<(ElementSegment, Vector3<f64>)> {
    let pts = &cloud.points;
    if pool.len() < 3 {
        return Err(Error::NoGround);
    }
    let mut zs: Vec<f64> = pool.iter().map(|&i| pts[i].z).collect();
    zs.sort_by(f64::total_cmp);
    let cut_idx = ((cfg.ground_height_band * zs.len() as f64) as usize).min(zs.len() - 1);
    let cutoff = zs[cut_idx];
    let band: Vec<usize> = pool.iter().copied().filter(|&i| pts[i].z <= cutoff).collect();
    if band.len() < 3 {
        return Err(Error::NoGround);
    }
    let stride = band.len().div_ceil(RANSAC_SCORE_SAMPLES);
    let scored: Vec<usize> = band.iter().copied().step_by(stride).collect();
    let cos_tilt = cfg.ground_max_tilt_deg.to_radians().cos();
    let thr = cfg.ground_threshold;

    let mut rng = seeded_rng(seed, GROUND_SALT);
    let mut best: Option<(usize, Vector3<f64>, Vector3<f64>)> = None;
    for _ in 0..cfg.ransac_iterations {
        let a = pts[band[rng.random_range(0..band.len())]];
        let b = pts[band[rng.random_range(0..band.len())]];
        let c = pts[band[rng.random_range(0..band.len())]];
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        if len < 1e-9 {
            continue;
        }
        let n = n / len;
        if n.z.abs() < cos_tilt {
            continue;
        }
        let count = scored.iter().filter(|&&i| n.dot(&(pts[i] - a)).abs() < thr).count();
        if best.as_ref().is_none_or(|(bc, _, _)| count > *bc) {
            best = Some((count, n, a));
        }
    }
    let (count, n, a) = best.ok_or(Error::NoGround)?;
    if (count as f64) < cfg.ground_min_support * scored.len() as f64 {
        return Err(Error::NoGround);
    }

    let inliers = band
        .iter()
        .map(|&i| pts[i])
        .filter(|p| n.dot(&(p - a)).abs() < thr);
    let (c, mut normal, _) = plane_fit(inliers);
    if normal.z < 0.0 {
        normal = -normal;
    }
    if normal.z < cos_tilt {
        return Err(Error::NoGround);
    }
    let band_support = band.iter().filter(|&&i| normal.dot(&(pts[i] - c)).abs() < thr).count();
    if (band_support as f64) < cfg.ground_min_support * band.len() as f64 {
        return Err(Error::NoGround);
    }
    let members: Vec<usize> = pool
        .iter()
        .copied()
        .filter(|&i| normal.dot(&(pts[i] - c)).abs() < thr)
        .collect();
    if !locally_horizontal(pts, &members, &normal, cos_tilt) {
        return Err(Error::NoGround);
    }
    Ok((
        ElementSegment::from_indices(pts, members, semantic::GROUND, Source::Ground),
        normal,
    ))
}

/// A horizontal slab through vertical structures also collects many inliers;
/// real ground is flat at the local scale as well.
fn locally_horizontal(pts: &[Vector3<f64>], members: &[usize], normal: &Vector3<f64>, cos_tilt: f64) -> bool {
    const PROBES: usize = 100;
    const RADIUS: f64 = 1.0;
    if members.len() < 10 {
        return false;
    }
    let grid = VoxelGrid::build_subset(pts, members.iter().copied(), RADIUS);
    let stride = members.len().div_ceil(PROBES);
    let mut buf = Vec::new();
    let (mut probed, mut flat) = (0usize, 0usize);
    for &i in members.iter().step_by(stride) {
        grid.radius_search(pts, &pts[i], RADIUS, &mut buf);
        if buf.len() < 5 {
            continue;
        }
        probed += 1;
        let (_, local, vals) = plane_fit(buf.iter().map(|&j| pts[j]));
        if local.dot(normal).abs() >= cos_tilt && vals[2] < 0.25 * vals[1] {
            flat += 1;
        }
    }
    probed > 0 && 2 * flat >= probed
}

struct VoxelPlane {
    centroid: Vector3<f64>,
    normal: Vector3<f64>,
    ratio: f64,
}

/// Voxel-wise planarity followed by region growing over face, edge and
/// corner neighbors.
pub fn extract_planes(cloud: &PointCloud, pool: &[usize], cfg: &SceneConfig) -> Vec<ElementSegment> {
    let pts = &cloud.points;
    let grid = VoxelGrid::build_subset(pts, pool.iter().copied(), cfg.voxel_size);
    let mut planar: HashMap<Key, VoxelPlane> = HashMap::new();
    for key in grid.keys() {
        let cell = grid.cell(key);
        if cell.len() < MIN_VOXEL_POINTS {
            continue;
        }
        let (centroid, normal, vals) = plane_fit(cell.iter().map(|&i| pts[i]));
        if vals[1] <= 0.0 {
            continue;
        }
        let ratio = vals[2] / vals[1];
        if ratio < cfg.plane_ratio {
            planar.insert(
                *key,
                VoxelPlane {
                    centroid,
                    normal,
                    ratio,
                },
            );
        }
    }

    let mut seeds: Vec<&Key> = planar.keys().collect();
    seeds.sort_by(|a, b| planar[*a].ratio.total_cmp(&planar[*b].ratio).then(a.cmp(b)));
    let cos_normal = cfg.plane_normal_deg.to_radians().cos();
    let mut region_of: HashMap<Key, usize> = HashMap::new();
    let mut regions: Vec<Vec<Key>> = Vec::new();
    for seed in seeds {
        if region_of.contains_key(seed) {
            continue;
        }
        let id = regions.len();
        let seed_normal = planar[seed].normal;
        region_of.insert(*seed, id);
        let mut members = vec![*seed];
        let mut head = 0;
        while head < members.len() {
            let cur = members[head];
            head += 1;
            let vp = &planar[&cur];
            for nb in neighbors26(&cur) {
                if region_of.contains_key(&nb) {
                    continue;
                }
                let Some(np) = planar.get(&nb) else { continue };
                let aligned = np.normal.dot(&vp.normal).abs() >= cos_normal
                    && np.normal.dot(&seed_normal).abs() >= cos_normal;
                let d = np.centroid - vp.centroid;
                let coplanar = vp.normal.dot(&d).abs() < cfg.plane_coplanar_distance
                    && np.normal.dot(&d).abs() < cfg.plane_coplanar_distance;
                if aligned && coplanar {
                    region_of.insert(nb, id);
                    members.push(nb);
                }
            }
        }
        regions.push(members);
    }

    let mut taken = vec![false; pts.len()];
    let mut segments = Vec::new();
    for voxels in regions {
        if voxels.len() < cfg.plane_min_voxels {
            continue;
        }
        let mut idx: Vec<usize> = voxels.iter().flat_map(|k| grid.cell(k).iter().copied()).collect();
        if idx.len() < cfg.min_plane_points {
            continue;
        }
        let (c, n, _) = plane_fit(idx.iter().map(|&i| pts[i]));
        // Absorb nearby co-planar points from non-planar border voxels.
        let mut border: Vec<Key> = voxels
            .iter()
            .flat_map(|k| neighbors26(k).collect::<Vec<_>>())
            .filter(|k| !region_of.contains_key(k) && grid.contains(k))
            .collect();
        border.sort_unstable();
        border.dedup();
        for k in &border {
            idx.extend(
                grid.cell(k)
                    .iter()
                    .copied()
                    .filter(|&i| n.dot(&(pts[i] - c)).abs() < cfg.plane_coplanar_distance),
            );
        }
        idx.sort_unstable();
        idx.dedup();
        idx.retain(|&i| !taken[i]);
        for &i in &idx {
            taken[i] = true;
        }
        if idx.len() >= cfg.min_plane_points {
            segments.push(ElementSegment::from_indices(pts, idx, semantic::PLANE, Source::Plane));
        }
    }
    cap_segments(segments, cfg.k_p)
}

/// Keeps the `cap` largest segments, then restores order by first index.
fn cap_segments(mut segments: Vec<ElementSegment>, cap: usize) -> Vec<ElementSegment> {
    segments.sort_by(|a, b| b.len().cmp(&a.len()).then(a.indices[0].cmp(&b.indices[0])));
    segments.truncate(cap);
    segments.sort_by_key(|s| s.indices[0]);
    segments
}

fn fit_line_ransac(points: &[Vector3<f64>], radius: f64, iterations: usize, rng: &mut impl Rng) -> usize {
    let mut best = 0;
    for _ in 0..iterations {
        let a = points[rng.random_range(0..points.len())];
        let b = points[rng.random_range(0..points.len())];
        let dir = b - a;
        let len = dir.norm();
        if len < 1e-6 {
            continue;
        }
        let dir = dir / len;
        let count = points
            .iter()
            .filter(|p| {
                let d = *p - a;
                (d - dir * d.dot(&dir)).norm() < radius
            })
            .count();
        best = best.max(count);
    }
    best
}

/// Euclidean clusters of `pool` that are elongated and well explained by a
/// single 3D line.
pub fn extract_lines(cloud: &PointCloud, pool: &[usize], cfg: &SceneConfig, seed: u64) -> Vec<ElementSegment> {
    let pts = &cloud.points;
    let clusters = euclidean_clusters(pts, pool, cfg.cluster_distance, cfg.min_line_points);
    let mut lines = Vec::new();
    for cluster in clusters {
        let cpts: Vec<Vector3<f64>> = cluster.iter().map(|&i| pts[i]).collect();
        let (_, cov) = mean_and_covariance(&cpts);
        let (vals, _) = principal_axes(&cov);
        if vals[1] > 0.0 && vals[0] / vals[1] < cfg.line_elongation {
            continue;
        }
        let mut rng = seeded_rng(seed, LINE_SALT ^ ((cluster[0] as u64) << 8));
        let inliers = fit_line_ransac(&cpts, cfg.line_inlier_radius, cfg.ransac_iterations.min(100), &mut rng);
        if (inliers as f64) >= cfg.line_inlier_fraction * cpts.len() as f64 && inliers >= cfg.min_line_points {
            lines.push(ElementSegment::from_indices(pts, cluster, semantic::LINE, Source::Line));
        }
    }
    cap_segments(lines, cfg.k_l)
}

/// Clusters of `pool`. Points carrying an object-class label are clustered
/// within their class and keep it; everything else becomes a generic object.
pub fn extract_objects(cloud: &PointCloud, pool: &[usize], cfg: &SceneConfig) -> Vec<ElementSegment> {
    let pts = &cloud.points;
    let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for &i in pool {
        let label = match cloud.label(i) {
            Some(l) if semantic::is_object_class(l) => l,
            _ => semantic::OBJECT,
        };
        groups.entry(label).or_default().push(i);
    }
    let mut objects = Vec::new();
    for (label, idx) in groups {
        for cluster in euclidean_clusters(pts, &idx, cfg.cluster_distance, cfg.min_object_points) {
            objects.push(ElementSegment::from_indices(pts, cluster, label, Source::Object));
        }
    }
    cap_segments(objects, cfg.k_o)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn cfg() -> SceneConfig {
        SceneConfig::default()
    }

    fn all(c: &PointCloud) -> Vec<usize> {
        (0..c.len()).collect()
    }

    fn ground_patch(rng: &mut ChaCha8Rng, n: usize, half: f64, tilt: f64, noise: f64) -> Vec<Vector3<f64>> {
        let nz = Normal::new(0.0, noise.max(1e-12)).unwrap();
        (0..n)
            .map(|_| {
                let x = rng.random_range(-half..half);
                let y = rng.random_range(-half..half);
                Vector3::new(x, y, y * tilt.tan() + if noise > 0.0 { nz.sample(rng) } else { 0.0 })
            })
            .collect()
    }

    fn boxes(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vector3<f64>> {
        (0..n)
            .map(|k| {
                let cx = [-8.0, 4.0, 9.0][k % 3];
                Vector3::new(
                    cx + rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(0.5..2.5),
                )
            })
            .collect()
    }

    #[test]
    fn flat_ground_with_boxes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut pts = ground_patch(&mut rng, 6000, 20.0, 0.0, 0.02);
        let n_ground = pts.len();
        pts.extend(boxes(&mut rng, 3000));
        let cloud = PointCloud::new(pts);
        let (seg, normal) = extract_ground(&cloud, &all(&cloud), &cfg(), 0).unwrap();
        assert!(normal.dot(&Vector3::z()).acos().to_degrees() < 1.0);
        let hits = seg.indices.iter().filter(|&&i| i < n_ground).count();
        assert!(hits as f64 >= 0.95 * n_ground as f64);
    }

    #[test]
    fn tilted_ground() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let tilt = 5f64.to_radians();
        let cloud = PointCloud::new(ground_patch(&mut rng, 8000, 20.0, tilt, 0.03));
        let (_, normal) = extract_ground(&cloud, &all(&cloud), &cfg(), 0).unwrap();
        let truth = Vector3::new(0.0, -tilt.sin(), tilt.cos());
        assert!(normal.dot(&truth).acos().to_degrees() < 1.0);
    }

    #[test]
    fn no_ground_above_two_meters() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pts = Vec::new();
        // Two vertical walls and a blob, nothing horizontal.
        for _ in 0..3000 {
            pts.push(Vector3::new(rng.random_range(-5.0..5.0), 4.0, rng.random_range(2.0..6.0)));
            pts.push(Vector3::new(-6.0, rng.random_range(-5.0..5.0), rng.random_range(2.0..6.0)));
        }
        let nd = Normal::new(0.0, 0.7).unwrap();
        for _ in 0..2000 {
            pts.push(Vector3::new(nd.sample(&mut rng) + 2.0, nd.sample(&mut rng), nd.sample(&mut rng) + 4.0));
        }
        let cloud = PointCloud::new(pts);
        assert!(matches!(extract_ground(&cloud, &all(&cloud), &cfg(), 0), Err(Error::NoGround)));
    }

    fn wall(rng: &mut ChaCha8Rng, origin: Vector3<f64>, along: Vector3<f64>, length: f64, n: usize) -> Vec<Vector3<f64>> {
        let nz = Normal::new(0.0, 0.05).unwrap();
        let normal = along.cross(&Vector3::z());
        (0..n)
            .map(|_| origin + along * rng.random_range(0.0..length) + Vector3::z() * rng.random_range(0.0..3.0) + normal * nz.sample(rng))
            .collect()
    }

    #[test]
    fn single_wall_is_one_segment() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cloud = PointCloud::new(wall(&mut rng, Vector3::new(2.0, 3.0, 0.0), Vector3::x(), 10.0, 3000));
        let planes = extract_planes(&cloud, &all(&cloud), &cfg());
        assert_eq!(planes.len(), 1);
        assert!(planes[0].len() as f64 >= 0.9 * cloud.len() as f64);
    }

    #[test]
    fn perpendicular_walls_stay_separate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut pts = wall(&mut rng, Vector3::new(0.0, 0.0, 0.0), Vector3::x(), 8.0, 2500);
        let n_a = pts.len();
        pts.extend(wall(&mut rng, Vector3::new(0.0, 0.0, 0.0), Vector3::y(), 8.0, 2500));
        let cloud = PointCloud::new(pts);
        let planes = extract_planes(&cloud, &all(&cloud), &cfg());
        assert_eq!(planes.len(), 2);
        for p in &planes {
            let a = p.indices.iter().filter(|&&i| i < n_a).count();
            let purity = a.max(p.len() - a) as f64 / p.len() as f64;
            assert!(purity > 0.97, "purity {purity}");
        }
    }

    #[test]
    fn gaussian_blob_has_no_plane() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let nd = Normal::new(0.0, 1.0).unwrap();
        let pts = (0..5000).map(|_| Vector3::new(nd.sample(&mut rng), nd.sample(&mut rng), nd.sample(&mut rng))).collect();
        let cloud = PointCloud::new(pts);
        assert!(extract_planes(&cloud, &all(&cloud), &cfg()).is_empty());
    }

    fn pole(rng: &mut ChaCha8Rng, base: Vector3<f64>, n: usize) -> Vec<Vector3<f64>> {
        let nz = Normal::new(0.0, 0.02).unwrap();
        (0..n)
            .map(|_| {
                let a = rng.random_range(0.0..std::f64::consts::TAU);
                base + Vector3::new(0.05 * a.cos() + nz.sample(rng), 0.05 * a.sin() + nz.sample(rng), rng.random_range(0.0..4.0))
            })
            .collect()
    }

    #[test]
    fn vertical_pole_is_a_line() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cloud = PointCloud::new(pole(&mut rng, Vector3::new(1.0, 2.0, 0.0), 300));
        let lines = extract_lines(&cloud, &all(&cloud), &cfg(), 11);
        assert_eq!(lines.len(), 1);
        let (_, cov) = mean_and_covariance(&lines[0].points);
        let (_, axes) = principal_axes(&cov);
        assert!(axes.column(0).dot(&Vector3::z()).abs().acos().to_degrees() < 2.0);
        assert_eq!(lines, extract_lines(&cloud, &all(&cloud), &cfg(), 11));
    }

    #[test]
    fn spherical_cluster_is_not_a_line() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let nd = Normal::new(0.0, 0.5).unwrap();
        let pts = (0..500).map(|_| Vector3::new(nd.sample(&mut rng), nd.sample(&mut rng), nd.sample(&mut rng))).collect();
        let cloud = PointCloud::new(pts);
        assert!(extract_lines(&cloud, &all(&cloud), &cfg(), 0).is_empty());
    }

    fn blob(rng: &mut ChaCha8Rng, c: Vector3<f64>, n: usize) -> Vec<Vector3<f64>> {
        let nd = Normal::new(0.0, 0.4).unwrap();
        (0..n).map(|_| c + Vector3::new(nd.sample(rng), nd.sample(rng), 0.5 * nd.sample(rng))).collect()
    }

    #[test]
    fn objects_split_and_keep_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut pts = blob(&mut rng, Vector3::new(0.0, 0.0, 1.0), 400);
        pts.extend(blob(&mut rng, Vector3::new(8.0, 0.0, 1.0), 400));
        pts.extend(blob(&mut rng, Vector3::new(-8.0, 0.0, 1.0), 20));
        let cloud = PointCloud::new(pts.clone());
        let objs = extract_objects(&cloud, &all(&cloud), &cfg());
        assert_eq!(objs.len(), 2);

        // Two touching blobs with different labels never mix.
        let mut pts = blob(&mut rng, Vector3::new(0.0, 0.0, 1.0), 400);
        pts.extend(blob(&mut rng, Vector3::new(0.6, 0.0, 1.0), 400));
        let labels = (0..800).map(|i| if i < 400 { semantic::VEHICLE } else { semantic::TRUNK }).collect();
        let cloud = PointCloud::with_labels(pts, labels).unwrap();
        let objs = extract_objects(&cloud, &all(&cloud), &cfg());
        assert_eq!(objs.len(), 2);
        for o in &objs {
            assert!(o.indices.iter().all(|&i| cloud.label(i) == Some(o.label)));
        }
    }
}
