//! Uniform voxel hashing for neighborhood queries and down-sampling.

use std::collections::HashMap;

use nalgebra::Vector3;

pub type Key = (i64, i64, i64);

pub fn voxel_key(p: &Vector3<f64>, size: f64) -> Key {
    (
        (p.x / size).floor() as i64,
        (p.y / size).floor() as i64,
        (p.z / size).floor() as i64,
    )
}

/// Point indices bucketed by voxel. `keys` is sorted so iteration is
/// deterministic.
#[derive(Debug, Clone)]
pub struct VoxelGrid {
    pub size: f64,
    cells: HashMap<Key, Vec<usize>>,
    keys: Vec<Key>,
}

impl VoxelGrid {
    pub fn build(points: &[Vector3<f64>], size: f64) -> Self {
        Self::build_subset(points, 0..points.len(), size)
    }

    pub fn build_subset(points: &[Vector3<f64>], indices: impl IntoIterator<Item = usize>, size: f64) -> Self {
        let mut cells: HashMap<Key, Vec<usize>> = HashMap::new();
        for i in indices {
            cells.entry(voxel_key(&points[i], size)).or_default().push(i);
        }
        let mut keys: Vec<Key> = cells.keys().copied().collect();
        keys.sort_unstable();
        Self { size, cells, keys }
    }

    pub fn keys(&self) -> &[Key] {
        &self.keys
    }

    pub fn cell(&self, key: &Key) -> &[usize] {
        self.cells.get(key).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn contains(&self, key: &Key) -> bool {
        self.cells.contains_key(key)
    }

    /// Indices within `radius` of `q`; `radius` must not exceed the voxel size.
    pub fn radius_search(&self, points: &[Vector3<f64>], q: &Vector3<f64>, radius: f64, out: &mut Vec<usize>) {
        debug_assert!(radius <= self.size * (1.0 + 1e-12));
        out.clear();
        let (kx, ky, kz) = voxel_key(q, self.size);
        let r2 = radius * radius;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    for &i in self.cell(&(kx + dx, ky + dy, kz + dz)) {
                        if (points[i] - q).norm_squared() <= r2 {
                            out.push(i);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
    }
}

pub fn neighbors26(k: &Key) -> impl Iterator<Item = Key> + '_ {
    (-1..=1).flat_map(move |dx| {
        (-1..=1).flat_map(move |dy| {
            (-1..=1).filter_map(move |dz| {
                (dx != 0 || dy != 0 || dz != 0).then_some((k.0 + dx, k.1 + dy, k.2 + dz))
            })
        })
    })
}

/// Centroid of each occupied voxel, ordered by voxel key.
pub fn voxel_downsample(points: &[Vector3<f64>], size: f64) -> Vec<Vector3<f64>> {
    let grid = VoxelGrid::build(points, size);
    grid.keys()
        .iter()
        .map(|k| {
            let c = grid.cell(k);
            c.iter().fold(Vector3::zeros(), |acc, &i| acc + points[i]) / c.len() as f64
        })
        .collect()
}

/// Euclidean clustering: connected components of the `distance` graph over
/// `indices`. Clusters smaller than `min_size` are dropped. Output clusters
/// hold sorted indices and are ordered by their smallest index.
pub fn euclidean_clusters(points: &[Vector3<f64>], indices: &[usize], distance: f64, min_size: usize) -> Vec<Vec<usize>> {
    let grid = VoxelGrid::build_subset(points, indices.iter().copied(), distance);
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    // 0: not a candidate, 1: pending, 2: assigned
    let mut state = vec![0u8; points.len()];
    for &i in &sorted {
        state[i] = 1;
    }
    let mut clusters = Vec::new();
    let mut buf = Vec::new();
    for &seed in &sorted {
        if state[seed] != 1 {
            continue;
        }
        state[seed] = 2;
        let mut cluster = vec![seed];
        let mut head = 0;
        while head < cluster.len() {
            let p = points[cluster[head]];
            head += 1;
            grid.radius_search(points, &p, distance, &mut buf);
            for &j in &buf {
                if state[j] == 1 {
                    state[j] = 2;
                    cluster.push(j);
                }
            }
        }
        if cluster.len() >= min_size {
            cluster.sort_unstable();
            clusters.push(cluster);
        }
    }
    clusters
}
