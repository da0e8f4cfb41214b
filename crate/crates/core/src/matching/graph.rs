//! Compatibility graphs over correspondences.

use nalgebra::Vector3;
use rayon::prelude::*;

use super::Correspondence;
use crate::scene::SceneRepresentation;

/// Fixed-size bit set over vertex indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitSet {
    words: Vec<u64>,
    len: usize,
}

impl BitSet {
    pub fn new(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn full(len: usize) -> Self {
        let mut s = Self::new(len);
        for i in 0..len {
            s.insert(i);
        }
        s
    }

    pub fn capacity(&self) -> usize {
        self.len
    }

    pub fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn remove(&mut self, i: usize) {
        self.words[i / 64] &= !(1 << (i % 64));
    }

    pub fn contains(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn intersect(&self, other: &BitSet) -> BitSet {
        BitSet {
            words: self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect(),
            len: self.len,
        }
    }

    /// In-place `self ∖ other`.
    pub fn difference_with(&mut self, other: &BitSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !b;
        }
    }

    /// Largest member.
    pub fn last(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .rev()
            .find(|(_, &w)| w != 0)
            .map(|(k, &w)| k * 64 + 63 - w.leading_zeros() as usize)
    }

    pub fn is_subset(&self, other: &BitSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    /// Members in increasing order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(k, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(k * 64 + b)
            })
        })
    }
}

/// Vertex `v` stands for correspondence `v`; an edge joins mutually
/// consistent correspondences under `threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityGraph {
    pub threshold: f64,
    adjacency: Vec<BitSet>,
}

impl CompatibilityGraph {
    pub fn from_adjacency(threshold: f64, adjacency: Vec<BitSet>) -> Self {
        Self { threshold, adjacency }
    }

    /// Graph with edges from a predicate evaluated for `i < j`.
    pub fn from_edges(n: usize, edge: impl Fn(usize, usize) -> bool) -> Self {
        let mut adjacency = vec![BitSet::new(n); n];
        for i in 0..n {
            for j in i + 1..n {
                if edge(i, j) {
                    adjacency[i].insert(j);
                    adjacency[j].insert(i);
                }
            }
        }
        Self {
            threshold: f64::NAN,
            adjacency,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, v: usize) -> &BitSet {
        &self.adjacency[v]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].contains(j)
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(BitSet::count).sum::<usize>() / 2
    }

    /// Every edge of `self` is an edge of `other`.
    pub fn is_subgraph_of(&self, other: &CompatibilityGraph) -> bool {
        self.vertex_count() == other.vertex_count() && self.adjacency.iter().zip(&other.adjacency).all(|(a, b)| a.is_subset(b))
    }
}

/// Length-consistency of two correspondences: the difference between the
/// source-side and target-side center distances.
pub fn invariant_distance(i: &Correspondence, j: &Correspondence, x: &SceneRepresentation, y: &SceneRepresentation) -> f64 {
    let dx = (x.element(i.source).center() - x.element(j.source).center()).norm();
    let dy = (y.element(i.target).center() - y.element(j.target).center()).norm();
    (dx - dy).abs()
}

/// One graph per threshold (ascending). Distances are evaluated once and
/// each edge is assigned to every level whose threshold it meets, so the
/// edge sets are nested by construction.
pub fn build_graphs(
    correspondences: &[Correspondence],
    x: &SceneRepresentation,
    y: &SceneRepresentation,
    thresholds: &[f64],
) -> Vec<CompatibilityGraph> {
    let n = correspondences.len();
    let cx: Vec<Vector3<f64>> = correspondences.iter().map(|c| x.element(c.source).center()).collect();
    let cy: Vec<Vector3<f64>> = correspondences.iter().map(|c| y.element(c.target).center()).collect();
    // rows[i][level]
    let rows: Vec<Vec<BitSet>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![BitSet::new(n); thresholds.len()];
            for j in 0..n {
                if i == j {
                    continue;
                }
                // Same operand order for (i, j) and (j, i) keeps the matrix exactly symmetric.
                let (a, b) = if i < j { (i, j) } else { (j, i) };
                let d = ((cx[a] - cx[b]).norm() - (cy[a] - cy[b]).norm()).abs();
                for (k, &t) in thresholds.iter().enumerate() {
                    if d <= t {
                        row[k].insert(j);
                    }
                }
            }
            row
        })
        .collect();
    let mut levels: Vec<Vec<BitSet>> = vec![Vec::with_capacity(n); thresholds.len()];
    for row in rows {
        for (k, r) in row.into_iter().enumerate() {
            levels[k].push(r);
        }
    }
    thresholds
        .iter()
        .zip(levels)
        .map(|(&t, adjacency)| CompatibilityGraph::from_adjacency(t, adjacency))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{semantic, QuadricRecord};
    use crate::transform::RigidTransform;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn points_scene(points: &[Vector3<f64>]) -> SceneRepresentation {
        SceneRepresentation {
            records: points.iter().map(|p| QuadricRecord::point(semantic::OBJECT, p, 0.05)).collect(),
            augmented: Vec::new(),
            descriptors: Vec::new(),
            ground_normal: Vector3::z(),
        }
    }

    fn identity_pairs(n: usize) -> Vec<Correspondence> {
        (0..n)
            .map(|i| Correspondence {
                source: i,
                target: i,
                similarity: 0.0,
                augmented: false,
            })
            .collect()
    }

    #[test]
    fn bitset_iterates_in_order() {
        let mut s = BitSet::new(130);
        for i in [129, 0, 64, 63, 7] {
            s.insert(i);
        }
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![0, 7, 63, 64, 129]);
        assert_eq!(s.count(), 5);
    }

    #[test]
    fn single_correspondence_has_no_edges() {
        let x = points_scene(&[Vector3::zeros()]);
        let g = build_graphs(&identity_pairs(1), &x, &x, &[0.2, 0.4]);
        assert_eq!(g.len(), 2);
        assert!(g.iter().all(|g| g.vertex_count() == 1 && g.edge_count() == 0));
    }

    #[test]
    fn rigid_transform_leaves_distances_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<_> = (0..30).map(|_| Vector3::new(rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0), rng.random_range(-2.0..5.0))).collect();
        let t = RigidTransform::from_axis_angle(Vector3::new(0.3, -0.2, 1.1), Vector3::new(12.0, -7.0, 0.5));
        let x = points_scene(&pts);
        let y = points_scene(&pts.iter().map(|p| t.apply(p)).collect::<Vec<_>>());
        let c = identity_pairs(pts.len());
        for i in 0..c.len() {
            for j in 0..c.len() {
                if i != j {
                    assert!(invariant_distance(&c[i], &c[j], &x, &y) < 1e-9);
                }
            }
        }
        let g = build_graphs(&c, &x, &y, &[0.2]);
        assert_eq!(g[0].edge_count(), 30 * 29 / 2);
    }

    #[test]
    fn levels_are_nested_and_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let n = rng.random_range(2..40);
            let px: Vec<_> = (0..n).map(|_| Vector3::new(rng.random_range(0.0..5.0), rng.random_range(0.0..5.0), 0.0)).collect();
            let py: Vec<_> = (0..n).map(|_| Vector3::new(rng.random_range(0.0..5.0), rng.random_range(0.0..5.0), 0.0)).collect();
            let x = points_scene(&px);
            let y = points_scene(&py);
            let c = identity_pairs(n);
            let g = build_graphs(&c, &x, &y, &[0.2, 0.4, 0.6, 0.8]);
            for k in 0..3 {
                assert!(g[k].is_subgraph_of(&g[k + 1]));
            }
            for lvl in &g {
                for i in 0..n {
                    assert!(!lvl.has_edge(i, i));
                    for j in 0..n {
                        assert_eq!(lvl.has_edge(i, j), lvl.has_edge(j, i));
                        if i != j {
                            assert_eq!(lvl.has_edge(i, j), invariant_distance(&c[i], &c[j], &x, &y) <= lvl.threshold);
                        }
                    }
                }
            }
        }
    }
}
