//! Exact maximum clique by branch and bound with greedy-coloring bounds.
//!
//! Vertices are branched in increasing index order, so maximal cliques are
//! reached in lexicographic order of their sorted member lists and the first
//! maximum clique found is the lexicographically smallest one.

use serde::Serialize;

use super::graph::{BitSet, CompatibilityGraph};
use super::Correspondence;
use crate::error::{Error, Result};
use crate::scene::SceneRepresentation;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CliqueResult {
    /// Correspondence indices, ascending.
    pub members: Vec<usize>,
    pub level: usize,
}

impl CliqueResult {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

struct Search<'a> {
    graph: &'a CompatibilityGraph,
    need: usize,
    best: Option<Vec<usize>>,
    current: Vec<usize>,
}

impl Search<'_> {
    /// Color bound for each candidate `cand[k]`: the number of colors used by
    /// `cand[k..]` under a greedy coloring built from the highest index down.
    /// Classes are filled one at a time, which gives the same coloring as
    /// assigning each vertex to its first free class.
    fn bounds(&self, p: &BitSet, cand: &[usize]) -> Vec<usize> {
        let mut color = vec![0usize; p.capacity()];
        let mut uncolored = p.clone();
        let mut c = 0;
        while !uncolored.is_empty() {
            c += 1;
            let mut open = uncolored.clone();
            while let Some(v) = open.last() {
                color[v] = c;
                uncolored.remove(v);
                open.remove(v);
                open.difference_with(self.graph.neighbors(v));
            }
        }
        let mut bound = vec![0; cand.len()];
        let mut used = 0;
        for k in (0..cand.len()).rev() {
            used = used.max(color[cand[k]]);
            bound[k] = used;
        }
        bound
    }

    fn expand(&mut self, mut p: BitSet) {
        let cand: Vec<usize> = p.iter().collect();
        if cand.is_empty() {
            if self.current.len() >= self.need {
                self.best = Some(self.current.clone());
                self.need = self.current.len() + 1;
            }
            return;
        }
        let bound = self.bounds(&p, &cand);
        for (k, &v) in cand.iter().enumerate() {
            if self.current.len() + bound[k] < self.need {
                break;
            }
            self.current.push(v);
            let next = p.intersect(self.graph.neighbors(v));
            self.expand(next);
            self.current.pop();
            p.remove(v);
        }
    }
}

/// Maximum clique of `graph`. Branches that cannot reach `lower_bound`
/// vertices are pruned; if `lower_bound` exceeds the clique number the
/// search is repeated without it.
pub fn max_clique(graph: &CompatibilityGraph, lower_bound: usize, vertex_cap: usize) -> Result<Vec<usize>> {
    let n = graph.vertex_count();
    if n > vertex_cap {
        return Err(Error::GraphTooLarge { vertices: n, cap: vertex_cap });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    for need in [lower_bound.max(1), 1] {
        let mut s = Search {
            graph,
            need,
            best: None,
            current: Vec::new(),
        };
        s.expand(BitSet::full(n));
        if let Some(best) = s.best {
            return Ok(best);
        }
    }
    unreachable!("a non-empty graph has a clique of size one")
}

/// Multi-level pruning: one maximum clique per threshold level, each level's
/// clique size seeding the next level's search.
pub fn prune(
    correspondences: &[Correspondence],
    x: &SceneRepresentation,
    y: &SceneRepresentation,
    thresholds: &[f64],
    vertex_cap: usize,
) -> Result<Vec<CliqueResult>> {
    if correspondences.len() < 3 {
        return Err(Error::CorrespondenceDegenerate(correspondences.len()));
    }
    if thresholds.is_empty() || thresholds.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidInput("thresholds must be non-empty and strictly ascending".into()));
    }
    if correspondences.len() > vertex_cap {
        return Err(Error::GraphTooLarge {
            vertices: correspondences.len(),
            cap: vertex_cap,
        });
    }
    let graphs = super::build_graphs(correspondences, x, y, thresholds);
    let mut out: Vec<CliqueResult> = Vec::with_capacity(graphs.len());
    let mut lower = 0;
    for (level, g) in graphs.iter().enumerate() {
        let members = max_clique(g, lower, vertex_cap)?;
        lower = members.len();
        out.push(CliqueResult { members, level });
    }
    Ok(out)
}
