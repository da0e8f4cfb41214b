//! Benchmark pairs from a trajectory: loop closures within a distance band
//! and fixed-distance odometry pairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transform::RigidTransform;

/// Frame `source` registered onto frame `target`; `gt` maps source-frame
/// points into the target frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosePair {
    pub source: usize,
    pub target: usize,
    pub gt: RigidTransform,
}

impl PosePair {
    pub fn new(poses: &[RigidTransform], source: usize, target: usize) -> Self {
        Self {
            source,
            target,
            gt: poses[target].inverse().compose(&poses[source]),
        }
    }
}

/// Loop-closure difficulty by frame distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    /// (0, 10] m
    Easy,
    /// (10, 20] m
    Medium,
    /// (20, 30] m
    Hard,
}

impl Difficulty {
    /// Lower (exclusive) and upper (inclusive) distance bound.
    pub fn band(self) -> (f64, f64) {
        match self {
            Difficulty::Easy => (0.0, 10.0),
            Difficulty::Medium => (10.0, 20.0),
            Difficulty::Hard => (20.0, 30.0),
        }
    }
}

fn check_poses(poses: &[RigidTransform]) -> Result<()> {
    if poses.len() < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 poses, got {}", poses.len())));
    }
    Ok(())
}

fn distance(poses: &[RigidTransform], i: usize, j: usize) -> f64 {
    (poses[i].translation - poses[j].translation).norm()
}

/// Keeps `max` pairs spread uniformly over the list by index; `None` or a
/// cap at least the list length keeps everything.
pub fn subsample(pairs: Vec<PosePair>, max: Option<usize>) -> Vec<PosePair> {
    match max {
        Some(m) if m < pairs.len() => {
            let n = pairs.len();
            (0..m).map(|k| pairs[k * n / m]).collect()
        }
        _ => pairs,
    }
}

fn loop_pairs_by(poses: &[RigidTransform], t_gap: usize, keep: impl Fn(f64) -> bool) -> Result<Vec<PosePair>> {
    check_poses(poses)?;
    let mut out = Vec::new();
    for i in 0..poses.len() {
        for j in i + 1..poses.len() {
            if j - i >= t_gap.max(1) && keep(distance(poses, i, j)) {
                out.push(PosePair::new(poses, i, j));
            }
        }
    }
    Ok(out)
}

/// All pairs `i < j` with `d_min ≤ ‖t_i − t_j‖ ≤ d_max` and `j − i ≥ t_gap`.
pub fn generate_loop_pairs(poses: &[RigidTransform], d_min: f64, d_max: f64, t_gap: usize) -> Result<Vec<PosePair>> {
    if !(d_min >= 0.0 && d_min <= d_max) {
        return Err(Error::InvalidInput(format!("invalid distance band [{d_min}, {d_max}]")));
    }
    loop_pairs_by(poses, t_gap, |d| d >= d_min && d <= d_max)
}

/// Loop pairs of one difficulty preset. The lower bound is exclusive so the
/// presets do not share pairs.
pub fn generate_loop_pairs_preset(poses: &[RigidTransform], difficulty: Difficulty, t_gap: usize) -> Result<Vec<PosePair>> {
    let (lo, hi) = difficulty.band();
    loop_pairs_by(poses, t_gap, |d| d > lo && d <= hi)
}

/// For every frame `i`, the frame `j ≠ i` whose distance to `i` is closest
/// to `d_target`; ties go to the smaller index.
pub fn generate_odometry_pairs(poses: &[RigidTransform], d_target: f64) -> Result<Vec<PosePair>> {
    check_poses(poses)?;
    if !(d_target > 0.0) || !d_target.is_finite() {
        return Err(Error::InvalidInput(format!("odometry distance must be > 0, got {d_target}")));
    }
    let mut out = Vec::with_capacity(poses.len());
    for i in 0..poses.len() {
        let mut best: Option<(f64, usize)> = None;
        for k in (0..poses.len()).filter(|&k| k != i) {
            let gap = (distance(poses, i, k) - d_target).abs();
            if best.is_none_or(|(b, _)| gap < b) {
                best = Some((gap, k));
            }
        }
        let (_, j) = best.expect("at least two poses");
        out.push(PosePair::new(poses, i, j));
    }
    Ok(out)
}
