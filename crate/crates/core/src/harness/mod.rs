//! Synthetic scenes, benchmark pair generation and evaluation metrics.

pub mod metrics;
pub mod pairs;
pub mod synth;

pub use metrics::{compute_metrics, count_inliers, rre, rte, MetricsReport, PairMetrics};
pub use pairs::{generate_loop_pairs, generate_loop_pairs_preset, generate_odometry_pairs, subsample, Difficulty, PosePair};
pub use synth::{generate_scene, GtPrimitive, PrimitiveShape, SyntheticScene, SyntheticSceneSpec};
