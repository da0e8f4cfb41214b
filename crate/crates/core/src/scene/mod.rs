//! Reduction of a point cloud to a handful of typed quadric records.

mod augment;
mod descriptor;
mod extract;
mod fit;
mod record;
mod represent;
mod serialize;

pub mod grid;

pub use augment::{augment_points, FittedElement};
pub use descriptor::{compute_descriptor, estimate_normals, l1_distance, Descriptor, DESCRIPTOR_BINS};
pub use extract::{extract_ground, extract_lines, extract_objects, extract_planes};
pub use fit::{assign_quadric_type, fit_statistical, fit_with_fallback, StatisticalFit};
pub use record::{build_record, record_size, select_top_k, QuadricRecord, RecordGeometry};
pub use represent::{represent, RepresentDiagnostics, SceneRepresentation};
pub use serialize::{parse_scene_text, scene_to_json, scene_to_text};

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Semantic label values used by extraction and by the synthetic generator.
pub mod semantic {
    pub const UNLABELED: u32 = 0;
    pub const GROUND: u32 = 1;
    pub const PLANE: u32 = 2;
    pub const LINE: u32 = 3;
    pub const OBJECT: u32 = 4;
    pub const VEHICLE: u32 = 10;
    pub const TRUNK: u32 = 11;
    pub const VEGETATION: u32 = 12;

    /// Labels at or above this value are object classes clustered directly.
    pub const FIRST_OBJECT_CLASS: u32 = 10;

    pub fn is_object_class(label: u32) -> bool {
        label >= FIRST_OBJECT_CLASS
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Ground,
    Plane,
    Line,
    Object,
}

/// Points of one extracted scene element.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementSegment {
    /// Sorted indices into the source cloud.
    pub indices: Vec<usize>,
    pub points: Vec<Vector3<f64>>,
    pub label: u32,
    pub source: Source,
}

impl ElementSegment {
    pub fn from_indices(cloud_points: &[Vector3<f64>], mut indices: Vec<usize>, label: u32, source: Source) -> Self {
        indices.sort_unstable();
        let points = indices.iter().map(|&i| cloud_points[i]).collect();
        Self {
            indices,
            points,
            label,
            source,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Independent deterministic stream for each `(seed, salt)`.
pub(crate) fn seeded_rng(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}
