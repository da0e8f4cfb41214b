//! Pipeline parameters. Every field can be overridden from a TOML file with
//! `[scene]`, `[matching]`, `[registration]` and `[metrics]` sections.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub scene: SceneConfig,
    pub matching: MatchingConfig,
    pub registration: RegistrationConfig,
    pub metrics: MetricsConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 0,
            scene: SceneConfig::default(),
            matching: MatchingConfig::default(),
            registration: RegistrationConfig::default(),
            metrics: MetricsConfig::default(),
        }
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        let s = &self.scene;
        if !(s.k_s > 0.0) || !(s.voxel_size > 0.0) || !(s.cluster_distance > 0.0) || !(s.augment_voxel > 0.0) {
            return bad("scene sizes and k_s must be positive");
        }
        if !(0.0..1.0).contains(&s.ground_height_band) || s.ground_height_band == 0.0 {
            return bad("scene.ground_height_band must be in (0, 1)");
        }
        let t = &self.matching.thresholds;
        if t.is_empty() || t.windows(2).any(|w| w[0] >= w[1]) || t[0] <= 0.0 {
            return bad("matching.thresholds must be positive and strictly ascending");
        }
        if self.matching.k_s == 0 {
            return bad("matching.k_s must be at least 1");
        }
        let r = &self.registration;
        if !(r.dcs_phi > 0.0) || !(r.lm_initial_damping > 0.0) || r.w_rot < 0.0 {
            return bad("registration.dcs_phi and lm_initial_damping must be positive, w_rot non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    /// Multiplier from standard deviation to scale.
    pub k_s: f64,
    /// Taubin gate for accepting a fit.
    pub delta_p: f64,
    /// Records kept per semantic label.
    pub k_e: usize,
    /// Candidate caps per extraction source (planes, lines, objects).
    pub k_p: usize,
    pub k_l: usize,
    pub k_o: usize,
    /// Augmentation gate, segments per label, voxel size.
    pub delta_a: usize,
    pub k_a: usize,
    pub augment_voxel: f64,
    pub ground_height_band: f64,
    pub ground_threshold: f64,
    pub ground_max_tilt_deg: f64,
    pub ground_min_support: f64,
    pub ransac_iterations: usize,
    pub voxel_size: f64,
    pub plane_ratio: f64,
    pub plane_normal_deg: f64,
    pub plane_coplanar_distance: f64,
    pub plane_min_voxels: usize,
    pub min_plane_points: usize,
    pub min_line_points: usize,
    pub min_object_points: usize,
    pub cluster_distance: f64,
    pub line_inlier_radius: f64,
    pub line_inlier_fraction: f64,
    pub line_elongation: f64,
    /// Relative gap under which fitted axis lengths are treated as equal.
    pub symmetry_tolerance: f64,
    pub scale_floor: f64,
    pub descriptor_radius: f64,
    pub descriptor_max_neighbors: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            k_s: 1.645,
            delta_p: 0.5,
            k_e: 50,
            k_p: 60,
            k_l: 60,
            k_o: 60,
            delta_a: 60,
            k_a: 10,
            augment_voxel: 0.5,
            ground_height_band: 0.3,
            ground_threshold: 0.2,
            ground_max_tilt_deg: 25.0,
            ground_min_support: 0.05,
            ransac_iterations: 200,
            voxel_size: 1.0,
            plane_ratio: 0.1,
            plane_normal_deg: 10.0,
            plane_coplanar_distance: 0.2,
            plane_min_voxels: 3,
            min_plane_points: 50,
            min_line_points: 20,
            min_object_points: 30,
            cluster_distance: 0.5,
            line_inlier_radius: 0.1,
            line_inlier_fraction: 0.6,
            line_elongation: 5.0,
            symmetry_tolerance: 0.2,
            scale_floor: 0.05,
            descriptor_radius: 1.0,
            descriptor_max_neighbors: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchingConfig {
    pub k_s: usize,
    pub thresholds: Vec<f64>,
    pub clique_vertex_cap: usize,
    pub descriptor_ratio: f64,
}

impl Default for MatchingConfig {
    fn default() -> Self {
        Self {
            k_s: 20,
            thresholds: vec![0.2, 0.4, 0.6, 0.8],
            clique_vertex_cap: 5000,
            descriptor_ratio: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegistrationConfig {
    pub delta_g_deg: f64,
    pub w_rot: f64,
    pub dcs_phi: f64,
    pub snn_max_distance: f64,
    pub lm_initial_damping: f64,
    pub lm_max_iterations: usize,
    pub lm_step_tolerance: f64,
    /// Skip the nonlinear refinement and keep the SVD estimate.
    pub svd_only: bool,
    /// Let voxel-augmented point matches enter the refinement. When off they
    /// only seed the SVD estimate, unless the remaining terms leave the pose
    /// under-constrained.
    pub refine_augmented: bool,
    /// Minimum clique size accepted as a registration hypothesis.
    pub min_clique: usize,
    /// Minimum number of validated scene matches for the selected candidate.
    pub min_support: usize,
    /// Residual under which a validation match counts as support, meters.
    pub support_distance: f64,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        Self {
            delta_g_deg: 5.0,
            w_rot: 1.0,
            dcs_phi: 1.0,
            snn_max_distance: 5.0,
            lm_initial_damping: 1e-4,
            lm_max_iterations: 50,
            lm_step_tolerance: 1e-8,
            svd_only: false,
            refine_augmented: false,
            min_clique: 3,
            min_support: 6,
            support_distance: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub inlier_threshold: f64,
    pub min_inliers: usize,
    pub rte_max: f64,
    pub rre_max_deg: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            inlier_threshold: 0.5,
            min_inliers: 3,
            rte_max: 2.0,
            rre_max_deg: 5.0,
        }
    }
}
