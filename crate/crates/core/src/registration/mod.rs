//! Transform estimation per clique candidate and optimal-candidate selection.

mod refine;
mod residual;
mod select;
mod svd;

use std::time::Instant;

use log::{debug, info};
use nalgebra::Vector3;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

pub use refine::{is_well_constrained, levenberg_marquardt, total_cost, LmSettings, RefineOutcome, RefineStatus};
pub use residual::{
    augment_noncentral, is_irregular, is_key_structure, quadric_residual, residual_jacobian_check, QuadricResidual,
    ResidualJacobian, ResidualTerm, RotationResidual,
};
pub use select::{argmin_score, dcs, semantic_nearest_pairs, validate, PreparedSide, SelectionSettings, Validation};
pub use svd::svd_align;

use crate::cloud::PointCloud;
use crate::config::{Config, RegistrationConfig};
use crate::error::{Error, Result};
use crate::matching::{init_correspondences, prune, CliqueResult, Correspondence};
use crate::scene::{represent, RecordGeometry, RepresentDiagnostics, SceneRepresentation};
use crate::transform::RigidTransform;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransformCandidate {
    pub level: usize,
    pub clique_size: usize,
    #[serde(serialize_with = "serialize_transform")]
    pub initial: RigidTransform,
    #[serde(serialize_with = "serialize_transform")]
    pub transform: RigidTransform,
    pub refine_status: Option<RefineStatus>,
    pub residual_terms: usize,
    pub validation_score: f64,
    pub snn_pairs: usize,
    pub support: usize,
}

fn serialize_transform<S: serde::Serializer>(t: &RigidTransform, s: S) -> std::result::Result<S::Ok, S::Error> {
    serde::Serialize::serialize(&t.to_rows(), s)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Timings {
    pub represent_ms: f64,
    pub matching_ms: f64,
    pub estimation_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RegistrationDiagnostics {
    pub source_scene: Option<RepresentDiagnostics>,
    pub target_scene: Option<RepresentDiagnostics>,
    pub source_records: usize,
    pub target_records: usize,
    pub source_augmented: usize,
    pub target_augmented: usize,
    pub correspondences: usize,
    pub augmented_correspondences: usize,
    pub clique_sizes: Vec<usize>,
    pub candidates: Vec<TransformCandidate>,
    pub selected: Option<usize>,
    pub failure: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

/// Outcome of a registration attempt, successful or not.
#[derive(Debug, Clone, PartialEq)]
pub struct Registration {
    pub transform: Option<RigidTransform>,
    pub correspondences: Vec<Correspondence>,
    pub cliques: Vec<CliqueResult>,
    pub diagnostics: RegistrationDiagnostics,
}

impl Registration {
    pub fn result(&self) -> Result<RigidTransform> {
        self.transform.ok_or_else(|| {
            Error::RegistrationFailed(self.diagnostics.failure.clone().unwrap_or_else(|| "no valid candidate".into()))
        })
    }

    /// Result document: row-major transform (null on failure) and diagnostics.
    pub fn to_json(&self) -> Value {
        json!({
            "success": self.transform.is_some(),
            "transform": self.transform.map(|t| t.to_rows()),
            "diagnostics": self.diagnostics,
        })
    }
}

fn lm_settings(cfg: &RegistrationConfig) -> LmSettings {
    LmSettings {
        initial_damping: cfg.lm_initial_damping,
        max_iterations: cfg.lm_max_iterations,
        step_tolerance: cfg.lm_step_tolerance,
        w_rot: cfg.w_rot,
    }
}

fn selection_settings(cfg: &RegistrationConfig) -> SelectionSettings {
    SelectionSettings {
        delta_g_deg: cfg.delta_g_deg,
        w_rot: cfg.w_rot,
        phi: cfg.dcs_phi,
        snn_max_distance: cfg.snn_max_distance,
        support_distance: cfg.support_distance,
    }
}

fn geometry_of(scene: &SceneRepresentation, i: usize) -> Result<RecordGeometry> {
    scene.element(i).geometry()
}

fn prepare(scene: &SceneRepresentation) -> Result<PreparedSide<'_>> {
    Ok(PreparedSide {
        labels: scene.records.iter().map(|r| r.label).collect(),
        geometry: scene.records.iter().map(|r| r.geometry()).collect::<Result<_>>()?,
        ground_normal: &scene.ground_normal,
    })
}

/// Residual terms for the clique members: irregular key structures are
/// dropped and non-central sources contribute pseudo-source terms.
pub fn clique_terms(
    x: &SceneRepresentation,
    y: &SceneRepresentation,
    correspondences: &[Correspondence],
    clique: &CliqueResult,
    delta_g_deg: f64,
) -> Result<Vec<ResidualTerm>> {
    let mut terms = Vec::new();
    for &k in &clique.members {
        let c = &correspondences[k];
        let (gx, gy) = (geometry_of(x, c.source)?, geometry_of(y, c.target)?);
        let label = x.element(c.source).label;
        if let Some(t) = select::pair_terms(label, &gx, &gy, &x.ground_normal, &y.ground_normal, delta_g_deg) {
            terms.extend(t);
        }
    }
    Ok(terms)
}

/// SVD initialization from clique member centers followed by refinement.
pub fn refine(
    x: &SceneRepresentation,
    y: &SceneRepresentation,
    correspondences: &[Correspondence],
    clique: &CliqueResult,
    initial: &RigidTransform,
    cfg: &RegistrationConfig,
) -> Result<RefineOutcome> {
    if clique.len() < 3 {
        return Err(Error::CorrespondenceDegenerate(clique.len()));
    }
    let terms = refinement_terms(x, y, correspondences, clique, initial, cfg)?;
    Ok(levenberg_marquardt(&terms, initial, &lm_settings(cfg)))
}

/// Terms fed to the refinement: all clique terms, or only those of quadric
/// matches when `refine_augmented` is off and they constrain the pose.
fn refinement_terms(
    x: &SceneRepresentation,
    y: &SceneRepresentation,
    correspondences: &[Correspondence],
    clique: &CliqueResult,
    initial: &RigidTransform,
    cfg: &RegistrationConfig,
) -> Result<Vec<ResidualTerm>> {
    if !cfg.refine_augmented {
        let quadric = CliqueResult {
            members: clique.members.iter().copied().filter(|&k| !correspondences[k].augmented).collect(),
            level: clique.level,
        };
        if quadric.len() < clique.len() {
            let terms = clique_terms(x, y, correspondences, &quadric, cfg.delta_g_deg)?;
            if is_well_constrained(&terms, initial, cfg.w_rot) {
                return Ok(terms);
            }
        }
    }
    clique_terms(x, y, correspondences, clique, cfg.delta_g_deg)
}

fn estimate_candidate(
    x: &SceneRepresentation,
    y: &SceneRepresentation,
    correspondences: &[Correspondence],
    clique: &CliqueResult,
    cfg: &RegistrationConfig,
) -> Result<TransformCandidate> {
    if clique.len() < cfg.min_clique.max(3) {
        return Err(Error::CorrespondenceDegenerate(clique.len()));
    }
    let pairs: Vec<(Vector3<f64>, Vector3<f64>)> = clique
        .members
        .iter()
        .map(|&k| {
            let c = &correspondences[k];
            (x.element(c.source).center(), y.element(c.target).center())
        })
        .collect();
    let initial = svd_align(&pairs)?;
    let (transform, refine_status, residual_terms) = if cfg.svd_only {
        (initial, None, 0)
    } else {
        let terms = refinement_terms(x, y, correspondences, clique, &initial, cfg)?;
        let out = levenberg_marquardt(&terms, &initial, &lm_settings(cfg));
        (out.transform, Some(out.status), terms.len())
    };
    Ok(TransformCandidate {
        level: clique.level,
        clique_size: clique.len(),
        initial,
        transform,
        refine_status,
        residual_terms,
        validation_score: f64::INFINITY,
        snn_pairs: 0,
        support: 0,
    })
}

/// Scores every candidate and returns the index of the best one (lowest
/// score, earlier candidate on ties), or `None` when no candidate has a
/// finite score.
pub fn select_optimal(
    x: &SceneRepresentation,
    y: &SceneRepresentation,
    candidates: &mut [TransformCandidate],
    cfg: &RegistrationConfig,
) -> Result<Option<usize>> {
    let (px, py) = (prepare(x)?, prepare(y)?);
    let s = selection_settings(cfg);
    let vals: Vec<Validation> = candidates.par_iter().map(|c| validate(&px, &py, &c.transform, &s)).collect();
    for (c, v) in candidates.iter_mut().zip(&vals) {
        c.validation_score = v.score;
        c.snn_pairs = v.pairs;
        c.support = v.support;
    }
    let scores: Vec<f64> = candidates.iter().map(|c| c.validation_score).collect();
    Ok(argmin_score(&scores))
}

/// Registration of two scene representations; see [`register`].
pub fn register_scenes(x: &SceneRepresentation, y: &SceneRepresentation, cfg: &Config) -> Registration {
    let rc = &cfg.registration;
    let mut diag = RegistrationDiagnostics {
        source_records: x.records.len(),
        target_records: y.records.len(),
        source_augmented: x.augmented.len(),
        target_augmented: y.augmented.len(),
        ..Default::default()
    };
    let fail = |diag: RegistrationDiagnostics, correspondences, cliques, why: String| {
        info!("registration failed: {why}");
        let mut diag = diag;
        diag.failure = Some(why);
        Registration {
            transform: None,
            correspondences,
            cliques,
            diagnostics: diag,
        }
    };

    let t0 = Instant::now();
    let correspondences = match init_correspondences(x, y, cfg.matching.k_s, cfg.matching.descriptor_ratio) {
        Ok(c) => c,
        Err(e) => return fail(diag, Vec::new(), Vec::new(), e.to_string()),
    };
    diag.correspondences = correspondences.len();
    diag.augmented_correspondences = correspondences.iter().filter(|c| c.augmented).count();
    let cliques = match prune(&correspondences, x, y, &cfg.matching.thresholds, cfg.matching.clique_vertex_cap) {
        Ok(c) => c,
        Err(e) => return fail(diag, correspondences, Vec::new(), e.to_string()),
    };
    diag.clique_sizes = cliques.iter().map(|c| c.len()).collect();
    debug!("correspondences {} cliques {:?}", correspondences.len(), diag.clique_sizes);
    let matching_ms = t0.elapsed().as_secs_f64() * 1e3;

    let t1 = Instant::now();
    let estimated: Vec<Result<TransformCandidate>> = cliques
        .par_iter()
        .map(|c| estimate_candidate(x, y, &correspondences, c, rc))
        .collect();
    let mut candidates: Vec<TransformCandidate> = Vec::new();
    for (c, e) in cliques.iter().zip(estimated) {
        match e {
            Ok(cand) => candidates.push(cand),
            Err(err) => debug!("level {} skipped: {err}", c.level),
        }
    }
    if candidates.is_empty() {
        return fail(diag, correspondences, cliques, "no clique yields a valid transform".into());
    }
    let selected = match select_optimal(x, y, &mut candidates, rc) {
        Ok(s) => s,
        Err(e) => {
            diag.candidates = candidates;
            return fail(diag, correspondences, cliques, e.to_string());
        }
    };
    let estimation_ms = t1.elapsed().as_secs_f64() * 1e3;
    diag.timings = Some(Timings {
        represent_ms: 0.0,
        matching_ms,
        estimation_ms,
        total_ms: matching_ms + estimation_ms,
    });
    diag.selected = selected;
    diag.candidates = candidates;
    let Some(k) = selected else {
        return fail(diag, correspondences, cliques, "no candidate has semantic nearest-neighbor support".into());
    };
    let best = &diag.candidates[k];
    if best.support < rc.min_support {
        let why = format!("best candidate supported by {} pairs, {} required", best.support, rc.min_support);
        return fail(diag, correspondences, cliques, why);
    }
    Registration {
        transform: Some(diag.candidates[k].transform),
        correspondences,
        cliques,
        diagnostics: diag,
    }
}

/// Full pipeline: scene representation of both clouds, correspondence
/// initialization, multi-level pruning, per-clique estimation and selection.
pub fn register_clouds(x: &PointCloud, y: &PointCloud, cfg: &Config) -> Result<Registration> {
    let t0 = Instant::now();
    let (rx, dx) = represent(x, &cfg.scene, cfg.seed)?;
    let (ry, dy) = represent(y, &cfg.scene, cfg.seed)?;
    let represent_ms = t0.elapsed().as_secs_f64() * 1e3;
    let mut reg = register_scenes(&rx, &ry, cfg);
    reg.diagnostics.source_scene = Some(dx);
    reg.diagnostics.target_scene = Some(dy);
    if let Some(t) = reg.diagnostics.timings.as_mut() {
        t.represent_ms = represent_ms;
        t.total_ms += represent_ms;
    }
    Ok(reg)
}

/// Registers `x` onto `y`; failures carry the diagnostics message.
pub fn register(x: &PointCloud, y: &PointCloud, cfg: &Config) -> Result<(RigidTransform, RegistrationDiagnostics)> {
    let reg = register_clouds(x, y, cfg)?;
    let t = reg.result()?;
    Ok((t, reg.diagnostics))
}
