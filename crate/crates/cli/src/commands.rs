use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use log::info;
use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use quadreg::harness::{
    compute_metrics, generate_loop_pairs, generate_loop_pairs_preset, generate_odometry_pairs, generate_scene, subsample,
    Difficulty, MetricsReport, PairMetrics, PosePair, SyntheticSceneSpec,
};
use quadreg::io::{read_cloud, read_cloud_with_labels, read_poses, write_cloud};
use quadreg::registration::{register_scenes, Registration};
use quadreg::scene::{parse_scene_text, represent, scene_to_json, scene_to_text, RepresentDiagnostics, SceneRepresentation};
use quadreg::{Config, Error, PointCloud};

use crate::{BenchArgs, Cli, Command, PairMode, PairsArgs, Preset, RegisterArgs, RepresentArgs, SynthArgs, EXIT_FAILED};

#[derive(Debug, Serialize, Deserialize)]
struct PairList {
    pairs: Vec<PosePair>,
}

pub fn run(cli: &Cli) -> Result<u8> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match &cli.command {
        Command::Represent(a) => cmd_represent(a, &cfg),
        Command::Register(a) => cmd_register(a, &cfg, cli.timings),
        Command::Synth(a) => cmd_synth(a, cli.seed),
        Command::Bench(a) => cmd_bench(a, &cfg, cli.timings),
        Command::Pairs(a) => cmd_pairs(a),
        Command::Config => {
            print!("{}", cfg.to_toml_string());
            Ok(0)
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io { path: path.to_path_buf(), source: e }.into())
}

fn write_json(path: Option<&Path>, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(p) => write_text(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_cloud(path: &Path, labels: Option<&Path>) -> Result<PointCloud> {
    Ok(match labels {
        Some(l) => read_cloud_with_labels(path, l)?,
        None => read_cloud(path)?,
    })
}

fn is_cloud_file(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
        Some("ply" | "pcd")
    )
}

/// Representation of a cloud file, or a representation text file as is.
fn load_scene(path: &Path, labels: Option<&Path>, cfg: &Config) -> Result<(SceneRepresentation, Option<RepresentDiagnostics>)> {
    if is_cloud_file(path) {
        let cloud = load_cloud(path, labels)?;
        let (scene, diag) = represent(&cloud, &cfg.scene, cfg.seed).with_context(|| format!("representing {}", path.display()))?;
        Ok((scene, Some(diag)))
    } else {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
        Ok((parse_scene_text(path, &text)?, None))
    }
}

fn cmd_represent(a: &RepresentArgs, cfg: &Config) -> Result<u8> {
    let cloud = load_cloud(&a.cloud, a.labels.as_deref())?;
    let (scene, diag) = represent(&cloud, &cfg.scene, cfg.seed)?;
    let json_out = a.output.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if json_out {
        write_json(Some(&a.output), &scene_to_json(&scene))?;
    } else {
        write_text(&a.output, &scene_to_text(&scene))?;
    }
    info!("{:?}", diag);
    eprintln!(
        "{}: {} points -> {} quadrics, {} augmented points",
        a.cloud.display(),
        cloud.len(),
        scene.records.len(),
        scene.augmented.len()
    );
    Ok(0)
}

fn cmd_register(a: &RegisterArgs, cfg: &Config, timings: bool) -> Result<u8> {
    let t0 = Instant::now();
    let (x, dx) = load_scene(&a.source, a.source_labels.as_deref(), cfg)?;
    let (y, dy) = load_scene(&a.target, a.target_labels.as_deref(), cfg)?;
    let represent_ms = t0.elapsed().as_secs_f64() * 1e3;
    let mut reg = register_scenes(&x, &y, cfg);
    reg.diagnostics.source_scene = dx;
    reg.diagnostics.target_scene = dy;
    match reg.diagnostics.timings.as_mut() {
        Some(t) if timings => {
            t.represent_ms = represent_ms;
            t.total_ms += represent_ms;
        }
        _ => reg.diagnostics.timings = None,
    }
    write_json(a.output.as_deref(), &reg.to_json())?;
    match reg.result() {
        Ok(_) => Ok(0),
        Err(e) => {
            eprintln!("{e}");
            Ok(EXIT_FAILED)
        }
    }
}

fn write_labels(path: &Path, labels: &[u32]) -> Result<()> {
    let mut s = String::with_capacity(labels.len() * 3);
    for l in labels {
        writeln!(s, "{l}").expect("write to string");
    }
    write_text(path, &s)
}

fn write_frame(dir: &Path, frame: usize, cloud: &PointCloud) -> Result<()> {
    write_cloud(&dir.join(format!("{frame:06}.ply")), cloud)?;
    if let Some(l) = &cloud.labels {
        write_labels(&dir.join(format!("{frame:06}.labels")), l)?;
    }
    Ok(())
}

fn cmd_synth(a: &SynthArgs, seed: Option<u64>) -> Result<u8> {
    let mut spec = match &a.spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Io { path: p.clone(), source: e })?;
            toml::from_str::<SyntheticSceneSpec>(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => SyntheticSceneSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    spec.validate()?;
    std::fs::create_dir_all(&a.output).map_err(|e| Error::Io { path: a.output.clone(), source: e })?;
    let base = spec.seed;
    let mut pairs = Vec::with_capacity(a.count);
    for k in 0..a.count {
        let spec_k = SyntheticSceneSpec { seed: base + k as u64, ..spec.clone() };
        let scene = generate_scene(&spec_k)?;
        let (fx, fy) = (2 * k, 2 * k + 1);
        write_frame(&a.output, fx, &scene.cloud_x)?;
        write_frame(&a.output, fy, &scene.cloud_y)?;
        let gt = json!({
            "seed": spec_k.seed,
            "source_frame": fx,
            "target_frame": fy,
            "gt": scene.gt,
            "pose_source": scene.pose_x,
            "pose_target": scene.pose_y,
            "measured_overlap": scene.measured_overlap(),
            "primitives": scene.primitives,
        });
        write_json(Some(&a.output.join(format!("scene_{k:04}.json"))), &gt)?;
        pairs.push(PosePair { source: fx, target: fy, gt: scene.gt });
    }
    write_json(Some(&a.output.join("pairs.json")), &serde_json::to_value(PairList { pairs })?)?;
    eprintln!("{} scene pairs written to {}", a.count, a.output.display());
    Ok(0)
}

fn frame_cloud(dir: &Path, frame: usize) -> Result<(PathBuf, Option<PathBuf>)> {
    let labels = dir.join(format!("{frame:06}.labels"));
    let labels = labels.exists().then_some(labels);
    for ext in ["ply", "pcd"] {
        let p = dir.join(format!("{frame:06}.{ext}"));
        if p.exists() {
            return Ok((p, labels));
        }
    }
    bail!(Error::InvalidInput(format!("{}: no cloud for frame {frame} ({frame:06}.ply or .pcd)", dir.display())))
}

struct Frame {
    scene: std::result::Result<SceneRepresentation, String>,
    represent_ms: f64,
}

#[derive(Serialize)]
struct BenchRow {
    source: usize,
    target: usize,
    #[serde(flatten)]
    metrics: PairMetrics,
    failure: Option<String>,
}

fn correspondence_centers(reg: &Registration, x: &SceneRepresentation, y: &SceneRepresentation) -> Vec<(Vector3<f64>, Vector3<f64>)> {
    reg.correspondences
        .iter()
        .map(|c| (x.element(c.source).center(), y.element(c.target).center()))
        .collect()
}

fn cmd_bench(a: &BenchArgs, cfg: &Config, timings: bool) -> Result<u8> {
    let text = std::fs::read_to_string(&a.pairs).map_err(|e| Error::Io { path: a.pairs.clone(), source: e })?;
    let list: PairList = serde_json::from_str(&text).with_context(|| format!("parsing {}", a.pairs.display()))?;
    let mut needed: BTreeMap<usize, (PathBuf, Option<PathBuf>)> = BTreeMap::new();
    for p in &list.pairs {
        for f in [p.source, p.target] {
            if !needed.contains_key(&f) {
                needed.insert(f, frame_cloud(&a.clouds, f)?);
            }
        }
    }
    let clouds: Vec<(usize, PointCloud)> = needed
        .iter()
        .map(|(&f, (p, l))| Ok((f, load_cloud(p, l.as_deref())?)))
        .collect::<Result<_>>()?;
    let frames: BTreeMap<usize, Frame> = clouds
        .par_iter()
        .map(|(f, cloud)| {
            let t0 = Instant::now();
            let scene = represent(cloud, &cfg.scene, cfg.seed).map(|(s, _)| s).map_err(|e| e.to_string());
            (*f, Frame { scene, represent_ms: t0.elapsed().as_secs_f64() * 1e3 })
        })
        .collect();

    let rows: Vec<BenchRow> = list
        .pairs
        .par_iter()
        .map(|p| {
            let (fx, fy) = (&frames[&p.source], &frames[&p.target]);
            let t0 = Instant::now();
            let (metrics, failure) = match (&fx.scene, &fy.scene) {
                (Ok(x), Ok(y)) => {
                    let reg = register_scenes(x, y, cfg);
                    let mut m = compute_metrics(reg.transform.as_ref(), &p.gt, &correspondence_centers(&reg, x, y), &cfg.metrics);
                    m.storage_bytes = scene_to_text(x).len();
                    (m, reg.diagnostics.failure.clone())
                }
                (Err(e), _) | (_, Err(e)) => (compute_metrics(None, &p.gt, &[], &cfg.metrics), Some(e.clone())),
            };
            let mut metrics = metrics;
            if timings {
                metrics.runtime_ms = t0.elapsed().as_secs_f64() * 1e3 + fx.represent_ms + fy.represent_ms;
            }
            BenchRow { source: p.source, target: p.target, metrics, failure }
        })
        .collect();

    let aggregate = MetricsReport::aggregate(&rows.iter().map(|r| r.metrics).collect::<Vec<_>>());
    write_json(Some(&a.output), &json!({ "aggregate": aggregate, "pairs": rows }))?;
    if let Some(csv) = &a.csv {
        let mut s = String::from("source,target,success,rte_m,rre_deg,inlier_ratio,num_correspondences,runtime_ms\n");
        for r in &rows {
            let m = &r.metrics;
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.source,
                r.target,
                m.success,
                opt(m.rte_m),
                opt(m.rre_deg),
                m.inlier_ratio,
                m.num_correspondences,
                m.runtime_ms
            )
            .expect("write to string");
        }
        write_text(csv, &s)?;
    }
    eprintln!(
        "{} pairs: success rate {:.3}, correspondence recall {:.3}",
        aggregate.pairs, aggregate.success_rate, aggregate.correspondence_recall
    );
    Ok(0)
}

fn cmd_pairs(a: &PairsArgs) -> Result<u8> {
    let poses = read_poses(&a.poses)?;
    let pairs = match a.mode {
        PairMode::Loop => {
            if a.d_min.is_some() || a.d_max.is_some() {
                generate_loop_pairs(&poses, a.d_min.unwrap_or(0.0), a.d_max.unwrap_or(f64::INFINITY), a.t_gap)?
            } else {
                let d = match a.difficulty.unwrap_or(Preset::Easy) {
                    Preset::Easy => Difficulty::Easy,
                    Preset::Medium => Difficulty::Medium,
                    Preset::Hard => Difficulty::Hard,
                };
                generate_loop_pairs_preset(&poses, d, a.t_gap)?
            }
        }
        PairMode::Odo => generate_odometry_pairs(&poses, a.distance)?,
    };
    let pairs = subsample(pairs, a.max_pairs);
    eprintln!("{} pairs from {} poses", pairs.len(), poses.len());
    write_json(a.output.as_deref(), &serde_json::to_value(PairList { pairs })?)?;
    Ok(0)
}
