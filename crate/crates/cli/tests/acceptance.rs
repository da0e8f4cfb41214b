//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::Vector3;
use quadreg::config::Config;
use quadreg::harness::{generate_scene, rre, rte, SyntheticSceneSpec};
use quadreg::matching::{invariant_distance, max_clique, CompatibilityGraph, Correspondence};
use quadreg::quadric::{compose, decompose, normalize, CanonicalForm, QuadricKind};
use quadreg::registration::{register_clouds, register_scenes, residual_jacobian_check, svd_align};
use quadreg::scene::grid::voxel_downsample;
use quadreg::scene::{fit_statistical, represent, scene_to_text, QuadricRecord};
use quadreg::transform::{quaternion_from_rotation, rotation_angle_between, so3_exp};
use quadreg::RigidTransform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

type Outcome = Result<String, String>;

const KINDS: [QuadricKind; 9] = [
    QuadricKind::Point,
    QuadricKind::Line,
    QuadricKind::Plane,
    QuadricKind::Sphere,
    QuadricKind::Cylinder,
    QuadricKind::Cone,
    QuadricKind::Ellipsoid,
    QuadricKind::EllipticCylinder,
    QuadricKind::EllipticCone,
];

fn unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).normalize()
}

fn random_pose(rng: &mut ChaCha8Rng, spread: f64) -> RigidTransform {
    let axis = unit(rng) * rng.random_range(0.0..3.0);
    let t = Vector3::new(rng.random_range(-spread..spread), rng.random_range(-spread..spread), rng.random_range(-spread..spread));
    RigidTransform::new(so3_exp(&axis), t)
}

fn random_scale(kind: QuadricKind, rng: &mut ChaCha8Rng) -> Vector3<f64> {
    let s = rng.random_range(0.2..5.0);
    let t = rng.random_range(0.2..5.0);
    match kind {
        QuadricKind::Point | QuadricKind::Sphere => Vector3::new(s, s, s),
        QuadricKind::Line | QuadricKind::Cylinder => Vector3::new(s, s, 1.0),
        QuadricKind::Plane => Vector3::new(s, 1.0, 1.0),
        QuadricKind::Cone => Vector3::new(s, s, t),
        _ => Vector3::new(s, s * rng.random_range(1.2..2.0), s * rng.random_range(2.5..4.0)),
    }
}

fn record(kind: QuadricKind, scale: Vector3<f64>, pose: &RigidTransform) -> QuadricRecord {
    let q = normalize(&compose(&CanonicalForm::for_kind(kind, &scale).unwrap(), pose)).unwrap();
    QuadricRecord {
        label: quadreg::scene::semantic::OBJECT,
        q: q.flatten(),
        s_f: [scale.x, scale.y, scale.z],
        eta_f: quaternion_from_rotation(&pose.rotation),
        t_f: [pose.translation.x, pose.translation.y, pose.translation.z],
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    if elapsed.as_secs_f64() < limit_s {
        Ok(())
    } else {
        Err(format!("took {:.1} s, limit {limit_s} s", elapsed.as_secs_f64()))
    }
}

fn quadric_round_trip() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for kind in KINDS {
        let table = kind.degeneracy();
        for trial in 0..1000 {
            let scale = random_scale(kind, &mut rng);
            let canonical = CanonicalForm::for_kind(kind, &scale).unwrap();
            let pose = random_pose(&mut rng, 50.0);
            let d = decompose(&compose(&canonical, &pose)).map_err(|e| format!("{kind} #{trial}: {e}"))?;
            if d.kind != kind {
                return Err(format!("{kind} #{trial} decomposed as {}", d.kind));
            }
            let a = &d.attributes;
            if (a.i_s, a.i_r, a.i_t) != (table.scale, table.rotation, table.translation) {
                return Err(format!("{kind} #{trial}: indicators differ"));
            }
            let want = if kind.is_scale_free() {
                let lam = canonical.lambda;
                Vector3::from_fn(|i, _| (lam.norm() / lam[i].abs()).sqrt())
            } else {
                scale
            };
            for i in 0..3 {
                let axis = pose.rotation.column(i);
                if table.scale[i] == 1 {
                    worst = worst.max((a.scale[i] - want[i]).abs());
                }
                if table.translation[i] == 1 {
                    worst = worst.max(axis.dot(&(a.center - pose.translation)).abs());
                }
                if table.rotation[i] == 1 {
                    worst = worst.max(1.0 - axis.dot(&a.rotation.column(i)).abs());
                }
            }
        }
    }
    if worst >= 1e-8 {
        return Err(format!("worst deviation {worst:e}"));
    }
    within(start.elapsed(), 5.0)?;
    Ok(format!("9 kinds x 1000, worst deviation {worst:.1e}, {:.2} s", start.elapsed().as_secs_f64()))
}

fn jacobian_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let kinds = [QuadricKind::Point, QuadricKind::Line, QuadricKind::Plane, QuadricKind::Sphere, QuadricKind::Cylinder, QuadricKind::Cone, QuadricKind::Ellipsoid];
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let kind = kinds[k % kinds.len()];
        let s = Vector3::new(rng.random_range(0.5..1.0), rng.random_range(1.2..2.0), rng.random_range(2.5..4.0));
        let rx = record(kind, s, &random_pose(&mut rng, 20.0));
        let ry = record(kind, s, &random_pose(&mut rng, 20.0));
        let t = random_pose(&mut rng, 10.0);
        worst = worst.max(residual_jacobian_check(&rx, &ry, &t).map_err(|e| e.to_string())?);
    }
    if worst >= 1e-5 {
        return Err(format!("worst relative error {worst:e}"));
    }
    within(start.elapsed(), 10.0)?;
    Ok(format!("1000 configurations, worst relative error {worst:.1e}, {:.2} s", start.elapsed().as_secs_f64()))
}

/// Lexicographically smallest maximum clique by subset enumeration, as a
/// bit mask.
fn exhaustive_clique(adj: &[u32]) -> u32 {
    let n = adj.len();
    let mut is_clique = vec![false; 1 << n];
    is_clique[0] = true;
    let mut best = 0u32;
    for mask in 1usize..1 << n {
        let low = mask.trailing_zeros() as usize;
        let rest = mask & (mask - 1);
        is_clique[mask] = is_clique[rest] && (adj[low] as usize & rest) == rest;
        if !is_clique[mask] {
            continue;
        }
        let m = mask as u32;
        let better = match m.count_ones().cmp(&best.count_ones()) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Equal => {
                let diff = m ^ best;
                m & diff & diff.wrapping_neg() != 0
            }
            std::cmp::Ordering::Less => false,
        };
        if better {
            best = m;
        }
    }
    best
}

fn clique_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for trial in 0..200 {
        let density = [0.2, 0.5, 0.8][trial % 3];
        let n = rng.random_range(1..=20);
        let mut adj = vec![0u32; n];
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() < density {
                    adj[i] |= 1 << j;
                    adj[j] |= 1 << i;
                }
            }
        }
        let g = CompatibilityGraph::from_edges(n, |i, j| adj[i] >> j & 1 == 1);
        let got = max_clique(&g, 0, 5000).map_err(|e| e.to_string())?;
        let want: Vec<usize> = {
            let m = exhaustive_clique(&adj);
            (0..n).filter(|&i| m >> i & 1 == 1).collect()
        };
        if got != want {
            return Err(format!("graph {trial} (n={n}, p={density}): {got:?} vs {want:?}"));
        }
    }
    within(start.elapsed(), 30.0)?;
    Ok(format!("200 graphs up to 20 vertices, {:.2} s", start.elapsed().as_secs_f64()))
}

fn invariance() -> Outcome {
    let cfg = Config::default();
    let s = generate_scene(&SyntheticSceneSpec { seed: 1, ..Default::default() }).map_err(|e| e.to_string())?;
    let (x, _) = represent(&s.cloud_x, &cfg.scene, 1).map_err(|e| e.to_string())?;
    let (y, _) = represent(&s.cloud_y, &cfg.scene, 1).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (fx, fy) = (random_pose(&mut rng, 100.0), random_pose(&mut rng, 100.0));
        let (x2, y2) = (x.transformed(&fx).unwrap(), y.transformed(&fy).unwrap());
        let pick = |rng: &mut ChaCha8Rng| Correspondence {
            source: rng.random_range(0..x.element_count()),
            target: rng.random_range(0..y.element_count()),
            similarity: 0.0,
            augmented: false,
        };
        let (ci, cj) = (pick(&mut rng), pick(&mut rng));
        let d = invariant_distance(&ci, &cj, &x, &y);
        let d2 = invariant_distance(&ci, &cj, &x2, &y2);
        worst = worst.max((d - d2).abs());
    }
    if worst >= 1e-9 {
        return Err(format!("d_ij changed by {worst:e}"));
    }

    let mut drift: f64 = 0.0;
    for seed in 0..10 {
        let s = generate_scene(&SyntheticSceneSpec { seed, noise: 0.0, ..Default::default() }).map_err(|e| e.to_string())?;
        let (x, _) = represent(&s.cloud_x, &cfg.scene, seed).map_err(|e| e.to_string())?;
        let (y, _) = represent(&s.cloud_y, &cfg.scene, seed).map_err(|e| e.to_string())?;
        let f = random_pose(&mut rng, 20.0);
        let t = register_scenes(&x, &y, &cfg).result().map_err(|e| format!("seed {seed}: {e}"))?;
        let tf = register_scenes(&x.transformed(&f).unwrap(), &y, &cfg).result().map_err(|e| format!("seed {seed}: {e}"))?;
        let want = t.compose(&f.inverse());
        drift = drift.max(rotation_angle_between(&tf.rotation, &want.rotation)).max((tf.translation - want.translation).norm());
    }
    if drift >= 1e-6 {
        return Err(format!("equivariance drift {drift:e}"));
    }
    Ok(format!("d_ij worst {worst:.1e} over 1000 trials; equivariance drift {drift:.1e} over 10 scenes"))
}

fn svd_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for trial in 0..1000 {
        let gt = random_pose(&mut rng, 50.0);
        let n = 3 + trial % 20;
        let pairs: Vec<_> = (0..n)
            .map(|_| {
                let p = Vector3::new(rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0), rng.random_range(-5.0..5.0));
                (p, gt.apply(&p))
            })
            .collect();
        let t = svd_align(&pairs).map_err(|e| e.to_string())?;
        worst = worst.max(rotation_angle_between(&t.rotation, &gt.rotation)).max((t.translation - gt.translation).norm());
    }
    if worst >= 1e-9 {
        return Err(format!("worst error {worst:e}"));
    }
    Ok(format!("1000 noise-free sets of 3 to 22 matches, worst error {worst:.1e}"))
}

struct TrialResult {
    success: bool,
    refined: (f64, f64),
    initial: (f64, f64),
}

fn synthetic_suite() -> Vec<Result<TrialResult, String>> {
    let cfg = Config::default();
    (0..100u64).into_par_iter().map(|seed| {
        let s = generate_scene(&SyntheticSceneSpec { seed: 10_000 + seed, ..Default::default() }).map_err(|e| e.to_string())?;
        let reg = register_clouds(&s.cloud_x, &s.cloud_y, &cfg).map_err(|e| e.to_string())?;
        let Some(t) = reg.transform else {
            return Ok(TrialResult { success: false, refined: (f64::NAN, f64::NAN), initial: (f64::NAN, f64::NAN) });
        };
        let cand = &reg.diagnostics.candidates[reg.diagnostics.selected.expect("selected candidate")];
        let metrics = |e: &RigidTransform| (rte(e, &s.gt), rre(e, &s.gt));
        let refined = metrics(&t);
        Ok(TrialResult {
            success: refined.0 <= cfg.metrics.rte_max && refined.1 <= cfg.metrics.rre_max_deg,
            refined,
            initial: metrics(&cand.initial),
        })
    })
    .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn end_to_end(results: &[Result<TrialResult, String>], elapsed: Duration) -> Outcome {
    let mut ok = 0;
    for r in results {
        match r {
            Ok(t) if t.success => ok += 1,
            Ok(_) => {}
            Err(e) => return Err(e.clone()),
        }
    }
    let rate = ok as f64 / results.len() as f64;
    if rate < 0.95 {
        return Err(format!("success rate {rate:.2}"));
    }
    within(elapsed, 300.0)?;
    Ok(format!("success rate {rate:.2} over {} scenes, {:.1} s", results.len(), elapsed.as_secs_f64()))
}

fn refinement_benefit(results: &[Result<TrialResult, String>]) -> Outcome {
    let ok: Vec<&TrialResult> = results.iter().filter_map(|r| r.as_ref().ok()).filter(|t| t.success).collect();
    if ok.is_empty() {
        return Err("no successful trials".into());
    }
    let mut parts = Vec::new();
    let mut failed = false;
    for (name, pick) in [("RTE", 0usize), ("RRE", 1)] {
        let get = |p: (f64, f64)| if pick == 0 { p.0 } else { p.1 };
        let m_ref = median(ok.iter().map(|t| get(t.refined)).collect());
        let m_svd = median(ok.iter().map(|t| get(t.initial)).collect());
        let better = ok.iter().filter(|t| get(t.refined) < get(t.initial)).count() as f64 / ok.len() as f64;
        failed |= m_ref > m_svd || better < 0.6;
        parts.push(format!("{name} median {m_ref:.4} vs {m_svd:.4}, improved in {:.0}%", better * 100.0));
    }
    let msg = parts.join("; ");
    if failed {
        Err(msg)
    } else {
        Ok(msg)
    }
}

fn compactness() -> Outcome {
    let spec = SyntheticSceneSpec {
        seed: 4,
        walls: 24,
        poles: 24,
        trunks: 16,
        ellipsoids: 20,
        spheres: 16,
        extent: 50.0,
        overlap: 1.0,
        density: 64.0,
        ground_density: 12.0,
        ..Default::default()
    };
    let s = generate_scene(&spec).map_err(|e| e.to_string())?;
    if s.cloud_x.len() < 110_000 {
        return Err(format!("scene has only {} points", s.cloud_x.len()));
    }
    let (x, _) = represent(&s.cloud_x, &Config::default().scene, 4).map_err(|e| e.to_string())?;
    let ours = scene_to_text(&x).len();
    let mut voxels = String::new();
    for p in voxel_downsample(&s.cloud_x.points, 0.5) {
        voxels.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
    }
    let ratio = ours as f64 / voxels.len() as f64;
    let msg = format!(
        "{} points, {} records: {ours} B vs {} B voxel text (ratio {ratio:.4})",
        s.cloud_x.len(),
        x.element_count(),
        voxels.len()
    );
    if ratio < 1.0 / 20.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn statistical_fitting() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let nd = Normal::new(0.0, 1.0).unwrap();
    let c = Vector3::new(3.0, -2.0, 1.0);
    let sigma = Vector3::new(2.0, 1.0, 0.5);
    let pts: Vec<_> = (0..10_000)
        .map(|_| c + Vector3::new(sigma.x * nd.sample(&mut rng), sigma.y * nd.sample(&mut rng), sigma.z * nd.sample(&mut rng)))
        .collect();
    let fit = fit_statistical(&pts, QuadricKind::Ellipsoid, 1.645, 0.0).map_err(|e| e.to_string())?;
    let rel = (0..3).map(|i| (fit.scale[i] - 1.645 * sigma[i]).abs() / (1.645 * sigma[i])).fold(0.0, f64::max);
    let dc = (fit.pose.translation - c).norm();
    let msg = format!("worst axis error {:.2}%, center error {dc:.4} m", rel * 100.0);
    if rel <= 0.03 && dc <= 0.05 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn run_cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_quadreg")).args(args).output().map_err(|e| e.to_string())?;
    if out.status.code() != Some(0) {
        return Err(format!("{args:?} exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

/// Every file under `dir`, sorted by name, with its contents.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn one_run(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let p = |f: &str| dir.join(f).to_string_lossy().into_owned();
    let frames = dir.join("frames");
    let fr = |f: &str| frames.join(f).to_string_lossy().into_owned();
    run_cli(&["--seed", "11", "synth", "--count", "2", "-o", &p("frames")])?;
    run_cli(&["--seed", "11", "represent", &fr("000000.ply"), "-o", &p("rep.json")])?;
    run_cli(&["--seed", "11", "represent", &fr("000000.ply"), "-o", &p("rep.txt")])?;
    run_cli(&["--seed", "11", "register", &fr("000000.ply"), &fr("000001.ply"), "-o", &p("reg.json")])?;
    run_cli(&["--seed", "11", "bench", "--pairs", &fr("pairs.json"), "--clouds", &fr(""), "-o", &p("bench.json"), "--csv", &p("bench.csv")])?;
    let mut poses = String::new();
    for i in 0..60 {
        let a = i as f64 * 0.05;
        poses.push_str(&format!("{} {} 0 {} {} {} 0 {} 0 0 1 0\n", a.cos(), -a.sin(), 10.0 * a.cos(), a.sin(), a.cos(), 10.0 * a.sin()));
    }
    std::fs::write(dir.join("poses.txt"), poses).map_err(|e| e.to_string())?;
    run_cli(&["pairs", "--poses", &p("poses.txt"), "--mode", "odo", "-o", &p("odo.json")])?;
    run_cli(&["pairs", "--poses", &p("poses.txt"), "--mode", "loop", "--d-min", "0", "--d-max", "4", "--t-gap", "5", "-o", &p("loop.json")])?;
    let config = run_cli(&["--seed", "11", "config"])?;
    let mut files = snapshot(dir);
    files.extend(snapshot(&frames).into_iter().map(|(n, c)| (format!("frames/{n}"), c)));
    files.push(("config.toml".into(), config));
    Ok(files)
}

fn determinism() -> Outcome {
    let a = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let b = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let (ra, rb) = (one_run(a.path())?, one_run(b.path())?);
    if ra.len() != rb.len() {
        return Err(format!("{} vs {} output files", ra.len(), rb.len()));
    }
    for ((na, ca), (nb, cb)) in ra.iter().zip(&rb) {
        if na != nb || ca != cb {
            return Err(format!("{na} differs between runs"));
        }
    }
    Ok(format!("{} outputs of synth, represent, register, bench, pairs and config identical", ra.len()))
}

fn main() {
    let mut failures = 0;
    let mut report = |name: &str, outcome: Outcome| {
        match &outcome {
            Ok(msg) => println!("PASS {name}: {msg}"),
            Err(msg) => {
                failures += 1;
                println!("FAIL {name}: {msg}");
            }
        }
    };
    report("quadric round-trip", quadric_round_trip());
    report("jacobian suite", jacobian_suite());
    report("clique oracle", clique_oracle());
    report("invariance", invariance());
    report("svd exactness", svd_exactness());
    let start = Instant::now();
    let suite = synthetic_suite();
    report("end-to-end synthetic success rate", end_to_end(&suite, start.elapsed()));
    report("refinement benefit", refinement_benefit(&suite));
    report("compactness", compactness());
    report("statistical fitting", statistical_fitting());
    report("determinism", determinism());
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
