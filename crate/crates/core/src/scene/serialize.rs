//! Text and JSON forms of a scene representation.
//!
//! Text: one record per line, `label q[10] s_f[3] eta_f[4] t_f[3]`, space
//! separated with shortest round-trip float formatting. Augmented records
//! follow a `# augmented` line and carry their 33 descriptor bins after the
//! 21 record values.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;
use serde_json::{json, Value};

use super::descriptor::{Descriptor, DESCRIPTOR_BINS};
use super::record::QuadricRecord;
use super::represent::SceneRepresentation;
use crate::error::{Error, Result};

fn push_values(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{v}").expect("write to string");
    }
}

fn push_record(out: &mut String, r: &QuadricRecord) {
    write!(out, "{}", r.label).expect("write to string");
    let v = r.to_values();
    out.push(' ');
    push_values(out, &v[1..]);
}

pub fn scene_to_text(scene: &SceneRepresentation) -> String {
    let mut out = String::new();
    let g = scene.ground_normal;
    writeln!(out, "# ground_normal {} {} {}", g.x, g.y, g.z).expect("write to string");
    for r in &scene.records {
        push_record(&mut out, r);
        out.push('\n');
    }
    if !scene.augmented.is_empty() {
        out.push_str("# augmented\n");
        for (r, d) in scene.augmented.iter().zip(&scene.descriptors) {
            push_record(&mut out, r);
            out.push(' ');
            push_values(&mut out, d);
            out.push('\n');
        }
    }
    out
}

fn record_json(r: &QuadricRecord) -> Value {
    json!({
        "label": r.label,
        "q": r.q,
        "s_f": r.s_f,
        "eta_f": r.eta_f,
        "t_f": r.t_f,
    })
}

pub fn scene_to_json(scene: &SceneRepresentation) -> Value {
    let g = scene.ground_normal;
    json!({
        "ground_normal": [g.x, g.y, g.z],
        "records": scene.records.iter().map(record_json).collect::<Vec<_>>(),
        "augmented": scene
            .augmented
            .iter()
            .zip(&scene.descriptors)
            .map(|(r, d)| {
                let mut v = record_json(r);
                v["descriptor"] = json!(d.to_vec());
                v
            })
            .collect::<Vec<_>>(),
    })
}

fn parse_record(path: &Path, line_no: usize, tok: &[&str]) -> Result<QuadricRecord> {
    let label: u32 = tok[0]
        .parse()
        .map_err(|_| Error::parse(path, line_no, format!("bad label '{}'", tok[0])))?;
    let v: Vec<f64> = tok[1..QuadricRecord::PARAMETERS]
        .iter()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::parse(path, line_no, format!("bad number: {e}")))?;
    let mut r = QuadricRecord {
        label,
        q: [0.0; 10],
        s_f: [0.0; 3],
        eta_f: [0.0; 4],
        t_f: [0.0; 3],
    };
    r.q.copy_from_slice(&v[0..10]);
    r.s_f.copy_from_slice(&v[10..13]);
    r.eta_f.copy_from_slice(&v[13..17]);
    r.t_f.copy_from_slice(&v[17..20]);
    Ok(r)
}

pub fn parse_scene_text(path: &Path, text: &str) -> Result<SceneRepresentation> {
    let mut scene = SceneRepresentation {
        records: Vec::new(),
        augmented: Vec::new(),
        descriptors: Vec::new(),
        ground_normal: Vector3::z(),
    };
    let mut in_augmented = false;
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let tok: Vec<&str> = rest.split_whitespace().collect();
            match tok.first() {
                Some(&"ground_normal") if tok.len() == 4 => {
                    let v: Vec<f64> = tok[1..]
                        .iter()
                        .map(|t| t.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| Error::parse(path, line_no, format!("bad ground normal: {e}")))?;
                    scene.ground_normal = Vector3::new(v[0], v[1], v[2]);
                }
                Some(&"augmented") => in_augmented = true,
                _ => {}
            }
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        let want = QuadricRecord::PARAMETERS + if in_augmented { DESCRIPTOR_BINS } else { 0 };
        if tok.len() != want {
            return Err(Error::parse(path, line_no, format!("expected {want} values, found {}", tok.len())));
        }
        let r = parse_record(path, line_no, &tok)?;
        if in_augmented {
            let mut d: Descriptor = [0.0; DESCRIPTOR_BINS];
            for (dst, t) in d.iter_mut().zip(&tok[QuadricRecord::PARAMETERS..]) {
                *dst = t
                    .parse()
                    .map_err(|e| Error::parse(path, line_no, format!("bad descriptor value: {e}")))?;
            }
            scene.augmented.push(r);
            scene.descriptors.push(d);
        } else {
            scene.records.push(r);
        }
    }
    Ok(scene)
}
