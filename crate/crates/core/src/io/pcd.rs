//! ASCII PCD reader and writer (`x y z [label]`).

use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

pub fn parse_pcd(path: &Path, text: &str) -> Result<PointCloud> {
    let mut fields: Vec<String> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    let mut points_decl: Option<usize> = None;
    let mut lines = text.lines().enumerate();
    let mut data_line = None;
    for (k, raw) in lines.by_ref() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tok = line.split_whitespace();
        let key = tok.next().unwrap_or("").to_ascii_uppercase();
        let rest: Vec<&str> = tok.collect();
        match key.as_str() {
            "FIELDS" => fields = rest.iter().map(|s| s.to_string()).collect(),
            "COUNT" => {
                counts = rest
                    .iter()
                    .map(|s| s.parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::parse(path, k + 1, "bad COUNT entry"))?
            }
            "POINTS" => {
                points_decl = Some(
                    rest.first()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| Error::parse(path, k + 1, "bad POINTS entry"))?,
                )
            }
            "DATA" => {
                if rest.first().map(|s| s.to_ascii_lowercase()) != Some("ascii".into()) {
                    return Err(Error::parse(path, k + 1, "only DATA ascii is supported"));
                }
                data_line = Some(k + 1);
                break;
            }
            "VERSION" | "SIZE" | "TYPE" | "WIDTH" | "HEIGHT" | "VIEWPOINT" => {}
            other => return Err(Error::parse(path, k + 1, format!("unknown header key '{other}'"))),
        }
    }
    let data_line = data_line.ok_or_else(|| Error::parse(path, text.lines().count().max(1), "missing DATA line"))?;
    if counts.iter().any(|&c| c != 1) {
        return Err(Error::parse(path, data_line, "multi-count fields are not supported"));
    }
    let find = |n: &str| fields.iter().position(|f| f == n);
    let (ix, iy, iz) = match (find("x"), find("y"), find("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(Error::parse(path, data_line, "FIELDS lacks x/y/z")),
    };
    let il = find("label");
    let mut points = Vec::with_capacity(points_decl.unwrap_or(0));
    let mut labels = il.map(|_| Vec::new());
    for (k, raw) in lines {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let line_no = k + 1;
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(path, line_no, format!("bad number: {e}")))?;
        if values.len() != fields.len() {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected {} values, found {}", fields.len(), values.len()),
            ));
        }
        points.push(Vector3::new(values[ix], values[iy], values[iz]));
        if let (Some(l), Some(il)) = (labels.as_mut(), il) {
            let v = values[il];
            if v < 0.0 || v.fract() != 0.0 {
                return Err(Error::parse(path, line_no, "label is not a non-negative integer"));
            }
            l.push(v as u32);
        }
    }
    if let Some(n) = points_decl {
        if n != points.len() {
            return Err(Error::parse(
                path,
                data_line,
                format!("POINTS declares {n} but {} were read", points.len()),
            ));
        }
    }
    let cloud = PointCloud { points, labels };
    cloud.validate()?;
    Ok(cloud)
}

pub fn write_pcd(cloud: &PointCloud, out: &mut impl Write) -> std::io::Result<()> {
    let labeled = cloud.labels.is_some();
    writeln!(out, "VERSION 0.7")?;
    if labeled {
        writeln!(out, "FIELDS x y z label")?;
        writeln!(out, "SIZE 8 8 8 4")?;
        writeln!(out, "TYPE F F F U")?;
        writeln!(out, "COUNT 1 1 1 1")?;
    } else {
        writeln!(out, "FIELDS x y z")?;
        writeln!(out, "SIZE 8 8 8")?;
        writeln!(out, "TYPE F F F")?;
        writeln!(out, "COUNT 1 1 1")?;
    }
    writeln!(out, "WIDTH {}", cloud.len())?;
    writeln!(out, "HEIGHT 1")?;
    writeln!(out, "VIEWPOINT 0 0 0 1 0 0 0")?;
    writeln!(out, "POINTS {}", cloud.len())?;
    writeln!(out, "DATA ascii")?;
    for (i, p) in cloud.points.iter().enumerate() {
        match cloud.label(i) {
            Some(l) => writeln!(out, "{} {} {} {}", p.x, p.y, p.z, l)?,
            None => writeln!(out, "{} {} {}", p.x, p.y, p.z)?,
        }
    }
    Ok(())
}
