//! PLY vertex reader (ASCII and binary little-endian) and ASCII writer.

use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

const LABEL_NAMES: [&str; 3] = ["label", "class", "semantic"];

#[derive(Debug, Clone, Copy, PartialEq)]
enum Format {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F64 => f64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]]),
        }
    }
}

struct Header {
    format: Format,
    vertex_count: usize,
    properties: Vec<(String, ScalarType)>,
    /// Line number of `end_header` (1-based).
    end_line: usize,
    /// Byte offset just past `end_header\n`.
    body_offset: usize,
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<Header> {
    let mut format = None;
    let mut vertex_count = None;
    let mut properties = Vec::new();
    let mut in_vertex = false;
    let mut seen_other_element = false;
    let mut offset = 0;
    let mut line_no = 0;
    loop {
        let rest = &bytes[offset..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::parse(path, line_no + 1, "unterminated PLY header"))?;
        let line = std::str::from_utf8(&rest[..end])
            .map_err(|_| Error::parse(path, line_no + 1, "header is not UTF-8"))?
            .trim_end_matches('\r')
            .trim();
        offset += end + 1;
        line_no += 1;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("ply") if line_no == 1 => {}
            _ if line_no == 1 => return Err(Error::parse(path, 1, "missing 'ply' magic")),
            Some("format") => {
                format = Some(match tok.next() {
                    Some("ascii") => Format::Ascii,
                    Some("binary_little_endian") => Format::BinaryLittleEndian,
                    Some(other) => {
                        return Err(Error::parse(path, line_no, format!("unsupported format '{other}'")))
                    }
                    None => return Err(Error::parse(path, line_no, "format line without a value")),
                });
            }
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let name = tok.next().unwrap_or("");
                let count = tok
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| Error::parse(path, line_no, "element without a valid count"))?;
                if name == "vertex" {
                    if seen_other_element {
                        return Err(Error::parse(path, line_no, "vertex element must come first"));
                    }
                    vertex_count = Some(count);
                    in_vertex = true;
                } else {
                    seen_other_element = true;
                    in_vertex = false;
                }
            }
            Some("property") => {
                if !in_vertex {
                    continue;
                }
                let ty = tok.next().unwrap_or("");
                if ty == "list" {
                    return Err(Error::parse(path, line_no, "list properties on vertices are not supported"));
                }
                let scalar = ScalarType::parse(ty)
                    .ok_or_else(|| Error::parse(path, line_no, format!("unknown property type '{ty}'")))?;
                let name = tok
                    .next()
                    .ok_or_else(|| Error::parse(path, line_no, "property without a name"))?;
                properties.push((name.to_string(), scalar));
            }
            Some("end_header") => break,
            Some(other) => return Err(Error::parse(path, line_no, format!("unexpected header entry '{other}'"))),
        }
    }
    Ok(Header {
        format: format.ok_or_else(|| Error::parse(path, line_no, "missing format line"))?,
        vertex_count: vertex_count.ok_or_else(|| Error::parse(path, line_no, "missing vertex element"))?,
        properties,
        end_line: line_no,
        body_offset: offset,
    })
}

pub fn parse_ply(path: &Path, bytes: &[u8]) -> Result<PointCloud> {
    let header = parse_header(path, bytes)?;
    let find = |n: &str| header.properties.iter().position(|(p, _)| p == n);
    let (ix, iy, iz) = match (find("x"), find("y"), find("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(Error::parse(path, header.end_line, "vertex element lacks x/y/z")),
    };
    let il = LABEL_NAMES.iter().find_map(|n| find(n));
    let n = header.vertex_count;
    let mut points = Vec::with_capacity(n);
    let mut labels = il.map(|_| Vec::with_capacity(n));
    let body = &bytes[header.body_offset..];

    match header.format {
        Format::Ascii => {
            let text = std::str::from_utf8(body)
                .map_err(|_| Error::parse(path, header.end_line + 1, "body is not UTF-8"))?;
            let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
            for _ in 0..n {
                let (k, line) = lines
                    .next()
                    .ok_or_else(|| Error::parse(path, header.end_line + 1, format!("expected {n} vertices")))?;
                let line_no = header.end_line + 1 + k;
                let values: Vec<f64> = line
                    .split_whitespace()
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::parse(path, line_no, format!("bad number: {e}")))?;
                if values.len() < header.properties.len() {
                    return Err(Error::parse(
                        path,
                        line_no,
                        format!("expected {} values, found {}", header.properties.len(), values.len()),
                    ));
                }
                points.push(Vector3::new(values[ix], values[iy], values[iz]));
                if let (Some(l), Some(il)) = (labels.as_mut(), il) {
                    l.push(to_label(values[il]).ok_or_else(|| Error::parse(path, line_no, "label is not a non-negative integer"))?);
                }
            }
        }
        Format::BinaryLittleEndian => {
            let offsets: Vec<usize> = header
                .properties
                .iter()
                .scan(0, |acc, (_, t)| {
                    let o = *acc;
                    *acc += t.size();
                    Some(o)
                })
                .collect();
            let stride: usize = header.properties.iter().map(|(_, t)| t.size()).sum();
            if body.len() < stride * n {
                return Err(Error::parse(
                    path,
                    header.end_line + 1,
                    format!("binary body holds {} bytes, need {}", body.len(), stride * n),
                ));
            }
            let read = |rec: &[u8], i: usize| header.properties[i].1.read_le(&rec[offsets[i]..]);
            for k in 0..n {
                let rec = &body[k * stride..(k + 1) * stride];
                points.push(Vector3::new(read(rec, ix), read(rec, iy), read(rec, iz)));
                if let (Some(l), Some(il)) = (labels.as_mut(), il) {
                    l.push(to_label(read(rec, il)).ok_or_else(|| {
                        Error::parse(path, header.end_line + 1, format!("vertex {k}: label is not a non-negative integer"))
                    })?);
                }
            }
        }
    }
    let cloud = PointCloud { points, labels };
    cloud.validate()?;
    Ok(cloud)
}

fn to_label(v: f64) -> Option<u32> {
    (v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64).then_some(v as u32)
}

pub fn write_ply(cloud: &PointCloud, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "ply")?;
    writeln!(out, "format ascii 1.0")?;
    writeln!(out, "element vertex {}", cloud.len())?;
    writeln!(out, "property double x")?;
    writeln!(out, "property double y")?;
    writeln!(out, "property double z")?;
    if cloud.labels.is_some() {
        writeln!(out, "property uint label")?;
    }
    writeln!(out, "end_header")?;
    for (i, p) in cloud.points.iter().enumerate() {
        match cloud.label(i) {
            Some(l) => writeln!(out, "{} {} {} {}", p.x, p.y, p.z, l)?,
            None => writeln!(out, "{} {} {}", p.x, p.y, p.z)?,
        }
    }
    Ok(())
}
