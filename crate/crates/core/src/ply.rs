//! PLY reader/writer for labeled clouds.
//!
//! Layout (one `vertex` element, properties in this order):
//!
//! ```text
//! ply
//! format binary_little_endian 1.0        (or: format ascii 1.0)
//! comment seed=<u64>
//! comment generator=<string>
//! element vertex <N>
//! property float x
//! property float y
//! property float z
//! property uchar semantic
//! property int tree_id
//! property int branch_id
//! end_header
//! ```
//!
//! A binary record is 21 bytes: three little-endian `f32`, one `u8`, two `i32`.

use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::cloud::{CloudMetadata, Label, LabeledPoint, LabeledPointCloud, Semantic};
use crate::geom::Point3;

/// Bytes per point in the binary body.
pub const BINARY_RECORD_SIZE: usize = 21;

const PROPERTIES: [(&str, &[&str]); 6] = [
    ("x", &["float", "float32"]),
    ("y", &["float", "float32"]),
    ("z", &["float", "float32"]),
    ("semantic", &["uchar", "uint8"]),
    ("tree_id", &["int", "int32"]),
    ("branch_id", &["int", "int32"]),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Encoding {
    Ascii,
    #[default]
    BinaryLittleEndian,
}

#[derive(Debug, Error)]
pub enum CloudIoError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("cannot encode cloud: {0}")]
    Encode(String),
}

fn parse_err(offset: usize, message: impl Into<String>) -> CloudIoError {
    CloudIoError::Parse { offset, message: message.into() }
}

/// Exact size in bytes of the header `write_cloud` produces for `cloud`.
pub fn header_len(cloud: &LabeledPointCloud, encoding: Encoding) -> usize {
    header_text(cloud, encoding).len()
}

fn header_text(cloud: &LabeledPointCloud, encoding: Encoding) -> String {
    let format = match encoding {
        Encoding::Ascii => "ascii",
        Encoding::BinaryLittleEndian => "binary_little_endian",
    };
    let mut h = String::with_capacity(256);
    h.push_str("ply\n");
    h.push_str(&format!("format {format} 1.0\n"));
    h.push_str(&format!("comment seed={}\n", cloud.metadata.seed));
    h.push_str(&format!("comment generator={}\n", cloud.metadata.generator));
    h.push_str(&format!("element vertex {}\n", cloud.len()));
    for (name, types) in PROPERTIES {
        h.push_str(&format!("property {} {name}\n", types[0]));
    }
    h.push_str("end_header\n");
    h
}

/// Serializes `cloud` to bytes. Coordinates are written as `f32`.
pub fn encode_cloud(cloud: &LabeledPointCloud, encoding: Encoding) -> Result<Vec<u8>, CloudIoError> {
    if cloud.metadata.generator.contains(['\n', '\r']) {
        return Err(CloudIoError::Encode("generator string contains a line break".into()));
    }
    let mut out = header_text(cloud, encoding).into_bytes();
    match encoding {
        Encoding::BinaryLittleEndian => {
            out.reserve(cloud.len() * BINARY_RECORD_SIZE);
            for p in &cloud.points {
                for c in [p.position.x, p.position.y, p.position.z] {
                    out.extend_from_slice(&(c as f32).to_le_bytes());
                }
                out.push(p.label.semantic.code());
                out.extend_from_slice(&(p.label.tree_id as i32).to_le_bytes());
                out.extend_from_slice(&(p.label.branch_id as i32).to_le_bytes());
            }
        }
        Encoding::Ascii => {
            for p in &cloud.points {
                writeln!(
                    out,
                    "{} {} {} {} {} {}",
                    p.position.x as f32,
                    p.position.y as f32,
                    p.position.z as f32,
                    p.label.semantic.code(),
                    p.label.tree_id as i32,
                    p.label.branch_id as i32
                )?;
            }
        }
    }
    Ok(out)
}

pub fn write_cloud(
    cloud: &LabeledPointCloud,
    path: impl AsRef<Path>,
    encoding: Encoding,
) -> Result<(), CloudIoError> {
    let bytes = encode_cloud(cloud, encoding)?;
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_cloud(path: impl AsRef<Path>) -> Result<LabeledPointCloud, CloudIoError> {
    let bytes = fs::read(path)?;
    decode_cloud(&bytes)
}

struct Header {
    encoding: Encoding,
    count: usize,
    metadata: CloudMetadata,
    body_offset: usize,
}

/// Reads one `\n`-terminated line starting at `pos`; returns (line, next_pos).
fn next_line(bytes: &[u8], pos: usize) -> Result<(&str, usize), CloudIoError> {
    let rest = &bytes[pos.min(bytes.len())..];
    let end = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| parse_err(pos, "unterminated header line"))?;
    let line = std::str::from_utf8(&rest[..end])
        .map_err(|_| parse_err(pos, "header is not valid UTF-8"))?;
    Ok((line.trim_end_matches('\r'), pos + end + 1))
}

fn parse_header(bytes: &[u8]) -> Result<Header, CloudIoError> {
    let (magic, mut pos) = next_line(bytes, 0)?;
    if magic != "ply" {
        return Err(parse_err(0, "missing 'ply' magic"));
    }
    let mut encoding = None;
    let mut count = None;
    let mut metadata = CloudMetadata::default();
    let mut props = 0usize;
    loop {
        let start = pos;
        let (line, next) = next_line(bytes, pos)?;
        pos = next;
        let mut words = line.split_whitespace();
        match words.next() {
            Some("end_header") => break,
            Some("format") => {
                encoding = Some(match (words.next(), words.next()) {
                    (Some("ascii"), Some("1.0")) => Encoding::Ascii,
                    (Some("binary_little_endian"), Some("1.0")) => Encoding::BinaryLittleEndian,
                    _ => return Err(parse_err(start, format!("unsupported format line '{line}'"))),
                });
            }
            Some("comment") => {
                let text = line["comment".len()..].trim_start();
                if let Some(seed) = text.strip_prefix("seed=") {
                    metadata.seed = seed
                        .trim()
                        .parse()
                        .map_err(|_| parse_err(start, format!("invalid seed comment '{text}'")))?;
                } else if let Some(g) = text.strip_prefix("generator=") {
                    metadata.generator = g.to_string();
                }
            }
            Some("obj_info") => {}
            Some("element") => {
                if count.is_some() {
                    return Err(parse_err(start, "only a single 'vertex' element is supported"));
                }
                match (words.next(), words.next().map(str::parse::<usize>)) {
                    (Some("vertex"), Some(Ok(n))) => count = Some(n),
                    _ => return Err(parse_err(start, format!("malformed element line '{line}'"))),
                }
            }
            Some("property") => {
                if count.is_none() {
                    return Err(parse_err(start, "property before element"));
                }
                let (ty, name) = (words.next(), words.next());
                let Some((want_name, want_types)) = PROPERTIES.get(props) else {
                    return Err(parse_err(start, format!("unexpected extra property '{line}'")));
                };
                match (ty, name) {
                    (Some(t), Some(n)) if n == *want_name && want_types.contains(&t) => {}
                    _ => {
                        return Err(parse_err(
                            start,
                            format!("expected 'property {} {want_name}', found '{line}'", want_types[0]),
                        ))
                    }
                }
                props += 1;
            }
            _ => return Err(parse_err(start, format!("unrecognized header line '{line}'"))),
        }
    }
    let encoding = encoding.ok_or_else(|| parse_err(0, "missing format line"))?;
    let count = count.ok_or_else(|| parse_err(0, "missing 'element vertex' line"))?;
    if props != PROPERTIES.len() {
        return Err(parse_err(pos, format!("expected {} properties, found {props}", PROPERTIES.len())));
    }
    Ok(Header { encoding, count, metadata, body_offset: pos })
}

fn make_point(
    record: usize,
    offset: usize,
    xyz: [f32; 3],
    semantic: u8,
    tree_id: i32,
    branch_id: i32,
) -> Result<LabeledPoint, CloudIoError> {
    let fail = |m: String| parse_err(offset, format!("record {record}: {m}"));
    let semantic = Semantic::try_from(semantic).map_err(|e| fail(e.to_string()))?;
    if tree_id < 1 {
        return Err(fail(format!("tree_id must be >= 1, got {tree_id}")));
    }
    if branch_id < 0 {
        return Err(fail(format!("branch_id must be >= 0, got {branch_id}")));
    }
    let position = Point3::new(xyz[0] as f64, xyz[1] as f64, xyz[2] as f64);
    let label = Label { semantic, tree_id: tree_id as u32, branch_id: branch_id as u32 };
    LabeledPoint::new(position, label).map_err(|e| fail(e.to_string()))
}

pub fn decode_cloud(bytes: &[u8]) -> Result<LabeledPointCloud, CloudIoError> {
    let header = parse_header(bytes)?;
    let mut points = Vec::with_capacity(header.count.min(bytes.len()));
    let mut pos = header.body_offset;
    match header.encoding {
        Encoding::BinaryLittleEndian => {
            let need = header.count.checked_mul(BINARY_RECORD_SIZE).and_then(|n| n.checked_add(pos));
            match need {
                Some(n) if n <= bytes.len() => {
                    if n < bytes.len() {
                        return Err(parse_err(n, format!("{} trailing bytes after body", bytes.len() - n)));
                    }
                }
                _ => {
                    let complete = (bytes.len() - pos) / BINARY_RECORD_SIZE;
                    return Err(parse_err(
                        pos + complete * BINARY_RECORD_SIZE,
                        format!("truncated payload: record {complete} of {} incomplete", header.count),
                    ));
                }
            }
            let f32_at = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
            let i32_at = |o: usize| i32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
            for record in 0..header.count {
                let xyz = [f32_at(pos), f32_at(pos + 4), f32_at(pos + 8)];
                let p = make_point(record, pos, xyz, bytes[pos + 12], i32_at(pos + 13), i32_at(pos + 17))?;
                points.push(p);
                pos += BINARY_RECORD_SIZE;
            }
        }
        Encoding::Ascii => {
            for record in 0..header.count {
                if pos >= bytes.len() {
                    return Err(parse_err(
                        pos,
                        format!("truncated payload: record {record} of {} missing", header.count),
                    ));
                }
                let start = pos;
                let (line, next) = match next_line(bytes, pos) {
                    Ok(v) => v,
                    // last line without trailing newline
                    Err(_) => (
                        std::str::from_utf8(&bytes[pos..])
                            .map_err(|_| parse_err(pos, format!("record {record}: invalid UTF-8")))?,
                        bytes.len(),
                    ),
                };
                pos = next;
                let fields: Vec<&str> = line.split_whitespace().collect();
                if fields.len() != 6 {
                    return Err(parse_err(
                        start,
                        format!("record {record}: expected 6 fields, found {}", fields.len()),
                    ));
                }
                let bad = |what: &str| parse_err(start, format!("record {record}: invalid {what}"));
                let mut xyz = [0f32; 3];
                for (k, v) in xyz.iter_mut().enumerate() {
                    *v = fields[k].parse().map_err(|_| bad(PROPERTIES[k].0))?;
                }
                let semantic: u8 = fields[3].parse().map_err(|_| bad("semantic"))?;
                let tree_id: i32 = fields[4].parse().map_err(|_| bad("tree_id"))?;
                let branch_id: i32 = fields[5].parse().map_err(|_| bad("branch_id"))?;
                points.push(make_point(record, start, xyz, semantic, tree_id, branch_id)?);
            }
            if bytes[pos.min(bytes.len())..].iter().any(|b| !b.is_ascii_whitespace()) {
                return Err(parse_err(pos, "trailing data after last record"));
            }
        }
    }
    Ok(LabeledPointCloud { points, metadata: header.metadata })
}
