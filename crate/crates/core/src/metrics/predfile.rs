//! Prediction files.
//!
//! ```text
//! pred v1 <n_points> <n_instances> [binary_little_endian]
//! ```
//!
//! Text variant: the next line holds `n_points` class digits with no
//! separators; each following line is one instance,
//! `class score count i_1 … i_count`, indices ascending.
//!
//! Binary variant: after the header's newline come `n_points` class bytes,
//! then per instance `u8 class, f32 score, u32 count, count × u32 index`.

use std::io::Write;
use std::path::Path;

use super::evaluate::PredictionSet;
use super::segments::Instance;
use super::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredEncoding {
    Text,
    BinaryLittleEndian,
}

pub fn encode_prediction(pred: &PredictionSet, enc: PredEncoding) -> Vec<u8> {
    let mut out = Vec::new();
    let (n, m) = (pred.semantic.len(), pred.instances.len());
    match enc {
        PredEncoding::Text => {
            writeln!(out, "pred v1 {n} {m}").unwrap();
            out.extend(pred.semantic.iter().map(|c| b'0' + c));
            out.push(b'\n');
            for inst in &pred.instances {
                write!(out, "{} {} {}", inst.class, inst.score, inst.points.len()).unwrap();
                for p in &inst.points {
                    write!(out, " {p}").unwrap();
                }
                out.push(b'\n');
            }
        }
        PredEncoding::BinaryLittleEndian => {
            writeln!(out, "pred v1 {n} {m} binary_little_endian").unwrap();
            out.extend_from_slice(&pred.semantic);
            for inst in &pred.instances {
                out.push(inst.class);
                out.extend_from_slice(&(inst.score as f32).to_le_bytes());
                out.extend_from_slice(&(inst.points.len() as u32).to_le_bytes());
                for p in &inst.points {
                    out.extend_from_slice(&p.to_le_bytes());
                }
            }
        }
    }
    out
}

pub fn write_prediction(pred: &PredictionSet, path: &Path, enc: PredEncoding) -> Result<(), MetricsError> {
    std::fs::write(path, encode_prediction(pred, enc))?;
    Ok(())
}

pub fn read_prediction(path: &Path) -> Result<PredictionSet, MetricsError> {
    decode_prediction(&std::fs::read(path)?)
}

fn parse_err(line: usize, message: impl Into<String>) -> MetricsError {
    MetricsError::Parse { line, message: message.into() }
}

/// Decodes either variant. Structural checks only; call
/// [`PredictionSet::validate`] for range checks against a cloud.
pub fn decode_prediction(bytes: &[u8]) -> Result<PredictionSet, MetricsError> {
    let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| parse_err(1, "missing header line"))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| parse_err(1, "header is not UTF-8"))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() < 4 || tokens[0] != "pred" || tokens[1] != "v1" {
        return Err(parse_err(1, format!("expected `pred v1 <n_points> <n_instances>`, got `{header}`")));
    }
    let count = |s: &str, what: &str| s.parse::<usize>().map_err(|_| parse_err(1, format!("bad {what} `{s}`")));
    let n = count(tokens[2], "point count")?;
    let m = count(tokens[3], "instance count")?;
    let body = &bytes[nl + 1..];
    match tokens.get(4..) {
        Some([]) => decode_text(body, n, m),
        Some(["binary_little_endian"]) => decode_binary(body, n, m),
        _ => Err(parse_err(1, format!("unknown encoding in `{header}`"))),
    }
}

fn decode_text(body: &[u8], n: usize, m: usize) -> Result<PredictionSet, MetricsError> {
    let text = std::str::from_utf8(body).map_err(|_| parse_err(2, "body is not UTF-8"))?;
    let mut lines = text.lines();
    let sem_line = lines.next().ok_or_else(|| parse_err(2, "missing semantic line"))?;
    if sem_line.len() != n {
        return Err(parse_err(2, format!("expected {n} class digits, found {}", sem_line.len())));
    }
    let semantic = sem_line
        .bytes()
        .map(|b| if b.is_ascii_digit() { Ok(b - b'0') } else { Err(parse_err(2, format!("non-digit `{}`", b as char))) })
        .collect::<Result<Vec<u8>, _>>()?;
    let mut instances = Vec::with_capacity(m);
    for k in 0..m {
        let ln = k + 3;
        let line = lines.next().ok_or_else(|| parse_err(ln, format!("expected {m} instances, found {k}")))?;
        let mut tok = line.split_whitespace();
        let mut next = |what: &str| tok.next().ok_or_else(|| parse_err(ln, format!("missing {what}")));
        let class = next("class")?.parse::<u8>().map_err(|e| parse_err(ln, format!("class: {e}")))?;
        let score = next("score")?.parse::<f64>().map_err(|e| parse_err(ln, format!("score: {e}")))?;
        let c = next("count")?.parse::<usize>().map_err(|e| parse_err(ln, format!("count: {e}")))?;
        let points = tok.map(|t| t.parse::<u32>().map_err(|e| parse_err(ln, format!("index `{t}`: {e}")))).collect::<Result<Vec<u32>, _>>()?;
        if points.len() != c {
            return Err(parse_err(ln, format!("count says {c} indices, found {}", points.len())));
        }
        instances.push(Instance { class, score, points });
    }
    if let Some(extra) = lines.find(|l| !l.trim().is_empty()) {
        return Err(parse_err(m + 3, format!("trailing data `{}`", extra.chars().take(40).collect::<String>())));
    }
    Ok(PredictionSet { semantic, instances })
}

fn decode_binary(body: &[u8], n: usize, m: usize) -> Result<PredictionSet, MetricsError> {
    // "line" for binary errors is the instance record number (semantic block = 0)
    let short = |rec: usize| parse_err(rec, "truncated binary data");
    if body.len() < n {
        return Err(short(0));
    }
    let semantic = body[..n].to_vec();
    let mut pos = n;
    let mut take = |len: usize, rec: usize| -> Result<&[u8], MetricsError> {
        let s = body.get(pos..pos + len).ok_or_else(|| short(rec))?;
        pos += len;
        Ok(s)
    };
    let mut instances = Vec::with_capacity(m.min(1 << 20));
    for k in 1..=m {
        let class = take(1, k)?[0];
        let score = f32::from_le_bytes(take(4, k)?.try_into().unwrap()) as f64;
        let c = u32::from_le_bytes(take(4, k)?.try_into().unwrap()) as usize;
        let raw = take(c.checked_mul(4).ok_or_else(|| short(k))?, k)?;
        let points = raw.chunks_exact(4).map(|b| u32::from_le_bytes(b.try_into().unwrap())).collect();
        instances.push(Instance { class, score, points });
    }
    if pos != body.len() {
        return Err(parse_err(m + 1, format!("{} trailing bytes", body.len() - pos)));
    }
    Ok(PredictionSet { semantic, instances })
}
