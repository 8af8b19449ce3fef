//! Adaptation-matrix files.
//!
//! Both encodings share a text header of `#`-prefixed lines:
//!
//! ```text
//! #adapt-matrix,1
//! #method,<name>
//! #source,<label>,<label>,...
//! #target,labels,<label>,...        (or #target,harmonics,SH0:0,...)
//! #meta,<key>,<value>               (zero or more, sorted by key)
//! #bias,<v>,<v>,...                 (only when the matrix has a bias)
//! ```
//!
//! CSV follows the header with `#sha256,<hex>` and one comma-separated row
//! per output channel. Numbers use the shortest decimal that reads back to
//! the same `f64`, so CSV round trips are exact. The digest covers every
//! byte of the file except the `#sha256` line itself. The 2×2 identity on
//! channels `A,B` is exactly:
//!
//! ```text
//! #adapt-matrix,1
//! #method,identity
//! #source,A,B
//! #target,labels,A,B
//! #sha256,<64 hex digits>
//! 1,0
//! 0,1
//! ```
//!
//! Binary: `"EEGM" | u16 version = 1 | u32 rows | u32 cols | u32 header
//! length | header text | rows × cols f64 (row-major, little-endian) |
//! 32-byte SHA-256 of everything before it`.

use std::collections::BTreeMap;
use std::path::Path;

use chanadapt::basis::ShIndex;
use chanadapt::{AdaptationMatrix, DMatrix, DVector, Method, TargetDescriptor};
use sha2::{Digest, Sha256};

use super::{read_bytes, write_bytes, ByteReader, OutputFormat};
use crate::error::{CliError, Result};

pub const MATRIX_MAGIC: &[u8; 4] = b"EEGM";
pub const MATRIX_VERSION: u16 = 1;
const CSV_TAG: &str = "#adapt-matrix,1";

fn join_f64(values: impl Iterator<Item = f64>) -> String {
    values.map(|v| format!("{v}")).collect::<Vec<_>>().join(",")
}

fn header_text(m: &AdaptationMatrix) -> std::result::Result<String, String> {
    let mut out = format!("{CSV_TAG}\n#method,{}\n#source,{}\n", m.method(), m.source_labels().join(","));
    match m.target() {
        TargetDescriptor::Labels(l) => out.push_str(&format!("#target,labels,{}\n", l.join(","))),
        TargetDescriptor::Harmonics(h) => {
            let labels: Vec<String> = h.iter().map(|i| i.label()).collect();
            out.push_str(&format!("#target,harmonics,{}\n", labels.join(",")));
        }
    }
    for (k, v) in m.metadata() {
        if k.is_empty() || k.contains([',', '\n', '\r']) || v.contains(['\n', '\r']) {
            return Err(format!("metadata entry {k:?} cannot be stored"));
        }
        out.push_str(&format!("#meta,{k},{v}\n"));
    }
    if let Some(b) = m.bias() {
        out.push_str(&format!("#bias,{}\n", join_f64(b.iter().copied())));
    }
    Ok(out)
}

struct Header {
    method: Method,
    source: Vec<String>,
    target: TargetDescriptor,
    meta: BTreeMap<String, String>,
    bias: Option<DVector<f64>>,
}

fn parse_f64_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|f| f.parse::<f64>().map_err(|_| format!("invalid number {f:?}")))
        .collect()
}

fn parse_header<'a>(lines: impl Iterator<Item = &'a str>) -> std::result::Result<Header, String> {
    let mut lines = lines.peekable();
    if lines.next() != Some(CSV_TAG) {
        return Err(format!("missing `{CSV_TAG}` line"));
    }
    let mut method = None;
    let mut source = None;
    let mut target = None;
    let mut meta = BTreeMap::new();
    let mut bias = None;
    for line in lines {
        let (key, rest) = line
            .strip_prefix('#')
            .and_then(|l| l.split_once(','))
            .ok_or_else(|| format!("malformed header line {line:?}"))?;
        match key {
            "method" => method = Some(rest.parse::<Method>().map_err(|e| e.to_string())?),
            "source" => source = Some(rest.split(',').map(str::to_string).collect::<Vec<_>>()),
            "target" => {
                let (kind, list) = rest.split_once(',').unwrap_or((rest, ""));
                let items: Vec<String> = list.split(',').map(str::to_string).collect();
                target = Some(match kind {
                    "labels" => TargetDescriptor::Labels(items),
                    "harmonics" => TargetDescriptor::Harmonics(
                        items
                            .iter()
                            .map(|s| ShIndex::parse_label(s).ok_or_else(|| format!("bad harmonic {s:?}")))
                            .collect::<std::result::Result<_, _>>()?,
                    ),
                    other => return Err(format!("unknown target kind {other:?}")),
                });
            }
            "meta" => {
                let (k, v) = rest.split_once(',').ok_or("meta line without value")?;
                meta.insert(k.to_string(), v.to_string());
            }
            "bias" => bias = Some(DVector::from_vec(parse_f64_list(rest)?)),
            other => return Err(format!("unknown header key {other:?}")),
        }
    }
    Ok(Header {
        method: method.ok_or("missing #method")?,
        source: source.ok_or("missing #source")?,
        target: target.ok_or("missing #target")?,
        meta,
        bias,
    })
}

fn assemble(h: Header, matrix: DMatrix<f64>) -> std::result::Result<AdaptationMatrix, String> {
    let mut m = AdaptationMatrix::new(matrix, h.method, &h.source, h.target).map_err(|e| e.to_string())?;
    if let Some(b) = h.bias {
        m = m.with_bias(b).map_err(|e| e.to_string())?;
    }
    for (k, v) in h.meta {
        m.set_meta(&k, v);
    }
    Ok(m)
}

pub fn encode_matrix_csv(m: &AdaptationMatrix) -> std::result::Result<String, String> {
    let header = header_text(m)?;
    let mut body = String::new();
    for row in m.matrix().row_iter() {
        body.push_str(&join_f64(row.iter().copied()));
        body.push('\n');
    }
    let mut hasher = Sha256::new();
    hasher.update(header.as_bytes());
    hasher.update(body.as_bytes());
    let digest = hex::encode(hasher.finalize());
    Ok(format!("{header}#sha256,{digest}\n{body}"))
}

pub fn decode_matrix_csv(text: &str) -> std::result::Result<AdaptationMatrix, String> {
    let (header, rest) = text
        .split_once("#sha256,")
        .ok_or("missing #sha256 line")?;
    let (digest, body) = rest.split_once('\n').ok_or("truncated after #sha256")?;
    let mut hasher = Sha256::new();
    hasher.update(header.as_bytes());
    hasher.update(body.as_bytes());
    if hex::encode(hasher.finalize()) != digest {
        return Err("checksum mismatch".into());
    }
    if !header.ends_with('\n') || !(body.is_empty() || body.ends_with('\n')) {
        return Err("truncated line".into());
    }
    let h = parse_header(header.lines())?;
    let rows = body
        .lines()
        .map(parse_f64_list)
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let cols = h.source.len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(format!("every row must have {cols} values"));
    }
    let matrix = DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]);
    assemble(h, matrix)
}

pub fn encode_matrix_binary(m: &AdaptationMatrix) -> std::result::Result<Vec<u8>, String> {
    let header = header_text(m)?;
    let (r, c) = m.shape();
    let mut out = Vec::with_capacity(18 + header.len() + r * c * 8 + 32);
    out.extend_from_slice(MATRIX_MAGIC);
    out.extend_from_slice(&MATRIX_VERSION.to_le_bytes());
    for n in [r, c, header.len()] {
        out.extend_from_slice(&u32::try_from(n).map_err(|_| "matrix too large")?.to_le_bytes());
    }
    out.extend_from_slice(header.as_bytes());
    for row in m.matrix().row_iter() {
        for v in row.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

pub fn decode_matrix_binary(bytes: &[u8]) -> std::result::Result<AdaptationMatrix, String> {
    if bytes.len() < 32 {
        return Err("truncated".into());
    }
    let (payload, digest) = bytes.split_at(bytes.len() - 32);
    let mut r = ByteReader::new(payload);
    if r.take(4)? != MATRIX_MAGIC {
        return Err("missing EEGM magic".into());
    }
    let version = r.u16()?;
    if version != MATRIX_VERSION {
        return Err(format!("unsupported matrix version {version}"));
    }
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    let hlen = r.u32()? as usize;
    let header = std::str::from_utf8(r.take(hlen)?).map_err(|_| "header is not UTF-8")?;
    let n = rows.checked_mul(cols).and_then(|n| n.checked_mul(8)).ok_or("size overflow")?;
    if r.remaining() != n {
        return Err(format!("expected {n} value bytes, found {}", r.remaining()));
    }
    if Sha256::digest(payload).as_slice() != digest {
        return Err("checksum mismatch".into());
    }
    let h = parse_header(header.lines())?;
    let mut matrix = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            matrix[(i, j)] = r.f64()?;
        }
    }
    assemble(h, matrix)
}

pub fn save_matrix(path: &Path, m: &AdaptationMatrix, format: OutputFormat) -> Result<()> {
    let bytes = match format {
        OutputFormat::Csv => encode_matrix_csv(m).map(String::into_bytes),
        OutputFormat::Binary => encode_matrix_binary(m),
    }
    .map_err(|e| CliError::format(path, e))?;
    write_bytes(path, &bytes)
}

/// Loads either encoding, detected by the binary magic.
pub fn load_matrix(path: &Path) -> Result<AdaptationMatrix> {
    let bytes = read_bytes(path)?;
    let decoded = if bytes.starts_with(MATRIX_MAGIC) {
        decode_matrix_binary(&bytes)
    } else {
        std::str::from_utf8(&bytes)
            .map_err(|_| "neither binary nor UTF-8 CSV".to_string())
            .and_then(decode_matrix_csv)
    };
    decoded.map_err(|m| CliError::format(path, m))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> AdaptationMatrix {
        let m = DMatrix::from_row_slice(2, 3, &[0.1, -0.0, 1.0 / 3.0, 1e-300, 2.5e10, -7.0]);
        AdaptationMatrix::new(m, Method::Ssi, &["Cz", "Pz", "Oz"], TargetDescriptor::Labels(vec!["C3".into(), "C4".into()]))
            .unwrap()
            .with_meta("stiffness", "4")
            .with_meta("note", "a, b and c")
    }

    fn bits(m: &DMatrix<f64>) -> Vec<u64> {
        m.iter().map(|v| v.to_bits()).collect()
    }

    #[test]
    fn identity_csv_literal() {
        let m = AdaptationMatrix::identity(&["A", "B"]).unwrap();
        let text = encode_matrix_csv(&m).unwrap();
        let head = "#adapt-matrix,1\n#method,identity\n#source,A,B\n#target,labels,A,B\n";
        let body = "1,0\n0,1\n";
        let digest = hex::encode(Sha256::digest(format!("{head}{body}").as_bytes()));
        assert_eq!(text, format!("{head}#sha256,{digest}\n{body}"));
    }

    #[test]
    fn round_trips_are_bitwise() {
        let m = sample();
        let csv = decode_matrix_csv(&encode_matrix_csv(&m).unwrap()).unwrap();
        let bin = decode_matrix_binary(&encode_matrix_binary(&m).unwrap()).unwrap();
        for back in [csv, bin] {
            assert_eq!(bits(back.matrix()), bits(m.matrix()));
            assert_eq!(back, m);
        }
    }

    #[test]
    fn harmonic_target_and_bias() {
        let h = TargetDescriptor::Harmonics(ShIndex::all(1));
        let m = AdaptationMatrix::new(DMatrix::from_element(4, 2, 0.5), Method::Conv1d, &["Cz", "Pz"], h)
            .unwrap()
            .with_bias(DVector::from_row_slice(&[1.0, -2.0, 0.0, 0.25]))
            .unwrap();
        assert_eq!(decode_matrix_csv(&encode_matrix_csv(&m).unwrap()).unwrap(), m);
        assert_eq!(decode_matrix_binary(&encode_matrix_binary(&m).unwrap()).unwrap(), m);
    }

    #[test]
    fn truncation_and_tampering_rejected() {
        let m = sample();
        let bin = encode_matrix_binary(&m).unwrap();
        for n in 0..bin.len() {
            assert!(decode_matrix_binary(&bin[..n]).is_err(), "{n}");
        }
        let mut flipped = bin.clone();
        flipped[40] ^= 1;
        assert!(decode_matrix_binary(&flipped).is_err());
        let csv = encode_matrix_csv(&m).unwrap();
        for n in [0, 10, csv.len() / 2, csv.len() - 1] {
            assert!(decode_matrix_csv(&csv[..n]).is_err(), "{n}");
        }
        assert!(decode_matrix_csv(&csv.replace("-7", "-8")).is_err());
    }
}
