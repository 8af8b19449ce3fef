//! Signal files.
//!
//! EEGB (binary, little-endian):
//!
//! ```text
//! "EEGB" | u16 version = 1 | u32 n_channels | u32 n_samples | f64 sfreq
//! n_channels × (u16 byte length | UTF-8 label)
//! n_channels × n_samples f32 samples, channel-major
//! ```
//!
//! CSV: an optional `#sfreq,<hz>` line, the header `label,s0,s1,...`, then
//! one row per channel.

use std::path::Path;

use chanadapt::{DMatrix, Signal};

use super::{read_bytes, write_bytes, ByteReader, OutputFormat};
use crate::error::{CliError, Result};

pub const EEGB_MAGIC: &[u8; 4] = b"EEGB";
pub const EEGB_VERSION: u16 = 1;

pub fn encode_eegb(s: &Signal) -> std::result::Result<Vec<u8>, String> {
    let (c, t) = (s.n_channels(), s.n_samples());
    let mut out = Vec::with_capacity(22 + c * 8 + c * t * 4);
    out.extend_from_slice(EEGB_MAGIC);
    out.extend_from_slice(&EEGB_VERSION.to_le_bytes());
    let c32 = u32::try_from(c).map_err(|_| "too many channels")?;
    let t32 = u32::try_from(t).map_err(|_| "too many samples")?;
    out.extend_from_slice(&c32.to_le_bytes());
    out.extend_from_slice(&t32.to_le_bytes());
    out.extend_from_slice(&s.sfreq().to_le_bytes());
    for l in s.labels() {
        let len = u16::try_from(l.len()).map_err(|_| format!("label {l} too long"))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(l.as_bytes());
    }
    for row in s.data().row_iter() {
        for &v in row.iter() {
            let f = v as f32;
            if !f.is_finite() {
                return Err(format!("sample {v} outside the f32 range"));
            }
            out.extend_from_slice(&f.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_eegb(bytes: &[u8]) -> std::result::Result<Signal, String> {
    let mut r = ByteReader::new(bytes);
    if r.take(4)? != EEGB_MAGIC {
        return Err("missing EEGB magic".into());
    }
    let version = r.u16()?;
    if version != EEGB_VERSION {
        return Err(format!("unsupported EEGB version {version}"));
    }
    let c = r.u32()? as usize;
    let t = r.u32()? as usize;
    let sfreq = r.f64()?;
    let mut labels = Vec::with_capacity(c.min(4096));
    for _ in 0..c {
        let len = r.u16()? as usize;
        let raw = r.take(len)?;
        labels.push(String::from_utf8(raw.to_vec()).map_err(|_| "label is not UTF-8")?);
    }
    let expected = c.checked_mul(t).and_then(|n| n.checked_mul(4)).ok_or("size overflow")?;
    if r.remaining() != expected {
        return Err(format!(
            "expected {expected} sample bytes after offset {}, found {}",
            r.position(),
            r.remaining()
        ));
    }
    let mut data = DMatrix::zeros(c, t);
    for i in 0..c {
        for j in 0..t {
            data[(i, j)] = f64::from(r.f32()?);
        }
    }
    Signal::new(data, sfreq, &labels).map_err(|e| e.to_string())
}

pub fn encode_signal_csv(s: &Signal) -> String {
    let mut out = format!("#sfreq,{}\nlabel", s.sfreq());
    for j in 0..s.n_samples() {
        out.push_str(&format!(",s{j}"));
    }
    out.push('\n');
    for (l, row) in s.labels().iter().zip(s.data().row_iter()) {
        out.push_str(l);
        for v in row.iter() {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

pub fn decode_signal_csv(text: &str, fallback_sfreq: Option<f64>) -> std::result::Result<Signal, String> {
    let mut sfreq = fallback_sfreq;
    let mut header: Option<usize> = None;
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(v) = rest.strip_prefix("sfreq,") {
                sfreq = Some(v.trim().parse().map_err(|_| format!("line {line_no}: bad sfreq {v:?}"))?);
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        match header {
            None => {
                if fields[0].trim() != "label"
                    || fields[1..]
                        .iter()
                        .enumerate()
                        .any(|(j, f)| f.trim() != format!("s{j}"))
                {
                    return Err(format!("line {line_no}: expected header `label,s0,s1,...`"));
                }
                header = Some(fields.len() - 1);
            }
            Some(n) => {
                if fields.len() != n + 1 {
                    return Err(format!(
                        "line {line_no}: expected {} fields, found {}",
                        n + 1,
                        fields.len()
                    ));
                }
                labels.push(fields[0].trim().to_string());
                let vals = fields[1..]
                    .iter()
                    .map(|f| f.trim().parse::<f64>().map_err(|_| format!("line {line_no}: invalid number {f:?}")))
                    .collect::<std::result::Result<Vec<f64>, String>>()?;
                rows.push(vals);
            }
        }
    }
    let n = header.ok_or("missing header `label,s0,s1,...`")?;
    let sfreq = sfreq.ok_or("no `#sfreq,<hz>` line and no sampling rate given")?;
    let data = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
    Signal::new(data, sfreq, &labels).map_err(|e| e.to_string())
}

/// Reads EEGB (detected by its magic) or signal CSV.
pub fn read_signal(path: &Path) -> Result<Signal> {
    let bytes = read_bytes(path)?;
    let decoded = if bytes.starts_with(EEGB_MAGIC) {
        decode_eegb(&bytes)
    } else {
        std::str::from_utf8(&bytes)
            .map_err(|_| "neither EEGB nor UTF-8 CSV".to_string())
            .and_then(|t| decode_signal_csv(t, None))
    };
    decoded.map_err(|m| CliError::format(path, m))
}

pub fn write_signal(path: &Path, s: &Signal, format: OutputFormat) -> Result<()> {
    let bytes = match format {
        OutputFormat::Csv => encode_signal_csv(s).into_bytes(),
        OutputFormat::Binary => encode_eegb(s).map_err(|m| CliError::format(path, m))?,
    };
    write_bytes(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Signal {
        let d = DMatrix::from_row_slice(2, 3, &[0.5, -1.25, 3.0, 0.0, -0.0, 1e-3]);
        Signal::new(d, 256.0, &["Cz", "Pz"]).unwrap()
    }

    #[test]
    fn eegb_round_trip_and_layout() {
        let s = sample();
        let b = encode_eegb(&s).unwrap();
        assert_eq!(&b[..4], b"EEGB");
        assert_eq!(&b[4..6], &[1, 0]);
        assert_eq!(&b[6..10], &[2, 0, 0, 0]);
        assert_eq!(&b[10..14], &[3, 0, 0, 0]);
        assert_eq!(&b[14..22], &256f64.to_le_bytes());
        assert_eq!(&b[22..26], &[2, 0, b'C', b'z']);
        let back = decode_eegb(&b).unwrap();
        assert_eq!(back.labels(), s.labels());
        let want = s.data().map(|v| f64::from(v as f32));
        assert_eq!(back.data(), &want);
        assert_eq!(encode_eegb(&back).unwrap(), b);
    }

    #[test]
    fn eegb_truncation_rejected() {
        let b = encode_eegb(&sample()).unwrap();
        for n in [0, 3, 5, 12, 21, 25, b.len() - 1] {
            assert!(decode_eegb(&b[..n]).is_err(), "{n}");
        }
        let mut extra = b.clone();
        extra.push(0);
        assert!(decode_eegb(&extra).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let s = sample();
        let text = encode_signal_csv(&s);
        assert!(text.starts_with("#sfreq,256\nlabel,s0,s1,s2\nCz,0.5,-1.25,3\n"));
        let back = decode_signal_csv(&text, None).unwrap();
        assert_eq!(back, s);
        assert!(back.data()[(1, 1)].is_sign_negative());
    }

    #[test]
    fn csv_errors() {
        assert!(decode_signal_csv("label,s0\nCz,1\n", None).is_err());
        assert!(decode_signal_csv("label,s0\nCz,1\n", Some(100.0)).is_ok());
        assert!(decode_signal_csv("#sfreq,1\nlabel,s0\nCz,1,2\n", None).is_err());
        assert!(decode_signal_csv("#sfreq,1\nlabel,s1\nCz,1\n", None).is_err());
        assert!(decode_signal_csv("#sfreq,1\nlabel,s0\nCz,x\n", None).is_err());
    }
}
