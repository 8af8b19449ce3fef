use alloc::string::ToString;
use core::fmt;
use core::str::FromStr;

use nalgebra::DMatrix;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use super::signal::Signal;
use crate::{Error, Result};

/// Per-model amplitude normalization. `MinMax` and `ZScore` act per channel
/// on the signal they are given (one epoch at a time).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    /// Affine map of each channel onto `[-1, 1]`.
    MinMax,
    /// `(x - mean) / std` per channel, population std.
    ZScore,
    /// Every sample divided by 100 (µV/100).
    UvScale,
}

impl fmt::Display for NormMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormMode::MinMax => "minmax",
            NormMode::ZScore => "zscore",
            NormMode::UvScale => "uv100",
        })
    }
}

impl FromStr for NormMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minmax" => Ok(NormMode::MinMax),
            "zscore" => Ok(NormMode::ZScore),
            "uv100" | "uv_scale" => Ok(NormMode::UvScale),
            other => Err(Error::InvalidConfig(alloc::format!(
                "unknown normalization {other:?}"
            ))),
        }
    }
}

pub fn normalize(x: &Signal, mode: NormMode) -> Result<Signal> {
    let (c, t) = x.data().shape();
    let mut out = DMatrix::zeros(c, t);
    for (i, row) in x.data().row_iter().enumerate() {
        let degenerate = || Error::DegenerateChannel(x.labels()[i].to_string());
        match mode {
            NormMode::MinMax => {
                let lo = row.min();
                let hi = row.max();
                let range = hi - lo;
                if !(range > 0.0) {
                    return Err(degenerate());
                }
                for (j, v) in row.iter().enumerate() {
                    out[(i, j)] = (2.0 * (v - lo) / range - 1.0).clamp(-1.0, 1.0);
                }
            }
            NormMode::ZScore => {
                let n = t as f64;
                let mean = row.sum() / n;
                let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                let sd = var.sqrt();
                if !(sd > 0.0) {
                    return Err(degenerate());
                }
                for (j, v) in row.iter().enumerate() {
                    out[(i, j)] = (v - mean) / sd;
                }
            }
            NormMode::UvScale => {
                for (j, v) in row.iter().enumerate() {
                    out[(i, j)] = v / 100.0;
                }
            }
        }
    }
    Signal::new(out, x.sfreq(), x.labels())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(rows: &[&[f64]]) -> Signal {
        let labels: alloc::vec::Vec<_> = (0..rows.len()).map(|i| alloc::format!("c{i}")).collect();
        let flat: alloc::vec::Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Signal::new(DMatrix::from_row_slice(rows.len(), rows[0].len(), &flat), 100.0, &labels)
            .unwrap()
    }

    #[test]
    fn minmax_example() {
        let out = normalize(&sig(&[&[0.0, 2.0, 4.0]]), NormMode::MinMax).unwrap();
        assert_eq!(out.data().as_slice(), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn zscore_moments() {
        let out = normalize(&sig(&[&[1.0, 5.0, 2.0, 9.0, -3.0], &[0.1, 0.2, 0.3, 0.5, 0.8]]), NormMode::ZScore)
            .unwrap();
        for row in out.data().row_iter() {
            let n = row.len() as f64;
            let mean = row.sum() / n;
            let sd = (row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            assert!(mean.abs() < 1e-12);
            assert!((sd - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn uv_scale_example() {
        let out = normalize(&sig(&[&[100.0, -50.0]]), NormMode::UvScale).unwrap();
        assert_eq!(out.data().as_slice(), &[1.0, -0.5]);
    }

    #[test]
    fn constant_channel_is_named() {
        let s = sig(&[&[1.0, 2.0], &[3.0, 3.0]]);
        assert_eq!(
            normalize(&s, NormMode::MinMax).unwrap_err(),
            Error::DegenerateChannel("C1".into())
        );
        assert_eq!(
            normalize(&s, NormMode::ZScore).unwrap_err(),
            Error::DegenerateChannel("C1".into())
        );
        assert!(normalize(&s, NormMode::UvScale).is_ok());
    }

    #[test]
    fn parses_names() {
        assert_eq!("uv100".parse::<NormMode>().unwrap(), NormMode::UvScale);
        assert!("l2".parse::<NormMode>().is_err());
    }
}
