//! Rational-ratio polyphase resampling with a Kaiser-windowed sinc low-pass.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use super::signal::Signal;
use crate::{Error, Result};

/// Kaiser window shape parameter (about 86 dB stopband attenuation).
pub const KAISER_BETA: f64 = 8.6;
/// Cutoff as a fraction of the lower of the two Nyquist frequencies.
pub const PASSBAND_FRACTION: f64 = 0.9;
/// Largest accepted denominator of the rate ratio.
pub const MAX_DENOMINATOR: u64 = 1000;

/// `new / old` as a reduced fraction `(up, down)` with `down ≤ 1000`.
pub fn rational_ratio(old: f64, new: f64) -> Result<(u64, u64)> {
    if !(old > 0.0 && new > 0.0 && old.is_finite() && new.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "sampling rates must be positive, got {old} -> {new}"
        )));
    }
    let r = new / old;
    // Continued-fraction convergents h/k of r.
    let (mut h0, mut h1) = (0u64, 1u64);
    let (mut k0, mut k1) = (1u64, 0u64);
    let mut x = r;
    for _ in 0..64 {
        let a = x.floor();
        if a > 1e12 {
            break;
        }
        let a = a as u64;
        let (h2, k2) = (a * h1 + h0, a * k1 + k0);
        if k2 > MAX_DENOMINATOR {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if ((h1 as f64 / k1 as f64) - r).abs() <= 1e-9 * r {
            return Ok((h1, k1));
        }
        let frac = x - a as f64;
        if frac < 1e-15 {
            break;
        }
        x = 1.0 / frac;
    }
    Err(Error::Ratio(format!(
        "{new}/{old} has no fraction with denominator <= {MAX_DENOMINATOR}"
    )))
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// A designed polyphase filter for one `up/down` ratio.
#[derive(Debug, Clone)]
pub struct Resampler {
    up: usize,
    down: usize,
    taps: Vec<f64>,
    center: usize,
}

impl Resampler {
    pub fn new(old_sfreq: f64, new_sfreq: f64) -> Result<Self> {
        let (up, down) = rational_ratio(old_sfreq, new_sfreq)?;
        Ok(Self::with_ratio(up as usize, down as usize))
    }

    pub fn with_ratio(up: usize, down: usize) -> Self {
        let l = up.max(down) as f64;
        // Cycles per sample at the upsampled rate.
        let cutoff = PASSBAND_FRACTION * 0.5 / l;
        let transition = 2.0 * PI * (0.5 / l - cutoff);
        let atten = KAISER_BETA / 0.1102 + 8.7;
        let mut n = ((atten - 7.95) / (2.285 * transition)).ceil() as usize + 1;
        if n % 2 == 0 {
            n += 1;
        }
        let center = (n - 1) / 2;
        let i0b = bessel_i0(KAISER_BETA);
        let mut taps: Vec<f64> = (0..n)
            .map(|j| {
                let t = j as f64 - center as f64;
                let arg = 2.0 * cutoff * t;
                let sinc = if arg == 0.0 { 1.0 } else { (PI * arg).sin() / (PI * arg) };
                let r = 2.0 * j as f64 / (n - 1) as f64 - 1.0;
                let w = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / i0b;
                2.0 * cutoff * sinc * w
            })
            .collect();
        // Each polyphase branch sums to exactly one so DC passes unchanged.
        for phase in 0..up {
            let s: f64 = taps.iter().skip(phase).step_by(up).sum();
            for t in taps.iter_mut().skip(phase).step_by(up) {
                *t /= s;
            }
        }
        Self {
            up,
            down,
            taps,
            center,
        }
    }

    pub fn ratio(&self) -> (usize, usize) {
        (self.up, self.down)
    }

    pub fn n_taps(&self) -> usize {
        self.taps.len()
    }

    /// `round(n · up / down)`.
    pub fn output_len(&self, n: usize) -> usize {
        (n * self.up + self.down / 2) / self.down
    }

    /// Resamples one channel. Samples beyond either end repeat the edge value.
    pub fn process(&self, x: &[f64]) -> Vec<f64> {
        let n_out = self.output_len(x.len());
        if x.is_empty() {
            return Vec::new();
        }
        let (p, q, c) = (self.up as i64, self.down as i64, self.center as i64);
        let n_taps = self.taps.len() as i64;
        let last = x.len() as i64 - 1;
        (0..n_out as i64)
            .map(|k| {
                let pos = k * q + c;
                // Taps j = pos - n p with 0 <= j < n_taps.
                let n_hi = pos.div_euclid(p);
                let n_lo = (pos - n_taps + 1 + p - 1).div_euclid(p);
                let mut acc = 0.0;
                for n in n_lo..=n_hi {
                    let j = (pos - n * p) as usize;
                    let sample = x[n.clamp(0, last) as usize];
                    acc += self.taps[j] * sample;
                }
                acc
            })
            .collect()
    }
}

/// Resamples every channel of `x` to `new_sfreq`. Equal rates return a copy.
pub fn resample(x: &Signal, new_sfreq: f64) -> Result<Signal> {
    let resampler = Resampler::new(x.sfreq(), new_sfreq)?;
    if resampler.ratio() == (1, 1) {
        return Ok(x.clone());
    }
    let n_out = resampler.output_len(x.n_samples());
    let mut out = DMatrix::zeros(x.n_channels(), n_out);
    for (i, row) in x.data().row_iter().enumerate() {
        let samples: Vec<f64> = row.iter().copied().collect();
        for (j, v) in resampler.process(&samples).into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    Signal::new(out, new_sfreq, x.labels())
}
