//! Legendre polynomials and orthonormal real spherical harmonics.
//!
//! Convention: `Y_l0 = N_l0 P_l(cos θ)`, `Y_lm = √2 N_lm P_l^m(cos θ) cos(mφ)`
//! for `m > 0` and `√2 N_l|m| P_l^|m|(cos θ) sin(|m|φ)` for `m < 0`, with
//! `N_lm = √((2l+1)(l-m)! / (4π(l+m)!))`. The Condon-Shortley phase is NOT
//! included, so harmonic coefficients carry the sign convention of the
//! spherical-harmonic EEG literature rather than the physics one.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::geometry::Montage;
use crate::{Error, Result};

/// Degree/order pair of a real spherical harmonic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ShIndex {
    l: usize,
    m: i64,
}

impl ShIndex {
    pub fn new(l: usize, m: i64) -> Result<Self> {
        if m.unsigned_abs() as usize > l {
            return Err(Error::Domain(format!("|m| = {} exceeds l = {l}", m.abs())));
        }
        Ok(Self { l, m })
    }

    pub fn l(self) -> usize {
        self.l
    }

    pub fn m(self) -> i64 {
        self.m
    }

    /// `l² + l + m`.
    pub fn flat(self) -> usize {
        ((self.l * self.l + self.l) as i64 + self.m) as usize
    }

    pub fn from_flat(k: usize) -> Self {
        let mut l = 0usize;
        while (l + 1) * (l + 1) <= k {
            l += 1;
        }
        Self {
            l,
            m: k as i64 - (l * l + l) as i64,
        }
    }

    /// Number of harmonics with degree `≤ l_max`.
    pub fn count(l_max: usize) -> usize {
        (l_max + 1) * (l_max + 1)
    }

    /// All indices up to `l_max` in flat order.
    pub fn all(l_max: usize) -> Vec<ShIndex> {
        (0..Self::count(l_max)).map(Self::from_flat).collect()
    }

    /// Channel-style label, e.g. `SH2:-1`.
    pub fn label(self) -> String {
        format!("SH{}:{}", self.l, self.m)
    }

    /// Inverse of [`ShIndex::label`].
    pub fn parse_label(s: &str) -> Option<Self> {
        let rest = s.strip_prefix("SH")?;
        let (l, m) = rest.split_once(':')?;
        Self::new(l.parse().ok()?, m.parse().ok()?).ok()
    }
}

/// `P_0(x) ..= P_{n_max}(x)` by the three-term recurrence.
pub fn legendre_all(n_max: usize, x: f64) -> Result<Vec<f64>> {
    check_unit_interval(x)?;
    let x = x.clamp(-1.0, 1.0);
    let mut p = Vec::with_capacity(n_max + 1);
    p.push(1.0);
    if n_max >= 1 {
        p.push(x);
    }
    for n in 1..n_max {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0) * x * p[n] - nf * p[n - 1]) / (nf + 1.0);
        p.push(next);
    }
    Ok(p)
}

pub(crate) fn check_unit_interval(x: f64) -> Result<()> {
    if !(x.abs() <= 1.0 + 1e-12) {
        return Err(Error::Domain(format!("argument {x} outside [-1, 1]")));
    }
    Ok(())
}

/// Fully normalized associated Legendre values `N_lm P_l^m(cos θ)` for all
/// `0 ≤ m ≤ l ≤ l_max`, stored at `l(l+1)/2 + m`.
///
/// Upward recurrence in `l` for fixed `m`, with the normalization folded in,
/// so no factorial is ever formed.
fn normalized_assoc_legendre(l_max: usize, cos_t: f64, sin_t: f64) -> Vec<f64> {
    let idx = |l: usize, m: usize| l * (l + 1) / 2 + m;
    let mut p = vec![0.0; idx(l_max, l_max) + 1];
    p[0] = 1.0 / (4.0 * PI).sqrt();
    for m in 1..=l_max {
        let mf = m as f64;
        p[idx(m, m)] = ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * sin_t * p[idx(m - 1, m - 1)];
    }
    for m in 0..l_max {
        let mf = m as f64;
        p[idx(m + 1, m)] = (2.0 * mf + 3.0).sqrt() * cos_t * p[idx(m, m)];
        for l in (m + 2)..=l_max {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0))
                .sqrt();
            p[idx(l, m)] = a * (cos_t * p[idx(l - 1, m)] - b * p[idx(l - 2, m)]);
        }
    }
    p
}

/// Every real harmonic up to `l_max` at `(theta, phi)`, in flat-index order.
pub fn real_sph_harm_all(l_max: usize, theta: f64, phi: f64) -> Vec<f64> {
    let plm = normalized_assoc_legendre(l_max, theta.cos(), theta.sin());
    let mut out = vec![0.0; ShIndex::count(l_max)];
    for l in 0..=l_max {
        let base = l * l + l;
        out[base] = plm[l * (l + 1) / 2];
        for m in 1..=l {
            let p = SQRT_2 * plm[l * (l + 1) / 2 + m];
            let mphi = m as f64 * phi;
            out[base + m] = p * mphi.cos();
            out[base - m] = p * mphi.sin();
        }
    }
    out
}

/// Highest degree accepted by [`real_sph_harm`].
pub const MAX_DEGREE: usize = 64;

/// A single real spherical harmonic `Y_lm(theta, phi)`.
pub fn real_sph_harm(l: usize, m: i64, theta: f64, phi: f64) -> Result<f64> {
    let idx = ShIndex::new(l, m)?;
    if l > MAX_DEGREE {
        return Err(Error::Domain(format!("degree {l} above supported {MAX_DEGREE}")));
    }
    Ok(real_sph_harm_all(l, theta, phi)[idx.flat()])
}

/// `(l_max+1)² × C` matrix; entry `(flat(l,m), i)` is `Y_lm` at electrode `i`.
pub fn sh_basis_matrix(montage: &Montage, l_max: usize) -> DMatrix<f64> {
    let coords = montage.spherical();
    let mut b = DMatrix::zeros(ShIndex::count(l_max), coords.len());
    for (i, (theta, phi)) in coords.into_iter().enumerate() {
        for (k, v) in real_sph_harm_all(l_max, theta, phi).into_iter().enumerate() {
            b[(k, i)] = v;
        }
    }
    b
}
