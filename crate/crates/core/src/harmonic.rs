//! Source-space decomposition onto real spherical harmonics.
//!
//! The output has `(l_max + 1)²` rows (25 for `l_max = 4`) whatever the
//! number of source channels. Coefficients are passed through unscaled.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use nalgebra::DMatrix;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::basis::{sh_basis_matrix, ShIndex};
use crate::geometry::Montage;
use crate::pipeline::{AdaptationMatrix, Method, TargetDescriptor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HarmonicMode {
    /// `M = B`: the basis evaluated at the electrodes, used as-is.
    Evaluate,
    /// `M ≈ (B Bᵀ)⁻¹ B`: the least-squares coefficient estimator.
    LeastSquares,
}

impl fmt::Display for HarmonicMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HarmonicMode::Evaluate => "evaluate",
            HarmonicMode::LeastSquares => "least_squares",
        })
    }
}

impl FromStr for HarmonicMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "evaluate" => Ok(HarmonicMode::Evaluate),
            "least_squares" | "lsq" => Ok(HarmonicMode::LeastSquares),
            other => Err(Error::InvalidConfig(format!("unknown harmonic mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicConfig {
    pub l_max: usize,
    pub mode: HarmonicMode,
    /// Tikhonov term of the least-squares normal equations.
    pub ridge: f64,
}

impl Default for HarmonicConfig {
    fn default() -> Self {
        Self {
            l_max: 4,
            mode: HarmonicMode::Evaluate,
            ridge: 1e-8,
        }
    }
}

/// Refinement sweeps applied after the ridge-regularized solve.
pub const REFINEMENT_STEPS: usize = 3;

/// Harmonic decomposition matrix for `source`.
///
/// In least-squares mode the normal equations `(B Bᵀ) M = B` are solved
/// with a factorization of `B Bᵀ + ridge·I` followed by
/// [`REFINEMENT_STEPS`] sweeps of iterative refinement against the
/// unregularized system. On well-posed montages this removes the ridge bias;
/// on rank-deficient ones the ridge keeps the solve finite and the result
/// stays in the row space of `B`.
pub fn harmonic_matrix(source: &Montage, cfg: &HarmonicConfig) -> Result<AdaptationMatrix> {
    if !(cfg.ridge >= 0.0 && cfg.ridge.is_finite()) {
        return Err(Error::InvalidConfig(format!("ridge {} must be >= 0", cfg.ridge)));
    }
    let basis = sh_basis_matrix(source, cfg.l_max);
    let n_coef = basis.nrows();
    let matrix = match cfg.mode {
        HarmonicMode::Evaluate => basis,
        HarmonicMode::LeastSquares => {
            let gram = &basis * basis.transpose();
            let regularized = &gram + DMatrix::identity(n_coef, n_coef) * cfg.ridge;
            let chol = regularized.cholesky().ok_or_else(|| {
                Error::Singular("harmonic normal equations (increase ridge)".into())
            })?;
            let mut m = chol.solve(&basis);
            for _ in 0..REFINEMENT_STEPS {
                let residual = &basis - &gram * &m;
                m += chol.solve(&residual);
            }
            m
        }
    };
    let mut out = AdaptationMatrix::new(
        matrix,
        Method::Harmonic,
        &source.labels(),
        TargetDescriptor::Harmonics(ShIndex::all(cfg.l_max)),
    )?
    .with_meta("l_max", cfg.l_max.to_string())
    .with_meta("mode", cfg.mode.to_string())
    .with_meta("source_montage", source.name())
    .with_meta("phase_convention", "no-condon-shortley")
    .with_meta("coefficient_scaling", "none");
    if cfg.mode == HarmonicMode::LeastSquares {
        out.set_meta("ridge", format!("{}", cfg.ridge));
        out.set_meta("refinement_steps", REFINEMENT_STEPS.to_string());
        if source.len() < n_coef {
            out.set_meta(
                "warning",
                format!("{} channels for {n_coef} coefficients: underdetermined", source.len()),
            );
        }
    }
    Ok(out)
}

/// Energy per degree: `Σ_{m,t} coeff²` for each `l`.
pub fn harmonic_band_power(coeffs: &DMatrix<f64>) -> Result<Vec<f64>> {
    let rows = coeffs.nrows();
    let degrees = (rows as f64).sqrt().round() as usize;
    if rows == 0 || degrees * degrees != rows {
        return Err(Error::Shape(format!(
            "{rows} rows is not (l_max+1)^2 for any l_max"
        )));
    }
    let mut energy = vec![0.0; degrees];
    for (k, row) in coeffs.row_iter().enumerate() {
        energy[ShIndex::from_flat(k).l()] += row.iter().map(|v| v * v).sum::<f64>();
    }
    Ok(energy)
}
