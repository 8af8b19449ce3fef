//! Spherical spline interpolation between montages.
//!
//! The potential is modelled as `V(r) = c₀ + Σᵢ cᵢ g(cos∠(r, sᵢ))` over the
//! source electrodes `sᵢ`, with the Legendre-series kernel
//! `g(x) = (1/4π) Σ_{n≥1} (2n+1) / (n(n+1))^m · P_n(x)`. The coefficients
//! solve the bordered system
//!
//! ```text
//! [ G + λI  1 ] [c ]   [v]
//! [ 1ᵀ      0 ] [c₀] = [0]
//! ```
//!
//! which is linear in the source values `v`, so interpolation to any target
//! set is a fixed matrix.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::basis::check_unit_interval;
use crate::geometry::{cosine_angle, Montage, STANDARD_POSITIONS_VERSION};
use crate::pipeline::{AdaptationMatrix, Method, TargetDescriptor};
use crate::{Error, Result};

/// Spline order, series length and diagonal regularization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplineConfig {
    pub stiffness: u32,
    pub n_terms: usize,
    pub reg_lambda: f64,
}

impl Default for SplineConfig {
    fn default() -> Self {
        Self {
            stiffness: 4,
            n_terms: 50,
            reg_lambda: 1e-5,
        }
    }
}

impl SplineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stiffness < 2 {
            return Err(Error::InvalidConfig(format!(
                "spline stiffness {} must be >= 2",
                self.stiffness
            )));
        }
        if self.n_terms < 1 {
            return Err(Error::InvalidConfig("n_terms must be >= 1".into()));
        }
        if !(self.reg_lambda >= 0.0 && self.reg_lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "reg_lambda {} must be >= 0",
                self.reg_lambda
            )));
        }
        Ok(())
    }
}

/// Precomputed series coefficients of `g`.
#[derive(Debug, Clone)]
pub struct SplineKernel {
    coeffs: Vec<f64>,
}

impl SplineKernel {
    pub fn new(cfg: &SplineConfig) -> Result<Self> {
        cfg.validate()?;
        let coeffs = (1..=cfg.n_terms)
            .map(|n| {
                let nf = n as f64;
                (2.0 * nf + 1.0) / (nf * (nf + 1.0)).powi(cfg.stiffness as i32) / (4.0 * PI)
            })
            .collect();
        Ok(Self { coeffs })
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        check_unit_interval(x)?;
        Ok(self.eval_clamped(x.clamp(-1.0, 1.0)))
    }

    fn eval_clamped(&self, x: f64) -> f64 {
        let (mut p_prev, mut p) = (1.0, x);
        let mut sum = 0.0;
        for (k, c) in self.coeffs.iter().enumerate() {
            let n = (k + 1) as f64;
            sum += c * p;
            let next = ((2.0 * n + 1.0) * x * p - n * p_prev) / (n + 1.0);
            p_prev = p;
            p = next;
        }
        sum
    }
}

/// The spline kernel `g(x)`.
pub fn g_kernel(x: f64, cfg: &SplineConfig) -> Result<f64> {
    SplineKernel::new(cfg)?.eval(x)
}

/// Interpolation matrix (`target.len() × source.len()`) from `source` to
/// `target` electrodes.
pub fn ssi_matrix(source: &Montage, target: &Montage, cfg: &SplineConfig) -> Result<AdaptationMatrix> {
    let kernel = SplineKernel::new(cfg)?;
    let src = source.electrodes();
    let n = src.len();
    if n < 3 {
        return Err(Error::TooFewElectrodes { need: 3, got: n });
    }
    for i in 0..n {
        for j in 0..i {
            if cosine_angle(&src[i], &src[j]) > 1.0 - 1e-12 {
                return Err(Error::CoincidentElectrodes(
                    src[j].label().to_string(),
                    src[i].label().to_string(),
                ));
            }
        }
    }

    let mut bordered = DMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        for j in 0..=i {
            let g = kernel.eval_clamped(cosine_angle(&src[i], &src[j]));
            bordered[(i, j)] = g;
            bordered[(j, i)] = g;
        }
        bordered[(i, i)] += cfg.reg_lambda;
        bordered[(i, n)] = 1.0;
        bordered[(n, i)] = 1.0;
    }
    let inverse = bordered
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Singular("bordered spline system".into()))?;

    let tgt = target.electrodes();
    let mut evaluation = DMatrix::zeros(tgt.len(), n + 1);
    for (t, e) in tgt.iter().enumerate() {
        for (s, se) in src.iter().enumerate() {
            evaluation[(t, s)] = kernel.eval_clamped(cosine_angle(e, se));
        }
        evaluation[(t, n)] = 1.0;
    }
    let matrix = evaluation * inverse.columns(0, n);
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("bordered spline system".into()));
    }

    Ok(AdaptationMatrix::new(
        matrix,
        Method::Ssi,
        &source.labels(),
        TargetDescriptor::Labels(target.labels()),
    )?
    .with_meta("stiffness", cfg.stiffness.to_string())
    .with_meta("n_terms", cfg.n_terms.to_string())
    .with_meta("reg_lambda", format!("{}", cfg.reg_lambda))
    .with_meta("source_montage", source.name())
    .with_meta("target_montage", target.name())
    .with_meta("positions_version", STANDARD_POSITIONS_VERSION.to_string())
    .with_meta("rereference", "none"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::real_sph_harm;
    use crate::geometry::{BuiltinMontage, Electrode};

    /// Direct summation with closed-form Legendre values where available.
    fn series_oracle(x: f64, m: i32, terms: usize) -> f64 {
        // Independent recurrence: P_n via explicit loop written separately.
        let mut p = alloc::vec![1.0, x];
        for n in 1..terms {
            let v = ((2 * n + 1) as f64 * x * p[n] - n as f64 * p[n - 1]) / (n + 1) as f64;
            p.push(v);
        }
        (1..=terms)
            .map(|n| (2 * n + 1) as f64 / ((n * (n + 1)) as f64).powi(m) * p[n])
            .sum::<f64>()
            / (4.0 * PI)
    }

    #[test]
    fn kernel_at_one() {
        let cfg = SplineConfig::default();
        let g1 = g_kernel(1.0, &cfg).unwrap();
        // Reference value from an independent high-precision summation.
        assert!((g1 - 0.015_260_761_697_061).abs() < 1e-12, "{g1}");
        // At x = 1 every P_n is 1, so the series is a plain sum.
        let direct: f64 = (1..=50)
            .map(|n| (2 * n + 1) as f64 / ((n * (n + 1)) as f64).powi(4))
            .sum::<f64>()
            / (4.0 * PI);
        assert!((g1 - direct).abs() < 1e-15);
    }

    #[test]
    fn kernel_ordering_and_oracle() {
        let cfg = SplineConfig::default();
        let (a, b, c) = (
            g_kernel(1.0, &cfg).unwrap(),
            g_kernel(0.0, &cfg).unwrap(),
            g_kernel(-1.0, &cfg).unwrap(),
        );
        assert!(a > b && b > c);
        for x in [-1.0, -0.3, 0.0, 0.42, 0.9, 1.0] {
            assert!((g_kernel(x, &cfg).unwrap() - series_oracle(x, 4, 50)).abs() < 1e-15);
        }
        assert!(g_kernel(1.5, &cfg).is_err());
    }

    #[test]
    fn config_validation() {
        let bad = SplineConfig {
            stiffness: 1,
            ..Default::default()
        };
        assert!(matches!(g_kernel(0.0, &bad), Err(Error::InvalidConfig(_))));
        let bad = SplineConfig {
            reg_lambda: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn constant_field_reproduced_on_self() {
        let m = Montage::builtin(BuiltinMontage::TenTwenty19);
        let cfg = SplineConfig {
            reg_lambda: 0.0,
            ..Default::default()
        };
        let a = ssi_matrix(&m, &m, &cfg).unwrap();
        let ones = nalgebra::DVector::from_element(19, 1.0);
        let out = a.matrix() * ones;
        for v in out.iter() {
            assert!((v - 1.0).abs() < 1e-9);
        }
        // With λ = 0 the spline interpolates its own nodes.
        let id = DMatrix::<f64>::identity(19, 19);
        assert!((a.matrix() - id).abs().max() < 1e-8);
    }

    #[test]
    fn shape_and_row_sums() {
        let src = Montage::builtin(BuiltinMontage::TenTen64);
        let tgt = Montage::builtin(BuiltinMontage::TenTwenty19);
        let a = ssi_matrix(&src, &tgt, &SplineConfig::default()).unwrap();
        assert_eq!(a.shape(), (19, 64));
        assert_eq!(a.method(), Method::Ssi);
        for row in a.matrix().row_iter() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
        assert_eq!(a.metadata()["n_terms"], "50");
    }

    #[test]
    fn interpolates_degree_two_field() {
        let src = Montage::builtin(BuiltinMontage::TenTen64);
        let tgt = Montage::builtin(BuiltinMontage::TenTwenty19);
        let a = ssi_matrix(&src, &tgt, &SplineConfig::default()).unwrap();
        let field = |m: &Montage| {
            nalgebra::DVector::from_iterator(
                m.len(),
                m.spherical().into_iter().map(|(t, p)| real_sph_harm(2, 0, t, p).unwrap()),
            )
        };
        let got = a.matrix() * field(&src);
        let want = field(&tgt);
        let rel = (got - &want).norm() / want.norm();
        assert!(rel < 0.02, "{rel}");
    }

    #[test]
    fn coincident_and_small_sources_rejected() {
        let es = alloc::vec![
            Electrode::new("A", [0.0, 0.0, 1.0]).unwrap(),
            Electrode::new("B", [1.0, 0.0, 0.0]).unwrap(),
            Electrode::new("C", [0.0, 0.0, 2.0]).unwrap(),
        ];
        let m = Montage::new("dup", es).unwrap();
        assert_eq!(
            ssi_matrix(&m, &m, &SplineConfig::default()).unwrap_err(),
            Error::CoincidentElectrodes("A".into(), "C".into())
        );
        let small = Montage::builtin(BuiltinMontage::TenTwenty19)
            .select("two", &["Cz", "Pz"])
            .unwrap();
        assert_eq!(
            ssi_matrix(&small, &small, &SplineConfig::default()).unwrap_err(),
            Error::TooFewElectrodes { need: 3, got: 2 }
        );
    }

    #[test]
    fn source_permutation_permutes_columns() {
        let src = Montage::builtin(BuiltinMontage::Bci2a22);
        let tgt = Montage::builtin(BuiltinMontage::TenTwenty19);
        let mut es = src.electrodes().to_vec();
        es.rotate_left(5);
        let rot = Montage::new("rot", es).unwrap();
        let cfg = SplineConfig::default();
        let a = ssi_matrix(&src, &tgt, &cfg).unwrap();
        let b = ssi_matrix(&rot, &tgt, &cfg).unwrap();
        let n = src.len();
        for k in 0..n {
            let diff = (a.matrix().column((k + 5) % n) - b.matrix().column(k)).abs().max();
            assert!(diff < 1e-10);
        }
    }
}
