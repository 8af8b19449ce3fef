//! Per-subject re-centering on the SPD manifold.
//!
//! Each epoch gets a shrinkage covariance; the subject's covariances are
//! averaged with the affine-invariant (Karcher) mean `C̄`, and the subject's
//! adaptation matrix becomes `C̄^{-1/2} · base`. Pushing the same
//! covariances through that matrix by congruence gives a set whose Karcher
//! mean is the identity.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::linalg::{all_finite, spectral_map, sym_eigen, symmetrize};
use crate::pipeline::{compose, AdaptationMatrix, EpochSet, Method};
use crate::{Error, Result};

/// A symmetric matrix whose smallest eigenvalue has been checked positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    values: DMatrix<f64>,
    min_eigenvalue: f64,
}

impl SpdMatrix {
    /// Certifies `m` as SPD. `m` must be symmetric to within 1e-10 (relative
    /// to its largest entry); it is stored exactly symmetrized.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Shape(format!("{}x{} is not square", m.nrows(), m.ncols())));
        }
        if m.is_empty() {
            return Err(Error::Empty("covariance"));
        }
        if !all_finite(&m) {
            return Err(Error::NonFinite("covariance"));
        }
        let scale = m.abs().max().max(1.0);
        if (&m - m.transpose()).abs().max() > 1e-10 * scale {
            return Err(Error::NotSpd("matrix is not symmetric".into()));
        }
        let values = symmetrize(&m);
        let eig = sym_eigen(&values);
        let min = eig.eigenvalues.min();
        let max = eig.eigenvalues.abs().max();
        let floor = max * values.nrows() as f64 * f64::EPSILON;
        if !(min > floor && min > 0.0) {
            return Err(Error::NotSpd(format!("smallest eigenvalue {min:e}")));
        }
        Ok(Self {
            values,
            min_eigenvalue: min,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            values: DMatrix::identity(n, n),
            min_eigenvalue: 1.0,
        }
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.values
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    /// `W C Wᵀ`.
    pub fn congruence(&self, w: &DMatrix<f64>) -> Result<SpdMatrix> {
        if w.ncols() != self.dim() {
            return Err(Error::Shape(format!(
                "{}x{} transform for a {}x{} matrix",
                w.nrows(),
                w.ncols(),
                self.dim(),
                self.dim()
            )));
        }
        SpdMatrix::new(symmetrize(&(w * &self.values * w.transpose())))
    }
}

/// Covariance shrinkage toward `(trace/C)·I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shrinkage {
    /// Coefficient from the Ledoit-Wolf formula.
    LedoitWolf,
    /// A fixed coefficient in `[0, 1]`.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiemannianConfig {
    pub shrinkage: Shrinkage,
    pub mean_tol: f64,
    pub mean_max_iter: usize,
}

impl Default for RiemannianConfig {
    fn default() -> Self {
        Self {
            shrinkage: Shrinkage::LedoitWolf,
            mean_tol: 1e-8,
            mean_max_iter: 50,
        }
    }
}

impl RiemannianConfig {
    pub fn validate(&self) -> Result<()> {
        if let Shrinkage::Fixed(a) = self.shrinkage {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::InvalidConfig(format!("shrinkage {a} outside [0, 1]")));
            }
        }
        if !(self.mean_tol > 0.0) {
            return Err(Error::InvalidConfig("mean_tol must be > 0".into()));
        }
        if self.mean_max_iter == 0 {
            return Err(Error::InvalidConfig("mean_max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

/// A shrunk covariance and the coefficient that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub covariance: SpdMatrix,
    pub alpha: f64,
}

/// Ledoit-Wolf shrinkage coefficient for row-centered `C × T` data.
pub fn ledoit_wolf_alpha(centered: &DMatrix<f64>) -> f64 {
    let (p, n) = centered.shape();
    let (pf, nf) = (p as f64, n as f64);
    let s = centered * centered.transpose() / nf;
    let trace = s.trace();
    let mu = trace / pf;
    // Σ_ij Σ_t x_it² x_jt² = Σ_t (Σ_i x_it²)².
    let fourth: f64 = centered
        .column_iter()
        .map(|c| c.norm_squared().powi(2))
        .sum();
    let s_sq = s.norm_squared();
    let beta = (fourth / nf - s_sq) / (pf * nf);
    let delta = (s_sq - 2.0 * mu * trace + pf * mu * mu) / pf;
    let beta = beta.min(delta);
    if beta <= 0.0 || delta <= 0.0 {
        0.0
    } else {
        (beta / delta).clamp(0.0, 1.0)
    }
}

/// Shrinkage covariance of one `C × T` epoch, centered per channel.
pub fn epoch_covariance(x: &DMatrix<f64>, cfg: &RiemannianConfig) -> Result<CovarianceEstimate> {
    cfg.validate()?;
    if x.ncols() < 2 {
        return Err(Error::InvalidConfig(format!("{} samples: need at least 2", x.ncols())));
    }
    if !all_finite(x) {
        return Err(Error::NonFinite("epoch samples"));
    }
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        let mean = row.sum() / row.len() as f64;
        row.add_scalar_mut(-mean);
    }
    let n = x.ncols() as f64;
    let s = symmetrize(&(&centered * centered.transpose() / n));
    let alpha = match cfg.shrinkage {
        Shrinkage::LedoitWolf => ledoit_wolf_alpha(&centered),
        Shrinkage::Fixed(a) => a,
    };
    if !alpha.is_finite() {
        return Err(Error::NonFinite("shrinkage coefficient"));
    }
    let c = s.nrows();
    let mu = s.trace() / c as f64;
    let shrunk = if alpha == 1.0 {
        DMatrix::identity(c, c) * mu
    } else {
        s * (1.0 - alpha) + DMatrix::identity(c, c) * (alpha * mu)
    };
    Ok(CovarianceEstimate {
        covariance: SpdMatrix::new(shrunk)?,
        alpha,
    })
}

/// Karcher mean and how the iteration ended.
#[derive(Debug, Clone, PartialEq)]
pub struct KarcherMean {
    pub mean: SpdMatrix,
    pub iterations: usize,
    /// Frobenius norm of the averaged log-map at the returned mean.
    pub residual: f64,
}

fn sqrt_and_inv_sqrt(g: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let eig = sym_eigen(g);
    (
        spectral_map(&eig, |l| l.sqrt()),
        spectral_map(&eig, |l| 1.0 / l.sqrt()),
    )
}

/// `(1/N) Σ log(G^{-1/2} Cᵢ G^{-1/2})`, summed in index order.
fn mean_log_map(g_inv_sqrt: &DMatrix<f64>, covs: &[SpdMatrix]) -> DMatrix<f64> {
    let n = covs[0].dim();
    let mut acc = DMatrix::zeros(n, n);
    for c in covs {
        let whitened = g_inv_sqrt * c.values() * g_inv_sqrt;
        acc += spectral_map(&sym_eigen(&whitened), |l| l.ln());
    }
    acc / covs.len() as f64
}

/// Affine-invariant geometric mean by fixed-point iteration from the
/// arithmetic mean.
pub fn geometric_mean(covs: &[SpdMatrix], cfg: &RiemannianConfig) -> Result<KarcherMean> {
    cfg.validate()?;
    let first = covs.first().ok_or(Error::Empty("covariance list"))?;
    if let Some(bad) = covs.iter().find(|c| c.dim() != first.dim()) {
        return Err(Error::Shape(format!(
            "covariances of size {} and {}",
            first.dim(),
            bad.dim()
        )));
    }
    if covs.len() == 1 {
        return Ok(KarcherMean {
            mean: first.clone(),
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut g = covs
        .iter()
        .fold(DMatrix::zeros(first.dim(), first.dim()), |acc, c| acc + c.values())
        / covs.len() as f64;
    let mut iterations = 0;
    loop {
        let (g_sqrt, g_inv_sqrt) = sqrt_and_inv_sqrt(&g);
        let tangent = mean_log_map(&g_inv_sqrt, covs);
        let residual = tangent.norm();
        if !residual.is_finite() {
            return Err(Error::NonFinite("karcher iteration"));
        }
        if residual < cfg.mean_tol || iterations == cfg.mean_max_iter {
            if residual > 10.0 * cfg.mean_tol {
                return Err(Error::NoConvergence {
                    iterations,
                    residual,
                });
            }
            return Ok(KarcherMean {
                mean: SpdMatrix::new(g)?,
                iterations,
                residual,
            });
        }
        let step = spectral_map(&sym_eigen(&tangent), |l| l.exp());
        g = symmetrize(&(&g_sqrt * step * &g_sqrt));
        iterations += 1;
    }
}

/// `C^{-1/2}` via the symmetric eigendecomposition.
pub fn inv_sqrt(c: &SpdMatrix) -> Result<DMatrix<f64>> {
    let eig = sym_eigen(c.values());
    let min = eig.eigenvalues.min();
    if min < 1e-12 {
        return Err(Error::Conditioning(min));
    }
    Ok(spectral_map(&eig, |l| 1.0 / l.sqrt()))
}

/// A subject's re-centering matrix with the statistics behind it.
#[derive(Debug, Clone)]
pub struct Recentering {
    /// `C̄^{-1/2} · base`.
    pub matrix: AdaptationMatrix,
    pub mean: KarcherMean,
    /// Per-epoch covariances in the base output space.
    pub covariances: Vec<SpdMatrix>,
    pub alphas: Vec<f64>,
}

impl Recentering {
    /// The fitted covariances pushed through the whitening by congruence.
    pub fn recentered_covariances(&self) -> Result<Vec<SpdMatrix>> {
        let w = inv_sqrt(&self.mean.mean)?;
        self.covariances.iter().map(|c| c.congruence(&w)).collect()
    }
}

/// Fits the per-subject whitening for `epochs` (all from one subject) in
/// the output space of `base`, and composes it after `base`.
pub fn recenter_matrix(
    epochs: &EpochSet,
    base: &AdaptationMatrix,
    cfg: &RiemannianConfig,
) -> Result<Recentering> {
    cfg.validate()?;
    let subject = epochs.single_subject()?.to_string();
    let mut covariances = Vec::with_capacity(epochs.len());
    let mut alphas = Vec::with_capacity(epochs.len());
    for epoch in epochs.epochs() {
        let mapped = base.apply(epoch)?;
        let est = epoch_covariance(mapped.data(), cfg)?;
        covariances.push(est.covariance);
        alphas.push(est.alpha);
    }
    let mean = geometric_mean(&covariances, cfg)?;
    let whitening = AdaptationMatrix::new(
        inv_sqrt(&mean.mean)?,
        Method::Riemannian,
        &base.target_labels(),
        base.target().clone(),
    )?;
    let mut matrix = compose(&whitening, base)?;
    matrix.set_method(Method::Riemannian);
    matrix.set_meta("subject", subject);
    matrix.set_meta("n_epochs", epochs.len().to_string());
    matrix.set_meta(
        "shrinkage",
        match cfg.shrinkage {
            Shrinkage::LedoitWolf => "ledoit_wolf".to_string(),
            Shrinkage::Fixed(a) => format!("fixed:{a}"),
        },
    );
    let alpha_mean = alphas.iter().sum::<f64>() / alphas.len() as f64;
    matrix.set_meta("alpha_mean", format!("{alpha_mean}"));
    matrix.set_meta("mean_iterations", mean.iterations.to_string());
    matrix.set_meta("mean_residual", format!("{:e}", mean.residual));
    matrix.set_meta("covariance_input", "signals as fed to the adapter");
    Ok(Recentering {
        matrix,
        mean,
        covariances,
        alphas,
    })
}
