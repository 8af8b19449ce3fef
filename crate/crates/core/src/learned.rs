//! Trainable 1×1 projection `X_t = W X_s + b·1ᵀ`, with closed-form and
//! gradient-descent fitting against reference signals.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::{all_finite, sym_eigen};
use crate::pipeline::{compose, AdaptationMatrix, Method, TargetDescriptor};
use crate::{Error, Result};

/// Loss above which gradient descent is declared divergent.
pub const DIVERGENCE_LOSS: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct LearnedProjection {
    weights: DMatrix<f64>,
    bias: Option<DVector<f64>>,
    seed: u64,
}

/// Gradient of the mean squared reconstruction loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: DMatrix<f64>,
    pub bias: Option<DVector<f64>>,
}

impl LearnedProjection {
    pub fn new(weights: DMatrix<f64>, bias: Option<DVector<f64>>, seed: u64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty("projection weights"));
        }
        if !all_finite(&weights) {
            return Err(Error::NonFinite("projection weights"));
        }
        if let Some(b) = &bias {
            if b.len() != weights.nrows() {
                return Err(Error::Shape(format!(
                    "bias has {} entries for {} outputs",
                    b.len(),
                    weights.nrows()
                )));
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("projection bias"));
            }
        }
        Ok(Self {
            weights,
            bias,
            seed,
        })
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn bias(&self) -> Option<&DVector<f64>> {
        self.bias.as_ref()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `(C_t, C_s)`.
    pub fn shape(&self) -> (usize, usize) {
        self.weights.shape()
    }

    /// `W x + b·1ᵀ`.
    pub fn forward(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.nrows() != self.weights.ncols() {
            return Err(Error::Shape(format!(
                "{} input channels for a projection expecting {}",
                x.nrows(),
                self.weights.ncols()
            )));
        }
        let mut y = &self.weights * x;
        if let Some(b) = &self.bias {
            for (mut row, bv) in y.row_iter_mut().zip(b.iter()) {
                row.add_scalar_mut(*bv);
            }
        }
        Ok(y)
    }

    /// `(1/T)‖W x_s + b·1ᵀ − x_t‖_F²`.
    pub fn loss(&self, x_s: &DMatrix<f64>, x_t: &DMatrix<f64>) -> Result<f64> {
        let r = residual(self, x_s, x_t)?;
        Ok(r.norm_squared() / x_s.ncols() as f64)
    }

    /// Wraps the projection as an adaptation matrix between labelled channels.
    pub fn to_matrix<S: AsRef<str>, T: AsRef<str>>(
        &self,
        source_labels: &[S],
        target_labels: &[T],
    ) -> Result<AdaptationMatrix> {
        let target = target_labels.iter().map(|l| l.as_ref().to_string()).collect();
        let mut m = AdaptationMatrix::new(
            self.weights.clone(),
            Method::Conv1d,
            source_labels,
            TargetDescriptor::Labels(target),
        )?
        .with_meta("seed", self.seed.to_string());
        if let Some(b) = &self.bias {
            m = m.with_bias(b.clone())?;
        }
        Ok(m)
    }
}

/// Uniform `[-1/√c_s, 1/√c_s]` weights from a generator seeded by `seed`,
/// zero bias when `with_bias` is set.
pub fn init_projection(c_s: usize, c_t: usize, with_bias: bool, seed: u64) -> Result<LearnedProjection> {
    if c_s == 0 || c_t == 0 {
        return Err(Error::InvalidConfig(format!("projection {c_t}x{c_s} has an empty side")));
    }
    let k = 1.0 / (c_s as f64).sqrt();
    let dist = Uniform::new_inclusive(-k, k).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Row-major draw order, independent of the storage layout.
    let mut weights = DMatrix::zeros(c_t, c_s);
    for i in 0..c_t {
        for j in 0..c_s {
            weights[(i, j)] = dist.sample(&mut rng);
        }
    }
    LearnedProjection::new(weights, with_bias.then(|| DVector::zeros(c_t)), seed)
}

fn check_pair(x_s: &DMatrix<f64>, x_t: &DMatrix<f64>) -> Result<()> {
    if x_s.ncols() != x_t.ncols() {
        return Err(Error::Shape(format!(
            "{} source samples vs {} target samples",
            x_s.ncols(),
            x_t.ncols()
        )));
    }
    if x_s.ncols() == 0 {
        return Err(Error::Empty("training samples"));
    }
    if !all_finite(x_s) || !all_finite(x_t) {
        return Err(Error::NonFinite("training samples"));
    }
    Ok(())
}

fn row_means(x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(x.nrows(), x.row_iter().map(|r| r.sum() / r.len() as f64))
}

fn centered(x: &DMatrix<f64>, means: &DVector<f64>) -> DMatrix<f64> {
    let mut c = x.clone();
    for (mut row, m) in c.row_iter_mut().zip(means.iter()) {
        row.add_scalar_mut(-m);
    }
    c
}

/// Closed-form minimizer of `‖W x_s + b·1ᵀ − x_t‖_F² + ridge·‖W‖_F²`.
///
/// The bias (when `with_bias`) is not penalized; it absorbs the channel
/// means, and `W` is then fitted on centered data.
pub fn lsq_fit(
    x_s: &DMatrix<f64>,
    x_t: &DMatrix<f64>,
    ridge: f64,
    with_bias: bool,
) -> Result<LearnedProjection> {
    check_pair(x_s, x_t)?;
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidConfig(format!("ridge {ridge} must be >= 0")));
    }
    let (xs, xt, means) = if with_bias {
        let (ms, mt) = (row_means(x_s), row_means(x_t));
        (centered(x_s, &ms), centered(x_t, &mt), Some((ms, mt)))
    } else {
        (x_s.clone(), x_t.clone(), None)
    };
    let c_s = xs.nrows();
    let gram = &xs * xs.transpose() + DMatrix::identity(c_s, c_s) * ridge;
    let eig = sym_eigen(&gram);
    let max = eig.eigenvalues.abs().max();
    if !(eig.eigenvalues.min() > max * c_s as f64 * f64::EPSILON) {
        return Err(Error::RankDeficient);
    }
    let chol = gram.cholesky().ok_or(Error::RankDeficient)?;
    // W Gram = x_t x_sᵀ, solved as Gram Wᵀ = x_s x_tᵀ.
    let weights = chol.solve(&(&xs * xt.transpose())).transpose();
    let bias = means.map(|(ms, mt)| mt - &weights * ms);
    LearnedProjection::new(weights, bias, 0)
}

fn residual(p: &LearnedProjection, x_s: &DMatrix<f64>, x_t: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_pair(x_s, x_t)?;
    let y = p.forward(x_s)?;
    if y.nrows() != x_t.nrows() {
        return Err(Error::Shape(format!(
            "{} target channels for a projection producing {}",
            x_t.nrows(),
            y.nrows()
        )));
    }
    Ok(y - x_t)
}

/// Gradient of `(1/T)‖p(x_s) − x_t‖_F²`: `(2/T) R x_sᵀ` and `(2/T) R 1`.
pub fn reconstruction_gradient(
    p: &LearnedProjection,
    x_s: &DMatrix<f64>,
    x_t: &DMatrix<f64>,
) -> Result<Gradient> {
    let r = residual(p, x_s, x_t)?;
    let scale = 2.0 / x_s.ncols() as f64;
    Ok(Gradient {
        weights: &r * x_s.transpose() * scale,
        bias: p.bias.as_ref().map(|_| row_means(&r) * 2.0),
    })
}

/// Result of [`sgd_train`].
#[derive(Debug, Clone, PartialEq)]
pub struct Training {
    pub projection: LearnedProjection,
    /// Loss before the first step, then after each epoch.
    pub losses: Vec<f64>,
}

/// Full-batch gradient descent on the reconstruction loss.
pub fn sgd_train(
    p: &LearnedProjection,
    x_s: &DMatrix<f64>,
    x_t: &DMatrix<f64>,
    lr: f64,
    epochs: usize,
) -> Result<Training> {
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(Error::InvalidConfig(format!("learning rate {lr} must be >= 0")));
    }
    let mut p = p.clone();
    let mut losses = Vec::with_capacity(epochs + 1);
    losses.push(p.loss(x_s, x_t)?);
    for epoch in 1..=epochs {
        let g = reconstruction_gradient(&p, x_s, x_t)?;
        p.weights -= g.weights * lr;
        if let (Some(b), Some(gb)) = (p.bias.as_mut(), g.bias) {
            *b -= gb * lr;
        }
        let loss = p.loss(x_s, x_t)?;
        if !(loss <= DIVERGENCE_LOSS) {
            return Err(Error::Divergence { epoch, loss });
        }
        losses.push(loss);
    }
    Ok(Training {
        projection: p,
        losses,
    })
}

/// Output labels used by [`compose_bridge`]: `OUT0`, `OUT1`, ...
pub fn bridge_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("OUT{i}")).collect()
}

/// A learned bridge applied after a fixed matrix, with outputs labelled
/// [`bridge_labels`].
pub fn compose_bridge(fixed: &AdaptationMatrix, bridge: &LearnedProjection) -> Result<AdaptationMatrix> {
    compose_bridge_labelled(fixed, bridge, &bridge_labels(bridge.shape().0))
}

/// [`compose_bridge`] with explicit output labels.
pub fn compose_bridge_labelled<S: AsRef<str>>(
    fixed: &AdaptationMatrix,
    bridge: &LearnedProjection,
    output_labels: &[S],
) -> Result<AdaptationMatrix> {
    let inner = fixed.target_labels();
    if bridge.shape().1 != inner.len() {
        return Err(Error::Shape(format!(
            "bridge takes {} channels, fixed matrix produces {}",
            bridge.shape().1,
            inner.len()
        )));
    }
    let mut out = compose(&bridge.to_matrix(&inner, output_labels)?, fixed)?;
    out.set_meta("construction", "preprocessing + learned bridge");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BuiltinMontage, Montage};
    use crate::pipeline::Signal;
    use crate::ssi::{ssi_matrix, SplineConfig};
    use rand_distr::StandardNormal;

    fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| {
            let v: f64 = StandardNormal.sample(rng);
            v * scale
        })
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = init_projection(3, 3, true, 7).unwrap();
        let b = init_projection(3, 3, true, 7).unwrap();
        assert_eq!(a, b);
        let k = 1.0 / 3f64.sqrt();
        assert!(a.weights().iter().all(|v| v.abs() <= k));
        assert_eq!(a.bias().unwrap(), &DVector::zeros(3));
        assert_ne!(a.weights(), init_projection(3, 3, true, 8).unwrap().weights());
        assert!(init_projection(0, 3, false, 1).is_err());
    }

    #[test]
    fn lsq_recovers_mixing() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = gaussian(&mut rng, 5, 7, 1.0);
        let xs = gaussian(&mut rng, 7, 200, 1.0);
        let xt = &a * &xs;
        for bias in [false, true] {
            let p = lsq_fit(&xs, &xt, 0.0, bias).unwrap();
            assert!((p.weights() - &a).norm() < 1e-8);
            if let Some(b) = p.bias() {
                assert!(b.amax() < 1e-10);
            }
        }
        let p = lsq_fit(&xs, &xs, 0.0, false).unwrap();
        assert!((p.weights() - DMatrix::identity(7, 7)).norm() < 1e-10);
    }

    #[test]
    fn lsq_recovers_offset() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = gaussian(&mut rng, 3, 4, 1.0);
        let xs = gaussian(&mut rng, 4, 100, 1.0);
        let mut xt = &a * &xs;
        let b = DVector::from_row_slice(&[1.0, -2.0, 0.5]);
        for (mut row, bv) in xt.row_iter_mut().zip(b.iter()) {
            row.add_scalar_mut(*bv);
        }
        let p = lsq_fit(&xs, &xt, 0.0, true).unwrap();
        assert!((p.weights() - a).norm() < 1e-8);
        assert!((p.bias().unwrap() - b).amax() < 1e-10);
    }

    #[test]
    fn lsq_normal_equations_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let xs = gaussian(&mut rng, 4, 30, 1.0);
        let xt = gaussian(&mut rng, 3, 30, 1.0);
        let p = lsq_fit(&xs, &xt, 0.0, false).unwrap();
        let r = p.forward(&xs).unwrap() - xt;
        assert!((r * xs.transpose()).amax() < 1e-8);
    }

    #[test]
    fn lsq_ridge_and_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let xs = gaussian(&mut rng, 4, 30, 1.0);
        let xt = gaussian(&mut rng, 2, 30, 1.0);
        let p = lsq_fit(&xs, &xt, 1e12, false).unwrap();
        assert!(p.weights().norm() < 1e-6);
        let mut dup = xs.clone();
        let r0 = dup.row(0).into_owned();
        dup.row_mut(1).copy_from(&r0);
        assert_eq!(lsq_fit(&dup, &xt, 0.0, false).unwrap_err(), Error::RankDeficient);
        assert!(lsq_fit(&dup, &xt, 1e-3, false).is_ok());
        assert!(lsq_fit(&xs, &gaussian(&mut rng, 2, 29, 1.0), 0.0, false).is_err());
    }

    #[test]
    fn gradient_zero_at_optimum_and_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let xs = gaussian(&mut rng, 4, 20, 1.0);
        let p = LearnedProjection::new(gaussian(&mut rng, 3, 4, 1.0), Some(DVector::zeros(3)), 0).unwrap();
        let exact = p.forward(&xs).unwrap();
        let g = reconstruction_gradient(&p, &xs, &exact).unwrap();
        assert_eq!(g.weights, DMatrix::zeros(3, 4));
        assert_eq!(g.bias.unwrap(), DVector::zeros(3));
        // Residual R against target y - R is doubled against y - 2R.
        let r = gaussian(&mut rng, 3, 20, 1.0);
        let g1 = reconstruction_gradient(&p, &xs, &(&exact - &r)).unwrap();
        let g2 = reconstruction_gradient(&p, &xs, &(&exact - &r * 2.0)).unwrap();
        assert!((g2.weights - g1.weights * 2.0).amax() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..5 {
            let xs = gaussian(&mut rng, 6, 32, 1.0);
            let xt = gaussian(&mut rng, 4, 32, 1.0);
            let p = LearnedProjection::new(
                gaussian(&mut rng, 4, 6, 1.0),
                Some(gaussian(&mut rng, 4, 1, 1.0).column(0).into_owned()),
                0,
            )
            .unwrap();
            let g = reconstruction_gradient(&p, &xs, &xt).unwrap();
            let h = 1e-6;
            for i in 0..4 {
                for j in 0..6 {
                    let mut plus = p.clone();
                    plus.weights[(i, j)] += h;
                    let mut minus = p.clone();
                    minus.weights[(i, j)] -= h;
                    let fd = (plus.loss(&xs, &xt).unwrap() - minus.loss(&xs, &xt).unwrap()) / (2.0 * h);
                    let an = g.weights[(i, j)];
                    assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-3), "{fd} vs {an}");
                }
                let mut plus = p.clone();
                plus.bias.as_mut().unwrap()[i] += h;
                let mut minus = p.clone();
                minus.bias.as_mut().unwrap()[i] -= h;
                let fd = (plus.loss(&xs, &xt).unwrap() - minus.loss(&xs, &xt).unwrap()) / (2.0 * h);
                let an = g.bias.as_ref().unwrap()[i];
                assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-3));
            }
        }
    }

    fn small_instance() -> (DMatrix<f64>, DMatrix<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = gaussian(&mut rng, 4, 4, 1.0);
        let xs = gaussian(&mut rng, 4, 256, 3.0);
        let xt = &a * &xs;
        (xs, xt)
    }

    #[test]
    fn gradient_descent_reaches_optimum() {
        let (xs, xt) = small_instance();
        let optimum = lsq_fit(&xs, &xt, 0.0, true).unwrap().loss(&xs, &xt).unwrap();
        let p0 = init_projection(4, 4, true, 3).unwrap();
        let t = sgd_train(&p0, &xs, &xt, 1e-2, 500).unwrap();
        assert_eq!(t.losses.len(), 501);
        assert!(t.losses[500] - optimum < 1e-6, "{} vs {optimum}", t.losses[500]);
    }

    #[test]
    fn small_steps_never_increase_loss() {
        let (xs, xt) = small_instance();
        let p0 = init_projection(4, 4, true, 3).unwrap();
        let t = sgd_train(&p0, &xs, &xt, 1e-4, 200).unwrap();
        assert!(t.losses.windows(2).all(|w| w[1] <= w[0]));
        let still = sgd_train(&p0, &xs, &xt, 0.0, 5).unwrap();
        assert_eq!(still.projection, p0);
    }

    #[test]
    fn divergence_reported() {
        let (xs, xt) = small_instance();
        let p0 = init_projection(4, 4, false, 3).unwrap();
        assert!(matches!(
            sgd_train(&p0, &xs, &xt, 10.0, 100),
            Err(Error::Divergence { .. })
        ));
    }

    #[test]
    fn bridge_after_ssi() {
        let src = Montage::builtin(BuiltinMontage::TenTen64);
        let tgt = Montage::builtin(BuiltinMontage::TenTwenty19);
        let fixed = ssi_matrix(&src, &tgt, &SplineConfig::default()).unwrap();
        let bridge = init_projection(19, 20, true, 1).unwrap();
        let m = compose_bridge(&fixed, &bridge).unwrap();
        assert_eq!(m.shape(), (20, 64));
        assert_eq!(m.metadata()["construction"], "preprocessing + learned bridge");
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Signal::new(gaussian(&mut rng, 64, 50, 1.0), 100.0, &src.labels()).unwrap();
        let seq = bridge.forward(fixed.apply(&x).unwrap().data()).unwrap();
        assert!((m.apply(&x).unwrap().data() - seq).amax() < 1e-12);

        let id = LearnedProjection::new(DMatrix::identity(19, 19), Some(DVector::zeros(19)), 0).unwrap();
        let same = compose_bridge_labelled(&fixed, &id, &tgt.labels()).unwrap();
        assert_eq!(same.matrix(), fixed.matrix());
        assert!(compose_bridge(&fixed, &init_projection(18, 20, false, 1).unwrap()).is_err());
    }
}
