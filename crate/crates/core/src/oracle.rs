//! Synthetic spherical-field signals with known harmonic content.
//!
//! A field is `X = Bᵀ A + noise`, where `B` is the degree-4 harmonic basis at
//! the montage's electrodes and `A` the `25 × T` coefficient time courses.
//! Every random draw comes from a ChaCha8 stream derived from the seed and
//! the epoch index, so output depends only on the spec.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::basis::{sh_basis_matrix, ShIndex};
use crate::geometry::Montage;
use crate::pipeline::{EpochSet, Signal};
use crate::{Error, Result};

/// Degree of the synthesized fields.
pub const SYNTH_L_MAX: usize = 4;
/// Scale of the random part of subject mixings `I + ε L Lᵀ`.
pub const MIXING_EPSILON: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub enum Coefficients {
    /// The same `25 × T` coefficient matrix for every epoch.
    Fixed(DMatrix<f64>),
    /// Fresh i.i.d. Gaussian coefficients per epoch, with a standard deviation
    /// per degree (`degree_std[l]`, missing degrees are zero).
    Random { degree_std: Vec<f64>, n_samples: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubjectMixing {
    None,
    /// `A_j = I + ε L_j L_jᵀ`, `L_j` Gaussian with variance `1/C`.
    RandomSpd { seed: u64 },
}

/// Two-class labels planted in one coefficient: epoch `e` of each subject
/// gets class `e % 2`, and that coefficient's time course is shifted so its
/// mean is exactly `-offset` (class 0) or `+offset` (class 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelSpec {
    pub coefficient: ShIndex,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub montage: Montage,
    pub coefficients: Coefficients,
    pub noise_sigma: f64,
    pub sfreq: f64,
    pub n_subjects: usize,
    pub n_epochs_per_subject: usize,
    pub subject_mixing: SubjectMixing,
    pub seed: u64,
    pub labels: Option<LabelSpec>,
}

impl SynthSpec {
    /// One subject, one epoch, no noise, no mixing.
    pub fn new(montage: Montage, coefficients: Coefficients) -> Self {
        Self {
            montage,
            coefficients,
            noise_sigma: 0.0,
            sfreq: 256.0,
            n_subjects: 1,
            n_epochs_per_subject: 1,
            subject_mixing: SubjectMixing::None,
            seed: 0,
            labels: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n_coef = ShIndex::count(SYNTH_L_MAX);
        match &self.coefficients {
            Coefficients::Fixed(a) => {
                if a.nrows() != n_coef || a.ncols() == 0 {
                    return Err(Error::Shape(format!(
                        "coefficients are {}x{}, need {n_coef}xT",
                        a.nrows(),
                        a.ncols()
                    )));
                }
                if a.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("coefficients"));
                }
            }
            Coefficients::Random {
                degree_std,
                n_samples,
            } => {
                if *n_samples == 0 {
                    return Err(Error::InvalidConfig("n_samples must be >= 1".into()));
                }
                if degree_std.len() > SYNTH_L_MAX + 1 {
                    return Err(Error::InvalidConfig(format!(
                        "{} degree deviations for degrees 0..={SYNTH_L_MAX}",
                        degree_std.len()
                    )));
                }
                if degree_std.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
                    return Err(Error::InvalidConfig("degree deviations must be >= 0".into()));
                }
            }
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidConfig("noise_sigma must be >= 0".into()));
        }
        if !(self.sfreq > 0.0 && self.sfreq.is_finite()) {
            return Err(Error::InvalidConfig("sfreq must be > 0".into()));
        }
        if self.n_subjects == 0 || self.n_epochs_per_subject == 0 {
            return Err(Error::InvalidConfig(
                "n_subjects and n_epochs_per_subject must be >= 1".into(),
            ));
        }
        if let Some(l) = &self.labels {
            if l.coefficient.l() > SYNTH_L_MAX || !l.offset.is_finite() {
                return Err(Error::InvalidConfig("label coefficient out of range".into()));
            }
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        match &self.coefficients {
            Coefficients::Fixed(a) => a.ncols(),
            Coefficients::Random { n_samples, .. } => *n_samples,
        }
    }
}

/// Generator for stream `stream` of the spec's seed.
fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Coefficients of global epoch `index` with class `class`.
fn epoch_coefficients(spec: &SynthSpec, index: u64, class: Option<usize>) -> DMatrix<f64> {
    let mut a = match &spec.coefficients {
        Coefficients::Fixed(a) => a.clone(),
        Coefficients::Random {
            degree_std,
            n_samples,
        } => {
            let mut rng = stream(spec.seed, 2 * index);
            let n_coef = ShIndex::count(SYNTH_L_MAX);
            let mut a = DMatrix::zeros(n_coef, *n_samples);
            // Coefficient-major draw order.
            for k in 0..n_coef {
                let s = degree_std.get(ShIndex::from_flat(k).l()).copied().unwrap_or(0.0);
                for t in 0..*n_samples {
                    let z = gaussian(&mut rng);
                    a[(k, t)] = s * z;
                }
            }
            a
        }
    };
    if let (Some(l), Some(c)) = (&spec.labels, class) {
        let mut row = a.row_mut(l.coefficient.flat());
        let mean = row.sum() / row.len() as f64;
        let target = if c == 1 { l.offset } else { -l.offset };
        row.add_scalar_mut(target - mean);
    }
    a
}

fn add_noise(x: &mut DMatrix<f64>, sigma: f64, seed: u64, index: u64) {
    if sigma == 0.0 {
        return;
    }
    let mut rng = stream(seed, 2 * index + 1);
    for i in 0..x.nrows() {
        for t in 0..x.ncols() {
            let z = gaussian(&mut rng);
            x[(i, t)] += sigma * z;
        }
    }
}

/// `I + ε L Lᵀ` for `subject`.
pub fn subject_mixing(mixing: SubjectMixing, n_channels: usize, subject: usize) -> DMatrix<f64> {
    match mixing {
        SubjectMixing::None => DMatrix::identity(n_channels, n_channels),
        SubjectMixing::RandomSpd { seed } => {
            let mut rng = stream(seed, subject as u64);
            let scale = 1.0 / (n_channels as f64).sqrt();
            let mut l = DMatrix::zeros(n_channels, n_channels);
            for i in 0..n_channels {
                for j in 0..n_channels {
                    l[(i, j)] = scale * gaussian(&mut rng);
                }
            }
            DMatrix::identity(n_channels, n_channels) + &l * l.transpose() * MIXING_EPSILON
        }
    }
}

/// A single noisy field (the first epoch's draws, without subject mixing).
pub fn synth_field(spec: &SynthSpec) -> Result<Signal> {
    spec.validate()?;
    let b = sh_basis_matrix(&spec.montage, SYNTH_L_MAX);
    let mut x = b.transpose() * epoch_coefficients(spec, 0, None);
    add_noise(&mut x, spec.noise_sigma, spec.seed, 0);
    Signal::new(x, spec.sfreq, &spec.montage.labels())
}

pub fn subject_id(j: usize) -> String {
    format!("s{j}")
}

fn generate(spec: &SynthSpec, montage: &Montage, reference: bool) -> Result<EpochSet> {
    spec.validate()?;
    let b = sh_basis_matrix(montage, SYNTH_L_MAX).transpose();
    let labels = montage.labels();
    let n = spec.n_subjects * spec.n_epochs_per_subject;
    let mut epochs = Vec::with_capacity(n);
    let mut ids = Vec::with_capacity(n);
    let mut classes = Vec::with_capacity(n);
    for j in 0..spec.n_subjects {
        let mix = (!reference).then(|| subject_mixing(spec.subject_mixing, montage.len(), j));
        for e in 0..spec.n_epochs_per_subject {
            let index = (j * spec.n_epochs_per_subject + e) as u64;
            let class = spec.labels.map(|_| e % 2);
            let mut x = &b * epoch_coefficients(spec, index, class);
            if let Some(mix) = &mix {
                add_noise(&mut x, spec.noise_sigma, spec.seed, index);
                if spec.subject_mixing != SubjectMixing::None {
                    x = mix * x;
                }
            }
            epochs.push(Signal::new(x, spec.sfreq, &labels)?);
            ids.push(subject_id(j));
            classes.push(e % 2);
        }
    }
    EpochSet::new(epochs, ids, spec.labels.map(|_| classes))
}

/// Per subject `j`, every epoch is `A_j (Bᵀ A_e + noise)`.
pub fn synth_epochs(spec: &SynthSpec) -> Result<EpochSet> {
    generate(spec, &spec.montage, false)
}

/// The noise-free, unmixed fields of [`synth_epochs`] evaluated on another
/// montage: the same coefficients epoch by epoch.
pub fn synth_reference(spec: &SynthSpec, montage: &Montage) -> Result<EpochSet> {
    generate(spec, montage, true)
}
